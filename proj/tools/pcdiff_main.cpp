// Command-line front end: dataset construction, training, sampling,
#include <fstream>
// evaluation tables, complexity benchmarks, ablations and surface
// extraction. Every run is reproducible from its flags; `--config` loads
// the same keys from an INI/TOML file (see README).

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "pcdiff/bench.hpp"
#include "pcdiff/evalrun.hpp"
#include "pcdiff/obj_io.hpp"
#include "pcdiff/ply.hpp"
#include "pcdiff/sha1.hpp"

using namespace pcdiff;

namespace {

struct ModelFlags {
  std::string preset = "desk";
  int64_t L = -1, H = -1, d = -1, m_init = -1, heads = -1;

  DenoiserConfig resolve() const {
    DenoiserConfig cfg = preset == "paper" ? DenoiserConfig::paper()
                                           : DenoiserConfig::desk();
    if (L > 0) cfg.L = L;
    if (H > 0) cfg.H = H;
    if (d > 0) cfg.d = d;
    if (m_init > 0) cfg.m_init = m_init;
    if (heads > 0) cfg.heads = heads;
    cfg.validate();
    return cfg;
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf) {
  cmd->add_option("--preset", mf.preset, "Model preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--blocks", mf.L, "Two-stream blocks (L)");
  cmd->add_option("--latent-layers", mf.H, "Latent transformer layers (H)");
  cmd->add_option("--width", mf.d, "Token width (d)");
  cmd->add_option("--latent-tokens", mf.m_init, "Learned latent tokens");
  cmd->add_option("--heads", mf.heads, "Attention heads");
}

std::string checkpoint_hash_of(const std::string& path) {
  return git_blob_hash_file(path);
}

Dataset load_ds(const std::string& manifest) {
  PCD_CHECK(!manifest.empty(), "missing --manifest");
  return load_manifest(manifest);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resolution-invariant point cloud diffusion"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file");

  // ---- dataset-build ----
  auto* c_data = app.add_subcommand("dataset-build",
                                    "Generate the synthetic shape corpus");
  int64_t ds_count = 2048;
  uint64_t ds_seed = 1;
  std::string ds_out = "manifest.txt";
  c_data->add_option("--count", ds_count, "Number of shapes");
  c_data->add_option("--seed", ds_seed, "Corpus seed");
  c_data->add_option("--out", ds_out, "Manifest path");

  // ---- train ----
  auto* c_train = app.add_subcommand("train", "Train a denoiser");
  ModelFlags train_mf;
  add_model_flags(c_train, train_mf);
  RunConfig rc = RunConfig::desk();
  std::string train_manifest, resume_from;
  c_train->add_option("--manifest", train_manifest, "Dataset manifest")
      ->required();
  c_train->add_option("--out-dir", rc.out_dir, "Run output directory")
      ->required();
  c_train->add_option("--kind", rc.model_kind, "two_stream or vanilla")
      ->check(CLI::IsMember({"two_stream", "vanilla"}));
  c_train->add_option("--n-train", rc.n_train, "Training resolution");
  c_train->add_option("--iters", rc.iters, "Training iterations");
  c_train->add_option("--batch", rc.batch, "Batch size");
  c_train->add_option("--lr", rc.lr, "Learning rate");
  c_train->add_option("--weight-decay", rc.weight_decay, "Weight decay");
  c_train->add_option("--cond-dropout", rc.cond_dropout,
                      "Condition dropout probability");
  c_train->add_option("--seed", rc.seed, "Run seed");
  c_train->add_option("--checkpoint-every", rc.checkpoint_every,
                      "Periodic checkpoint interval (0 = final only)");
  c_train->add_option("--resume", resume_from, "Checkpoint to continue from");

  // ---- sample ----
  auto* c_sample = app.add_subcommand("sample", "Generate a point cloud");
  std::string s_ckpt, s_manifest, s_out = "sample.ply", s_trace;
  int64_t s_object = 0, s_mixture_k = 1;
  SampleConfig scfg;
  c_sample->add_option("--checkpoint", s_ckpt)->required();
  c_sample->add_option("--manifest", s_manifest)->required();
  c_sample->add_option("--object-id", s_object, "Dataset shape id to condition on");
  c_sample->add_option("--n-test", scfg.n_test, "Output resolution");
  c_sample->add_option("--steps", scfg.steps, "Sampler steps");
  c_sample->add_option("--omega", scfg.omega, "CFG scale");
  c_sample->add_option("--seed", scfg.seed, "Sampling seed");
  c_sample->add_option("--churn", scfg.churn, "Stochastic churn amount");
  c_sample->add_flag("!--no-self-cond", scfg.self_cond,
                     "Disable latent self-conditioning");
  c_sample->add_option("--mixture-k", s_mixture_k,
                       "Concatenate k independent runs (mixture baseline)");
  c_sample->add_option("--trace", s_trace, "Per-step trace CSV");
  c_sample->add_option("--out", s_out, "Output PLY path");

  // ---- eval / scaling / restricted-read / tradeoff ----
  EvalOptions eopts;
  std::string e_ckpt, e_manifest, e_out = "eval.csv";
  std::vector<int64_t> e_resolutions{256, 512, 1024};
  std::vector<double> e_omegas{0.0, 0.5, 1.0, 2.0, 4.0};
  int64_t e_cap = -1;

  auto add_eval_flags = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", e_ckpt)->required();
    cmd->add_option("--manifest", e_manifest)->required();
    cmd->add_option("--out", e_out, "Output CSV");
    cmd->add_option("--eval-k", eopts.eval_k, "CD@k subsample size");
    cmd->add_option("--tau", eopts.tau, "F-score threshold");
    cmd->add_option("--n-ref", eopts.n_ref, "Reference cloud resolution");
    cmd->add_option("--steps", eopts.steps, "Sampler steps");
    cmd->add_option("--omega", eopts.omega, "CFG scale");
    cmd->add_option("--seed", eopts.seed, "Evaluation seed");
    cmd->add_option("--threads", eopts.threads, "Worker threads (0 = auto)");
    cmd->add_option("--max-objects", eopts.max_objects,
                    "Cap validation objects (0 = all)");
  };

  auto* c_eval = app.add_subcommand("eval", "Evaluate at one resolution");
  add_eval_flags(c_eval);
  int64_t eval_n_test = 256;
  c_eval->add_option("--n-test", eval_n_test, "Generation resolution");

  auto* c_scaling =
      app.add_subcommand("scaling", "Resolution-scaling table");
  add_eval_flags(c_scaling);
  c_scaling->add_option("--resolutions", e_resolutions, "Ascending n_test list");

  auto* c_restricted = app.add_subcommand(
      "restricted-read", "Scaling table with capped read attention");
  add_eval_flags(c_restricted);
  c_restricted->add_option("--resolutions", e_resolutions);
  c_restricted->add_option("--cap", e_cap, "Read cap (default: n_train)");

  auto* c_tradeoff =
      app.add_subcommand("tradeoff", "Fidelity/variability sweep");
  add_eval_flags(c_tradeoff);
  c_tradeoff->add_option("--resolutions", e_resolutions);
  c_tradeoff->add_option("--omegas", e_omegas, "CFG scales");

  // ---- bench ----
  auto* c_bench = app.add_subcommand("bench", "Complexity benchmark");
  ModelFlags bench_mf;
  add_model_flags(c_bench, bench_mf);
  BenchOptions bopts;
  std::vector<std::string> b_kinds{"two_stream", "vanilla"};
  std::vector<std::string> b_phases{"inference", "train"};
  std::vector<int64_t> b_resolutions{512, 1024, 2048, 4096, 8192, 16384};
  std::string b_out = "bench.csv";
  c_bench->add_option("--kinds", b_kinds);
  c_bench->add_option("--phases", b_phases);
  c_bench->add_option("--resolutions", b_resolutions);
  c_bench->add_option("--iters", bopts.iters, "Timed iterations per cell");
  c_bench->add_option("--warmup", bopts.warmup);
  c_bench->add_option("--n-train", bopts.n_train_fixed,
                      "Two-stream training resolution");
  c_bench->add_option("--out", b_out);

  // ---- ablate ----
  auto* c_ablate = app.add_subcommand("ablate", "Ablation tables");
  ModelFlags ablate_mf;
  add_model_flags(c_ablate, ablate_mf);
  std::string a_mode = "latent", a_manifest, a_out_dir = "ablation",
              a_ckpt, a_out = "ablation.csv";
  std::vector<int64_t> a_values{2, 32};
  RunConfig arc = RunConfig::desk();
  EvalOptions aopts;
  int64_t a_n_test = 1024;
  c_ablate->add_option("--mode", a_mode,
                       "latent | train-res | mixture")
      ->check(CLI::IsMember({"latent", "train-res", "mixture"}));
  c_ablate->add_option("--manifest", a_manifest)->required();
  c_ablate->add_option("--out-dir", a_out_dir);
  c_ablate->add_option("--out", a_out);
  c_ablate->add_option("--values", a_values,
                       "m_init / n_train / mixture-k values");
  c_ablate->add_option("--checkpoint", a_ckpt, "Checkpoint (mixture mode)");
  c_ablate->add_option("--iters", arc.iters);
  c_ablate->add_option("--batch", arc.batch);
  c_ablate->add_option("--lr", arc.lr);
  c_ablate->add_option("--n-train", arc.n_train);
  c_ablate->add_option("--seed", arc.seed);
  c_ablate->add_option("--n-test", a_n_test, "Evaluation resolution");
  c_ablate->add_option("--eval-k", aopts.eval_k);
  c_ablate->add_option("--steps", aopts.steps);
  c_ablate->add_option("--threads", aopts.threads);
  c_ablate->add_option("--max-objects", aopts.max_objects);

  // ---- extract-surface ----
  auto* c_surface = app.add_subcommand(
      "extract-surface", "Mean-distance field + marching cubes from a PLY");
  std::string sf_in, sf_out = "mesh.obj", sf_field;
  int64_t sf_grid = 128, sf_k = 8;
  double sf_threshold = -1.0;
  c_surface->add_option("--in", sf_in, "Input point cloud (PLY)")->required();
  c_surface->add_option("--grid", sf_grid, "Grid resolution per axis");
  c_surface->add_option("--k", sf_k, "Neighbors for the mean distance");
  c_surface->add_option("--threshold", sf_threshold,
                        "Iso threshold (default: 1.5 x median NN spacing)");
  c_surface->add_option("--dump-field", sf_field, "Optional raw field dump");
  c_surface->add_option("--out", sf_out, "Output OBJ path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_data) {
      const Dataset ds = build_dataset(ds_count, ds_seed);
      save_manifest(ds, ds_out);
      std::cout << "wrote " << ds_out << " (" << ds.count(Split::kTrain)
                << " train / " << ds.count(Split::kVal) << " val)\n";
    } else if (*c_train) {
      rc.model = train_mf.resolve();
      const Dataset ds = load_ds(train_manifest);
      const TrainResult res = resume_from.empty()
                                  ? run_train(rc, ds)
                                  : resume_train(resume_from, rc, ds);
      std::cout << "checkpoint: " << res.checkpoint_path << "\n"
                << "loss csv:   " << res.loss_csv_path << "\n";
    } else if (*c_sample) {
      const LoadedCheckpoint ckpt = load_checkpoint(s_ckpt);
      const Dataset ds = load_ds(s_manifest);
      PCD_CHECK(s_object >= 0 && s_object < int64_t(ds.entries.size()),
                "sample: object id ", s_object, " outside the dataset");
      const ShapeSpec& spec = ds.entries[size_t(s_object)].spec;
      const StandardizeTransform tf = reference_transform(spec);
      NoGradGuard no_grad;
      Rng cond_rng(mix_seed(scfg.seed, uint64_t(spec.id), 0xC0ull));
      const Condition cond = make_condition(spec, cond_rng, ckpt.encoder(), tf,
                                            ckpt.cfg.obs_points());
      const NoiseSchedule sched = cosine_schedule(ckpt.meta.schedule_T);
      scfg.trace_path = s_trace;
      const PointCloud cloud =
          s_mixture_k > 1
              ? mixture_sample(ckpt.model(), cond, s_mixture_k, scfg, sched)
              : sample(ckpt.model(), cond, scfg, sched);
      save_ply(cloud, s_out);
      std::cout << "wrote " << s_out << " (" << cloud.size() << " points)\n";
    } else if (*c_eval || *c_scaling) {
      const LoadedCheckpoint ckpt = load_checkpoint(e_ckpt);
      const Dataset ds = load_ds(e_manifest);
      const std::vector<int64_t> res =
          *c_eval ? std::vector<int64_t>{eval_n_test} : e_resolutions;
      const ScalingResult table = run_scaling_eval(ckpt, ds, res, eopts);
      table.save_csv(e_out, config_hash(ckpt.cfg), checkpoint_hash_of(e_ckpt));
      std::cout << "wrote " << e_out << "\n";
      for (size_t i = 0; i < table.resolutions.size(); ++i) {
        const EvalRow m = table.reports[i].aggregate();
        std::cout << "n_test=" << table.resolutions[i]
                  << " cd@[" << eopts.eval_k << "]=" << m.cd_at_k
                  << " cd_full=" << m.cd_full << " fscore=" << m.fscore
                  << " psnr=" << m.psnr << "\n";
      }
    } else if (*c_restricted) {
      LoadedCheckpoint ckpt = load_checkpoint(e_ckpt);
      const Dataset ds = load_ds(e_manifest);
      const int64_t cap = e_cap > 0 ? e_cap : ckpt.meta.n_train;
      const ScalingResult table =
          run_restricted_read(ckpt, ds, e_resolutions, eopts, cap);
      table.save_csv(e_out, config_hash(ckpt.cfg), checkpoint_hash_of(e_ckpt));
      std::cout << "wrote " << e_out << " (cap=" << cap << ")\n";
    } else if (*c_tradeoff) {
      const LoadedCheckpoint ckpt = load_checkpoint(e_ckpt);
      const Dataset ds = load_ds(e_manifest);
      const auto cells =
          run_tradeoff_sweep(ckpt, ds, e_omegas, e_resolutions, eopts);
      save_tradeoff_csv(cells, e_out, config_hash(ckpt.cfg),
                        checkpoint_hash_of(e_ckpt));
      std::cout << "wrote " << e_out << "\n";
    } else if (*c_bench) {
      bopts.cfg = bench_mf.resolve();
      const auto records = run_bench(b_kinds, b_phases, b_resolutions, bopts);
      save_bench_csv(records, b_out, config_hash(bopts.cfg));
      for (const auto& k : b_kinds)
        for (const auto& p : b_phases) {
          try {
            std::cout << k << "/" << p
                      << " log-log slope: " << slope_for(records, k, p) << "\n";
          } catch (const Error&) {
          }
        }
      std::cout << "wrote " << b_out << "\n";
    } else if (*c_ablate) {
      arc.model = ablate_mf.resolve();
      arc.out_dir = a_out_dir;
      const Dataset ds = load_ds(a_manifest);
      if (a_mode == "mixture") {
        PCD_CHECK(!a_ckpt.empty(), "ablate --mode mixture needs --checkpoint");
        const LoadedCheckpoint ckpt = load_checkpoint(a_ckpt);
        const auto rows = run_mixture_ablation(ckpt, ds, a_values, aopts);
        std::ofstream f(a_out);
        f << "# config_hash=" << config_hash(ckpt.cfg)
          << " checkpoint_hash=" << checkpoint_hash_of(a_ckpt) << "\n";
        f << "k,n_total,cd_mixture,cd_oneshot\n";
        f.precision(17);
        for (const auto& r : rows)
          f << r.k << "," << r.n_total << "," << r.cd_mixture << ","
            << r.cd_oneshot << "\n";
        std::cout << "wrote " << a_out << "\n";
      } else {
        const auto cells =
            a_mode == "latent"
                ? run_latent_ablation(arc, ds, a_values, aopts, a_n_test)
                : run_train_resolution_ablation(arc, ds, a_values, aopts,
                                                a_n_test);
        save_ablation_csv(cells, a_out, config_hash(arc.model), "trained");
        std::cout << "wrote " << a_out << "\n";
      }
    } else if (*c_surface) {
      const PointCloud cloud = load_ply(sf_in);
      const ScalarField field = mean_distance_field(cloud, sf_grid, sf_k);
      const double threshold =
          sf_threshold > 0 ? sf_threshold : 1.5 * median_nn_spacing(cloud);
      if (!sf_field.empty()) save_field(field, sf_field);
      const TriangleMesh mesh = marching_cubes(field, threshold);
      save_obj(mesh, sf_out);
      std::cout << "wrote " << sf_out << " (" << mesh.vertices.size()
                << " vertices, " << mesh.triangles.size()
                << " triangles, threshold=" << threshold
                << (watertight(mesh) ? ", watertight" : "") << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
