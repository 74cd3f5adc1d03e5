#include "pcdiff/evalrun.hpp"

#include <algorithm>
#include <fstream>

#include "pcdiff/sha1.hpp"
#include "pcdiff/threading.hpp"

namespace pcdiff {

namespace {
constexpr uint64_t kRefStream = 0x45564c52ULL;   // "EVLR"
constexpr uint64_t kCondStream = 0x45564c43ULL;  // "EVLC"
constexpr uint64_t kMetricStream = 0x45564c4dULL;

uint64_t metric_seed(uint64_t base, int64_t id, int64_t n_test) {
  return mix_seed(base, uint64_t(id), uint64_t(n_test), kMetricStream);
}

struct ObjectContext {
  const ShapeSpec* spec = nullptr;
  StandardizeTransform tf;
  PointCloud ref;
  Condition cond;
};

std::vector<const ShapeSpec*> eval_objects(const Dataset& ds,
                                           int64_t max_objects) {
  auto specs = ds.split_specs(Split::kVal);
  PCD_CHECK(!specs.empty(), "eval: dataset has no validation split");
  if (max_objects > 0 && int64_t(specs.size()) > max_objects)
    specs.resize(size_t(max_objects));
  return specs;
}

ObjectContext make_object_context(const ShapeSpec& spec,
                                  const CondEncoderParams& encoder,
                                  const EvalOptions& opts,
                                  int64_t obs_points) {
  ObjectContext ctx;
  ctx.spec = &spec;
  ctx.tf = reference_transform(spec);
  Rng ref_rng(mix_seed(kRefStream, uint64_t(spec.id)));
  ctx.ref = apply_transform(sample_shape(spec, opts.n_ref, ref_rng), ctx.tf);
  Rng cond_rng(mix_seed(opts.seed, uint64_t(spec.id), kCondStream));
  ctx.cond = make_condition(spec, cond_rng, encoder, ctx.tf, obs_points);
  return ctx;
}

SampleConfig sample_config(const EvalOptions& opts, int64_t n_test,
                           uint64_t seed) {
  SampleConfig cfg;
  cfg.n_test = n_test;
  cfg.steps = opts.steps;
  cfg.omega = opts.omega;
  cfg.churn = opts.churn;
  cfg.self_cond = opts.self_cond;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

uint64_t eval_sample_seed(uint64_t base_seed, int64_t object_id,
                          int64_t n_test, int64_t rep) {
  return mix_seed(base_seed, uint64_t(object_id), uint64_t(n_test),
                  uint64_t(rep), 0x53454544ULL);  // "SEED"
}

const EvalRow ScalingResult::mean(int64_t n_test) const {
  for (size_t i = 0; i < resolutions.size(); ++i)
    if (resolutions[i] == n_test) return reports[i].aggregate();
  throw Error("ScalingResult: no row for n_test=" + std::to_string(n_test));
}

void ScalingResult::save_csv(const std::string& path,
                             const std::string& config_hash,
                             const std::string& checkpoint_hash) const {
  std::ofstream f(path);
  PCD_CHECK(f.good(), "save_csv: cannot write ", path);
  f << "# config_hash=" << config_hash << " checkpoint_hash=" << checkpoint_hash
    << "\n";
  f << "n_test,cd_full,cd_at_k,fscore,psnr\n";
  f.precision(17);
  for (size_t i = 0; i < resolutions.size(); ++i) {
    const EvalRow m = reports[i].aggregate();
    f << resolutions[i] << "," << m.cd_full << "," << m.cd_at_k << ","
      << m.fscore << "," << m.psnr << "\n";
  }
}

ScalingResult run_scaling_eval(const LoadedCheckpoint& ckpt, const Dataset& ds,
                               const std::vector<int64_t>& resolutions,
                               const EvalOptions& opts) {
  PCD_CHECK(!resolutions.empty(), "run_scaling_eval: no resolutions given");
  PCD_CHECK(std::is_sorted(resolutions.begin(), resolutions.end()),
            "run_scaling_eval: resolutions must be ascending");
  const auto specs = eval_objects(ds, opts.max_objects);
  const NoiseSchedule sched = cosine_schedule(ckpt.meta.schedule_T);
  const EpsDenoiser& model = ckpt.model();
  const int64_t obs_points = ckpt.cfg.obs_points();

  ScalingResult out;
  out.resolutions = resolutions;
  for (const int64_t n_test : resolutions) {
    EvalReport report;
    report.k = opts.eval_k;
    report.tau = opts.tau;
    report.rows.resize(specs.size());
    parallel_for(
        int64_t(specs.size()),
        [&](int64_t i) {
          NoGradGuard no_grad;
          const ShapeSpec& spec = *specs[size_t(i)];
          const ObjectContext ctx =
              make_object_context(spec, ckpt.encoder(), opts, obs_points);
          const PointCloud cloud =
              sample(model, ctx.cond,
                     sample_config(opts, n_test,
                                   eval_sample_seed(opts.seed, spec.id, n_test,
                                                    0)),
                     sched);
          EvalRow& row = report.rows[size_t(i)];
          row.object_id = spec.id;
          row.family = family_name(spec.family);
          const uint64_t mseed = metric_seed(opts.seed, spec.id, n_test);
          row.cd_full = chamfer(cloud, ctx.ref);
          row.cd_at_k = cd_at_k(cloud, ctx.ref, opts.eval_k, mseed);
          row.fscore = fscore(cloud, ctx.ref, opts.tau, opts.eval_k, mseed);
          row.psnr = psnr(cloud, ctx.ref);
        },
        opts.threads);
    out.reports.push_back(std::move(report));
  }
  return out;
}

ScalingResult run_restricted_read(LoadedCheckpoint& ckpt, const Dataset& ds,
                                  const std::vector<int64_t>& resolutions,
                                  const EvalOptions& opts, int64_t n_cap) {
  PCD_CHECK(ckpt.two_stream != nullptr,
            "run_restricted_read: needs a two-stream checkpoint");
  PCD_CHECK(n_cap >= 1, "run_restricted_read: n_cap must be >= 1");
  for (const int64_t n : resolutions)
    PCD_CHECK(n >= n_cap, "run_restricted_read: n_test=", n,
              " is below the cap ", n_cap);
  ckpt.two_stream->set_restricted_read_cap(n_cap);
  ScalingResult out;
  try {
    out = run_scaling_eval(ckpt, ds, resolutions, opts);
  } catch (...) {
    ckpt.two_stream->set_restricted_read_cap(std::nullopt);
    throw;
  }
  ckpt.two_stream->set_restricted_read_cap(std::nullopt);
  return out;
}

double family_match_rate(const LoadedCheckpoint& ckpt, const Dataset& ds,
                         int64_t n_test, const EvalOptions& opts) {
  const auto specs = eval_objects(ds, opts.max_objects);
  const NoiseSchedule sched = cosine_schedule(ckpt.meta.schedule_T);
  const EpsDenoiser& model = ckpt.model();
  const int64_t obs_points = ckpt.cfg.obs_points();

  // Pair each object with the next validation object of another family.
  std::vector<int64_t> partner(specs.size(), -1);
  for (size_t i = 0; i < specs.size(); ++i)
    for (size_t step = 1; step < specs.size(); ++step) {
      const size_t j = (i + step) % specs.size();
      if (specs[j]->family != specs[i]->family) {
        partner[i] = int64_t(j);
        break;
      }
    }

  std::vector<int> matched(specs.size(), -1);
  parallel_for(
      int64_t(specs.size()),
      [&](int64_t i) {
        if (partner[size_t(i)] < 0) return;
        NoGradGuard no_grad;
        const ShapeSpec& spec = *specs[size_t(i)];
        const ShapeSpec& other = *specs[size_t(partner[size_t(i)])];
        const ObjectContext ctx =
            make_object_context(spec, ckpt.encoder(), opts, obs_points);
        const ObjectContext other_ctx =
            make_object_context(other, ckpt.encoder(), opts, obs_points);
        const PointCloud cloud =
            sample(model, ctx.cond,
                   sample_config(opts, n_test,
                                 eval_sample_seed(opts.seed, spec.id, n_test,
                                                  0)),
                   sched);
        const uint64_t mseed = metric_seed(opts.seed, spec.id, n_test);
        const double own = cd_at_k(cloud, ctx.ref, opts.eval_k, mseed);
        const double cross = cd_at_k(cloud, other_ctx.ref, opts.eval_k, mseed);
        matched[size_t(i)] = own < cross ? 1 : 0;
      },
      opts.threads);

  int64_t pairs = 0, hits = 0;
  for (int m : matched) {
    if (m < 0) continue;
    ++pairs;
    hits += m;
  }
  PCD_CHECK(pairs > 0, "family_match_rate: validation split has one family");
  return double(hits) / double(pairs);
}

std::vector<TradeoffCell> run_tradeoff_sweep(
    const LoadedCheckpoint& ckpt, const Dataset& ds,
    const std::vector<double>& omegas, const std::vector<int64_t>& resolutions,
    const EvalOptions& opts) {
  const auto specs = eval_objects(ds, opts.max_objects);
  const NoiseSchedule sched = cosine_schedule(ckpt.meta.schedule_T);
  const EpsDenoiser& model = ckpt.model();
  const int64_t obs_points = ckpt.cfg.obs_points();
  constexpr int64_t kReps = 3;

  std::vector<TradeoffCell> cells;
  for (const double omega : omegas)
    for (const int64_t n_test : resolutions) {
      std::vector<double> fid0(specs.size(), 0.0);
      std::vector<double> fid_mean(specs.size(), 0.0);
      std::vector<double> var(specs.size(), 0.0);
      parallel_for(
          int64_t(specs.size()),
          [&](int64_t i) {
            NoGradGuard no_grad;
            const ShapeSpec& spec = *specs[size_t(i)];
            const ObjectContext ctx =
                make_object_context(spec, ckpt.encoder(), opts, obs_points);
            EvalOptions run_opts = opts;
            run_opts.omega = omega;
            std::vector<PointCloud> samples;
            samples.reserve(kReps);
            const uint64_t mseed = metric_seed(opts.seed, spec.id, n_test);
            double acc = 0.0;
            for (int64_t rep = 0; rep < kReps; ++rep) {
              samples.push_back(
                  sample(model, ctx.cond,
                         sample_config(run_opts, n_test,
                                       eval_sample_seed(opts.seed, spec.id,
                                                        n_test, rep)),
                         sched));
              const double fid =
                  cd_at_k(samples.back(), ctx.ref, opts.eval_k, mseed);
              if (rep == 0) fid0[size_t(i)] = fid;
              acc += fid;
            }
            fid_mean[size_t(i)] = acc / double(kReps);
            var[size_t(i)] = variability(samples, opts.eval_k, mseed);
          },
          opts.threads);

      TradeoffCell cell;
      cell.omega = omega;
      cell.n_test = n_test;
      for (size_t i = 0; i < specs.size(); ++i) {
        cell.fidelity_rep0 += fid0[i];
        cell.fidelity_mean += fid_mean[i];
        cell.variability += var[i];
      }
      const double inv = 1.0 / double(specs.size());
      cell.fidelity_rep0 *= inv;
      cell.fidelity_mean *= inv;
      cell.variability *= inv;
      cells.push_back(cell);
    }
  return cells;
}

void save_tradeoff_csv(const std::vector<TradeoffCell>& cells,
                       const std::string& path, const std::string& config_hash,
                       const std::string& checkpoint_hash) {
  std::ofstream f(path);
  PCD_CHECK(f.good(), "save_tradeoff_csv: cannot write ", path);
  f << "# config_hash=" << config_hash << " checkpoint_hash="
    << checkpoint_hash << "\n";
  f << "omega,n_test,fidelity_rep0,fidelity_mean3,variability\n";
  f.precision(17);
  for (const auto& c : cells)
    f << c.omega << "," << c.n_test << "," << c.fidelity_rep0 << ","
      << c.fidelity_mean << "," << c.variability << "\n";
}

namespace {
AblationCell eval_cell(const std::string& label,
                       const std::string& checkpoint_path, const Dataset& ds,
                       const EvalOptions& opts, int64_t n_test) {
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  const ScalingResult res = run_scaling_eval(ckpt, ds, {n_test}, opts);
  AblationCell cell;
  cell.label = label;
  cell.mean = res.reports[0].aggregate();
  return cell;
}
}  // namespace

std::vector<AblationCell> run_latent_ablation(
    const RunConfig& base, const Dataset& ds,
    const std::vector<int64_t>& m_inits, const EvalOptions& opts,
    int64_t n_test) {
  std::vector<AblationCell> cells;
  for (const int64_t m : m_inits) {
    RunConfig cfg = base;
    cfg.model.m_init = m;
    cfg.out_dir = base.out_dir + "/latent_" + std::to_string(m);
    const TrainResult tr = run_train(cfg, ds);
    cells.push_back(eval_cell("m_init=" + std::to_string(m),
                              tr.checkpoint_path, ds, opts, n_test));
  }
  return cells;
}

std::vector<AblationCell> run_train_resolution_ablation(
    const RunConfig& base, const Dataset& ds,
    const std::vector<int64_t>& n_trains, const EvalOptions& opts,
    int64_t n_test) {
  std::vector<AblationCell> cells;
  for (const int64_t n : n_trains) {
    RunConfig cfg = base;
    cfg.n_train = n;
    cfg.out_dir = base.out_dir + "/ntrain_" + std::to_string(n);
    const TrainResult tr = run_train(cfg, ds);
    cells.push_back(eval_cell("n_train=" + std::to_string(n),
                              tr.checkpoint_path, ds, opts, n_test));
  }
  return cells;
}

std::vector<MixtureRow> run_mixture_ablation(const LoadedCheckpoint& ckpt,
                                             const Dataset& ds,
                                             const std::vector<int64_t>& ks,
                                             const EvalOptions& opts) {
  const auto specs = eval_objects(ds, opts.max_objects);
  const NoiseSchedule sched = cosine_schedule(ckpt.meta.schedule_T);
  const EpsDenoiser& model = ckpt.model();
  const int64_t obs_points = ckpt.cfg.obs_points();
  const int64_t n_train = ckpt.meta.n_train;
  PCD_CHECK(n_train >= 1, "run_mixture_ablation: checkpoint lacks n_train");

  std::vector<MixtureRow> rows;
  for (const int64_t k : ks) {
    const int64_t n_total = k * n_train;
    std::vector<double> mix_cd(specs.size(), 0.0);
    std::vector<double> one_cd(specs.size(), 0.0);
    parallel_for(
        int64_t(specs.size()),
        [&](int64_t i) {
          NoGradGuard no_grad;
          const ShapeSpec& spec = *specs[size_t(i)];
          const ObjectContext ctx =
              make_object_context(spec, ckpt.encoder(), opts, obs_points);
          const uint64_t seed =
              eval_sample_seed(opts.seed, spec.id, n_total, 0);
          const PointCloud mixture = mixture_sample(
              model, ctx.cond, k, sample_config(opts, n_train, seed), sched);
          const PointCloud oneshot =
              sample(model, ctx.cond, sample_config(opts, n_total, seed),
                     sched);
          const uint64_t mseed = metric_seed(opts.seed, spec.id, n_total);
          mix_cd[size_t(i)] = cd_at_k(mixture, ctx.ref, opts.eval_k, mseed);
          one_cd[size_t(i)] = cd_at_k(oneshot, ctx.ref, opts.eval_k, mseed);
        },
        opts.threads);
    MixtureRow row;
    row.k = k;
    row.n_total = n_total;
    for (size_t i = 0; i < specs.size(); ++i) {
      row.cd_mixture += mix_cd[i];
      row.cd_oneshot += one_cd[i];
    }
    row.cd_mixture /= double(specs.size());
    row.cd_oneshot /= double(specs.size());
    rows.push_back(row);
  }
  return rows;
}

void save_ablation_csv(const std::vector<AblationCell>& cells,
                       const std::string& path, const std::string& config_hash,
                       const std::string& checkpoint_hash) {
  std::ofstream f(path);
  PCD_CHECK(f.good(), "save_ablation_csv: cannot write ", path);
  f << "# config_hash=" << config_hash << " checkpoint_hash="
    << checkpoint_hash << "\n";
  f << "cell,cd_full,cd_at_k,fscore,psnr\n";
  f.precision(17);
  for (const auto& c : cells)
    f << c.label << "," << c.mean.cd_full << "," << c.mean.cd_at_k << ","
      << c.mean.fscore << "," << c.mean.psnr << "\n";
}

}  // namespace pcdiff
