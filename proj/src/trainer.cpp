#include "pcdiff/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "pcdiff/diffusion.hpp"

namespace pcdiff {

RunConfig RunConfig::desk() { return RunConfig{}; }

RunConfig RunConfig::paper() {
  RunConfig c;
  c.model = DenoiserConfig::paper();
  c.n_train = 1024;
  c.iters = 150000;
  c.batch = 64;
  c.lr = 1.25e-4;
  return c;
}

namespace {

constexpr uint64_t kInitStream = 0x494e4954ULL;   // "INIT"
constexpr uint64_t kTrainStream = 0x5452414eULL;  // "TRAN"

struct TrainContext {
  std::unique_ptr<TwoStreamDenoiser> two_stream;
  std::unique_ptr<VanillaDenoiser> vanilla;

  EpsDenoiser& model() {
    if (two_stream) return *two_stream;
    return *vanilla;
  }
  std::vector<ParamRef> collect() {
    return two_stream ? two_stream->collect() : vanilla->collect();
  }
  CondEncoderParams& encoder() {
    return two_stream ? two_stream->params().encoder : vanilla->encoder();
  }
};

TrainContext make_model(const RunConfig& cfg) {
  TrainContext ctx;
  if (cfg.model_kind == "two_stream") {
    ctx.two_stream = std::make_unique<TwoStreamDenoiser>(cfg.model);
  } else if (cfg.model_kind == "vanilla") {
    ctx.vanilla = std::make_unique<VanillaDenoiser>(cfg.model);
  } else {
    PCD_CHECK_CFG(false, "run_train: unknown model kind '", cfg.model_kind,
                  "'");
  }
  return ctx;
}

TrainResult train_loop(const RunConfig& cfg, const Dataset& ds,
                       TrainContext& ctx, AdamState& adam, Rng& rng,
                       int64_t start_step) {
  PCD_CHECK(cfg.iters >= start_step, "run_train: checkpoint already has ",
            start_step, " steps, config asks for ", cfg.iters);
  const auto train_specs = ds.split_specs(Split::kTrain);
  PCD_CHECK(!train_specs.empty(), "run_train: dataset has no training split");

  namespace fs = std::filesystem;
  const fs::path out_dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
  fs::create_directories(out_dir);
  const std::string loss_path = (out_dir / "loss.csv").string();
  std::ofstream loss_csv(loss_path, start_step == 0 ? std::ios::trunc
                                                    : std::ios::app);
  PCD_CHECK(loss_csv.good(), "run_train: cannot write ", loss_path);
  if (start_step == 0) loss_csv << "step,loss\n";
  loss_csv.precision(17);

  const NoiseSchedule sched = cosine_schedule(cfg.model.T);
  auto params = ctx.collect();

  std::unordered_map<int64_t, StandardizeTransform> tf_cache;
  auto transform_of = [&](const ShapeSpec& spec) -> const StandardizeTransform& {
    auto it = tf_cache.find(spec.id);
    if (it == tf_cache.end())
      it = tf_cache.emplace(spec.id, reference_transform(spec)).first;
    return it->second;
  };

  auto write_checkpoint = [&](int64_t step, const std::string& name) {
    CheckpointMeta meta;
    meta.rng_state = rng.state();
    meta.train_step = step;
    meta.dataset_seed = ds.seed;
    meta.dataset_count = int64_t(ds.entries.size());
    meta.n_train = cfg.n_train;
    meta.schedule_T = cfg.model.T;
    save_checkpoint((out_dir / name).string(), cfg.model_kind, cfg.model,
                    ctx.collect(), adam, meta);
  };

  LossOptions loss_opts;
  loss_opts.cond_dropout = cfg.cond_dropout;
  loss_opts.grad_scale = 1.0 / double(cfg.batch);

  TrainResult result;
  const int64_t obs_points = cfg.model.obs_points();
  for (int64_t step = start_step; step < cfg.iters; ++step) {
    for (auto& p : params) p.tensor->zero_grad();
    double batch_loss = 0.0;
    for (int64_t b = 0; b < cfg.batch; ++b) {
      const ShapeSpec& spec =
          *train_specs[rng.below(uint64_t(train_specs.size()))];
      const StandardizeTransform& tf = transform_of(spec);
      const PointCloud p0 =
          apply_transform(sample_shape(spec, cfg.n_train, rng), tf);
      const Condition cond =
          make_condition(spec, rng, ctx.encoder(), tf, obs_points);
      const LossStats stats =
          training_loss(ctx.model(), p0, cond, sched, rng, loss_opts, b);
      batch_loss += stats.loss;
    }
    batch_loss /= double(cfg.batch);
    adam_step(params, adam);

    result.losses.push_back(batch_loss);
    loss_csv << (step + 1) << "," << batch_loss << "\n";
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 &&
        step + 1 < cfg.iters)
      write_checkpoint(step + 1,
                       "checkpoint_" + std::to_string(step + 1) + ".bin");
  }
  loss_csv.flush();

  write_checkpoint(cfg.iters, "checkpoint.bin");
  result.checkpoint_path = (out_dir / "checkpoint.bin").string();
  result.loss_csv_path = loss_path;
  result.steps = cfg.iters - start_step;
  return result;
}

}  // namespace

TrainResult run_train(const RunConfig& cfg, const Dataset& ds) {
  cfg.model.validate();
  TrainContext ctx = make_model(cfg);
  Rng init_rng(mix_seed(cfg.seed, kInitStream));
  if (ctx.two_stream)
    ctx.two_stream->init(init_rng);
  else
    ctx.vanilla->init(init_rng);

  AdamState adam;
  adam.lr = cfg.lr;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.weight_decay = cfg.weight_decay;

  Rng rng(mix_seed(cfg.seed, kTrainStream));
  return train_loop(cfg, ds, ctx, adam, rng, 0);
}

TrainResult resume_train(const std::string& checkpoint_path,
                         const RunConfig& cfg, const Dataset& ds) {
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  PCD_CHECK(ckpt.kind == cfg.model_kind,
            "resume_train: checkpoint kind '", ckpt.kind,
            "' does not match config kind '", cfg.model_kind, "'");
  // The architecture and data resolution come from the checkpoint; the
  // caller only chooses how far to continue.
  RunConfig run = cfg;
  run.model = ckpt.cfg;
  run.n_train = ckpt.meta.n_train;
  TrainContext ctx;
  ctx.two_stream = std::move(ckpt.two_stream);
  ctx.vanilla = std::move(ckpt.vanilla);
  Rng rng(0);
  rng.set_state(ckpt.meta.rng_state);
  return train_loop(run, ds, ctx, ckpt.adam, rng, ckpt.meta.train_step);
}

}  // namespace pcdiff
