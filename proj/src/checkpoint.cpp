#include "pcdiff/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "pcdiff/sha1.hpp"

namespace pcdiff {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'p', 'c', 'd', 'c', 'k', 'p', 't', '\0'};
constexpr uint32_t kVersion = 1;

json config_to_json(const DenoiserConfig& c) {
  json j;
  j["L"] = c.L;
  j["H"] = c.H;
  j["d"] = c.d;
  j["m_init"] = c.m_init;
  j["heads"] = c.heads;
  j["cond_tokens"] = c.cond_tokens;
  j["T"] = c.T;
  j["self_cond_prob"] = c.self_cond_prob;
  if (c.restricted_read_cap) j["restricted_read_cap"] = *c.restricted_read_cap;
  return j;
}

DenoiserConfig config_from_json(const json& j) {
  DenoiserConfig c;
  c.L = j.at("L").get<int64_t>();
  c.H = j.at("H").get<int64_t>();
  c.d = j.at("d").get<int64_t>();
  c.m_init = j.at("m_init").get<int64_t>();
  c.heads = j.at("heads").get<int64_t>();
  c.cond_tokens = j.at("cond_tokens").get<int64_t>();
  c.T = j.at("T").get<int64_t>();
  c.self_cond_prob = j.at("self_cond_prob").get<double>();
  if (j.contains("restricted_read_cap"))
    c.restricted_read_cap = j.at("restricted_read_cap").get<int64_t>();
  return c;
}

void write_doubles(std::ofstream& f, const std::vector<double>& v) {
  f.write(reinterpret_cast<const char*>(v.data()),
          std::streamsize(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& f, std::vector<double>& v, size_t count) {
  v.resize(count);
  f.read(reinterpret_cast<char*>(v.data()),
         std::streamsize(count * sizeof(double)));
  PCD_CHECK(f.good(), "checkpoint: truncated tensor payload");
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const DenoiserConfig& cfg, std::vector<ParamRef> params,
                     const AdamState& adam, const CheckpointMeta& meta) {
  json header;
  header["kind"] = kind;
  header["config"] = config_to_json(cfg);
  json tensors = json::array();
  for (const auto& p : params) {
    json t;
    t["name"] = p.name;
    t["rows"] = p.tensor->rows();
    t["cols"] = p.tensor->cols();
    tensors.push_back(std::move(t));
  }
  header["tensors"] = std::move(tensors);
  header["adam"] = {{"lr", adam.lr},
                    {"beta1", adam.beta1},
                    {"beta2", adam.beta2},
                    {"weight_decay", adam.weight_decay},
                    {"eps", adam.eps},
                    {"step", adam.step},
                    {"has_moments", !adam.m.empty()}};
  header["rng_state"] = meta.rng_state;
  header["train_step"] = meta.train_step;
  header["dataset_seed"] = meta.dataset_seed;
  header["dataset_count"] = meta.dataset_count;
  header["n_train"] = meta.n_train;
  header["schedule_T"] = meta.schedule_T;

  const std::string head = header.dump();
  std::ofstream f(path, std::ios::binary);
  PCD_CHECK(f.good(), "save_checkpoint: cannot write ", path);
  f.write(kMagic, 8);
  const uint32_t version = kVersion;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const uint64_t head_len = head.size();
  f.write(reinterpret_cast<const char*>(&head_len), 8);
  f.write(head.data(), std::streamsize(head.size()));
  for (const auto& p : params) write_doubles(f, p.tensor->data());
  if (!adam.m.empty()) {
    PCD_CHECK(adam.m.size() == params.size() && adam.v.size() == params.size(),
              "save_checkpoint: Adam moments misaligned with parameters");
    for (const auto& m : adam.m) write_doubles(f, m);
    for (const auto& v : adam.v) write_doubles(f, v);
  }
  PCD_CHECK(f.good(), "save_checkpoint: write failure on ", path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  PCD_CHECK(f.good(), "load_checkpoint: cannot open ", path);
  char magic[8];
  f.read(magic, 8);
  PCD_CHECK(f.good() && std::memcmp(magic, kMagic, 8) == 0,
            "load_checkpoint: ", path, " is not a pcdiff checkpoint");
  uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  PCD_CHECK(version == kVersion, "load_checkpoint: unsupported version ",
            version);
  uint64_t head_len = 0;
  f.read(reinterpret_cast<char*>(&head_len), 8);
  PCD_CHECK(f.good() && head_len > 0 && head_len < (1ULL << 31),
            "load_checkpoint: bad header length");
  std::string head(head_len, '\0');
  f.read(head.data(), std::streamsize(head_len));
  PCD_CHECK(f.good(), "load_checkpoint: truncated header");
  const json header = json::parse(head);

  LoadedCheckpoint out;
  out.kind = header.at("kind").get<std::string>();
  out.cfg = config_from_json(header.at("config"));

  if (out.kind == "two_stream") {
    out.two_stream = std::make_unique<TwoStreamDenoiser>(out.cfg);
    Rng dummy(0);
    out.two_stream->init(dummy);
  } else if (out.kind == "vanilla") {
    out.vanilla = std::make_unique<VanillaDenoiser>(out.cfg);
    Rng dummy(0);
    out.vanilla->init(dummy);
  } else {
    PCD_CHECK(false, "load_checkpoint: unknown model kind '", out.kind, "'");
  }

  auto params = out.collect();
  const json& tensors = header.at("tensors");
  PCD_CHECK(tensors.size() == params.size(),
            "load_checkpoint: header lists ", tensors.size(),
            " tensors, model has ", params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const json& t = tensors[i];
    PCD_CHECK(t.at("name").get<std::string>() == params[i].name,
              "load_checkpoint: tensor ", i, " is '",
              t.at("name").get<std::string>(), "', expected '", params[i].name,
              "'");
    PCD_CHECK(t.at("rows").get<int64_t>() == params[i].tensor->rows() &&
                  t.at("cols").get<int64_t>() == params[i].tensor->cols(),
              "load_checkpoint: tensor '", params[i].name, "' shape mismatch");
    read_doubles(f, params[i].tensor->data_mut(),
                 size_t(params[i].tensor->numel()));
  }

  const json& adam_j = header.at("adam");
  out.adam.lr = adam_j.at("lr").get<double>();
  out.adam.beta1 = adam_j.at("beta1").get<double>();
  out.adam.beta2 = adam_j.at("beta2").get<double>();
  out.adam.weight_decay = adam_j.at("weight_decay").get<double>();
  out.adam.eps = adam_j.at("eps").get<double>();
  out.adam.step = adam_j.at("step").get<int64_t>();
  if (adam_j.at("has_moments").get<bool>()) {
    out.adam.m.resize(params.size());
    out.adam.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i)
      read_doubles(f, out.adam.m[i], size_t(params[i].tensor->numel()));
    for (size_t i = 0; i < params.size(); ++i)
      read_doubles(f, out.adam.v[i], size_t(params[i].tensor->numel()));
  }

  const auto rng = header.at("rng_state").get<std::array<uint64_t, 4>>();
  out.meta.rng_state = rng;
  out.meta.train_step = header.at("train_step").get<int64_t>();
  out.meta.dataset_seed = header.at("dataset_seed").get<uint64_t>();
  out.meta.dataset_count = header.at("dataset_count").get<int64_t>();
  out.meta.n_train = header.at("n_train").get<int64_t>();
  out.meta.schedule_T = header.at("schedule_T").get<int64_t>();
  return out;
}

EpsDenoiser& LoadedCheckpoint::model() const {
  PCD_CHECK(two_stream || vanilla, "LoadedCheckpoint: empty");
  if (two_stream) return *two_stream;
  return *vanilla;
}

std::vector<ParamRef> LoadedCheckpoint::collect() const {
  if (two_stream) return two_stream->collect();
  PCD_CHECK(vanilla != nullptr, "LoadedCheckpoint: empty");
  return vanilla->collect();
}

const CondEncoderParams& LoadedCheckpoint::encoder() const {
  if (two_stream) return two_stream->params().encoder;
  PCD_CHECK(vanilla != nullptr, "LoadedCheckpoint: empty");
  return vanilla->encoder();
}

std::string config_hash(const DenoiserConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  return sha1_hex(dump);
}

}  // namespace pcdiff
