#include "tsr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "tsr/rng.hpp"

namespace tsr {

namespace {

void put_u32(std::string* b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string* b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string* b, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(b, bits);
}

void put_str(std::string* b, const std::string& s) {
  put_u32(b, static_cast<std::uint32_t>(s.size()));
  b->append(s);
}

void put_f64_vec(std::string* b, const std::vector<double>& v) {
  put_u64(b, v.size());
  for (const double x : v) put_f64(b, x);
}

struct Reader {
  const unsigned char* p;
  std::size_t n;
  std::size_t pos = 0;

  void need(std::size_t k, const char* what) const {
    if (pos + k > n) {
      throw checkpoint_truncated_error(std::string("checkpoint truncated reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t len = u32(what);
    need(len, what);
    std::string s(reinterpret_cast<const char*>(p + pos), len);
    pos += len;
    return s;
  }
  std::vector<double> f64_vec(const char* what) {
    const std::uint64_t len = u64(what);
    need(len * 8, what);
    std::vector<double> v(static_cast<std::size_t>(len));
    for (auto& x : v) x = f64(what);
    return v;
  }
};

std::uint64_t bytes_checksum(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_adam(std::string* b, const AdamState& st) {
  put_u64(b, static_cast<std::uint64_t>(st.step));
  put_f64(b, st.lr);
  put_f64(b, st.beta1);
  put_f64(b, st.beta2);
  put_f64(b, st.eps);
  put_f64(b, st.weight_decay);
  put_u64(b, st.m.size());
  for (const auto& [path, m] : st.m) {
    put_str(b, path);
    put_f64_vec(b, m);
    put_f64_vec(b, st.v.at(path));
  }
}

AdamState read_adam(Reader& r) {
  AdamState st;
  st.step = static_cast<std::int64_t>(r.u64("optimizer step"));
  st.lr = r.f64("optimizer lr");
  st.beta1 = r.f64("optimizer beta1");
  st.beta2 = r.f64("optimizer beta2");
  st.eps = r.f64("optimizer eps");
  st.weight_decay = r.f64("optimizer weight decay");
  const std::uint64_t n = r.u64("optimizer moment count");
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string path = r.str("optimizer path");
    st.m[path] = r.f64_vec("optimizer m");
    st.v[path] = r.f64_vec("optimizer v");
  }
  return st;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append("TSRC");
  put_u32(&out, ckpt.version);
  put_u64(&out, 0);  // total byte length, patched below
  put_u64(&out, ckpt.config_digest);
  put_str(&out, ckpt.config_json);

  put_u32(&out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [p, t] : ckpt.params) {
    put_str(&out, p);
    put_u32(&out, static_cast<std::uint32_t>(t.shape().size()));
    for (const int d : t.shape()) put_u32(&out, static_cast<std::uint32_t>(d));
    put_f64_vec(&out, t.data());
  }

  put_u32(&out, static_cast<std::uint32_t>(ckpt.optimizers.size()));
  for (const auto& [group, st] : ckpt.optimizers) {
    put_str(&out, group);
    put_adam(&out, st);
  }

  put_u32(&out, static_cast<std::uint32_t>(ckpt.train_state.epoch));
  put_u32(&out, static_cast<std::uint32_t>(ckpt.train_state.history.size()));
  for (const auto& task_hist : ckpt.train_state.history) {
    put_u32(&out, static_cast<std::uint32_t>(task_hist.size()));
    for (const auto& m : task_hist) {
      put_f64(&out, m.train_loss);
      put_f64(&out, m.val_metric);
    }
  }

  // Patch the total length (including the trailing checksum), then seal.
  const std::uint64_t total = out.size() + 8;
  for (int i = 0; i < 8; ++i) out[8 + i] = static_cast<char>((total >> (8 * i)) & 0xff);
  put_u64(&out, bytes_checksum(out));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw io_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (bytes.size() < 28) throw checkpoint_truncated_error("checkpoint shorter than its header");
  if (std::memcmp(bytes.data(), "TSRC", 4) != 0) {
    throw io_error("bad checkpoint magic in " + path);
  }
  Reader head{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  head.pos = 4;
  const std::uint32_t version = head.u32("version");
  if (version != kCheckpointVersion) {
    throw checkpoint_version_error("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t total = head.u64("total length");
  if (bytes.size() < total) {
    throw checkpoint_truncated_error("checkpoint truncated: " + std::to_string(bytes.size()) +
                                     " of " + std::to_string(total) + " bytes");
  }
  // Verify the trailing checksum before trusting any record.
  const std::string body = bytes.substr(0, static_cast<std::size_t>(total) - 8);
  Reader tail{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  tail.pos = static_cast<std::size_t>(total) - 8;
  const std::uint64_t want = tail.u64("checksum");
  if (bytes_checksum(body) != want) {
    throw checkpoint_checksum_error("checkpoint checksum mismatch in " + path);
  }

  Reader r{reinterpret_cast<const unsigned char*>(body.data()), body.size()};
  r.pos = 16;
  Checkpoint ckpt;
  ckpt.version = version;
  ckpt.config_digest = r.u64("config digest");
  ckpt.config_json = r.str("config json");

  const std::uint32_t n_params = r.u32("parameter count");
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string p = r.str("parameter path");
    const std::uint32_t ndim = r.u32("parameter rank");
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.u32("dim")));
    std::vector<double> data = r.f64_vec("parameter data");
    ckpt.params.emplace_back(p, Tensor::from(shape, std::move(data), true));
  }

  const std::uint32_t n_opt = r.u32("optimizer count");
  for (std::uint32_t i = 0; i < n_opt; ++i) {
    const std::string group = r.str("optimizer group");
    ckpt.optimizers.emplace_back(group, read_adam(r));
  }

  ckpt.train_state.epoch = static_cast<int>(r.u32("epoch"));
  const std::uint32_t n_tasks = r.u32("history task count");
  ckpt.train_state.history.resize(n_tasks);
  for (std::uint32_t t = 0; t < n_tasks; ++t) {
    const std::uint32_t n_epochs = r.u32("history length");
    for (std::uint32_t e = 0; e < n_epochs; ++e) {
      EpochMetrics m;
      m.train_loss = r.f64("history loss");
      m.val_metric = r.f64("history metric");
      ckpt.train_state.history[t].push_back(m);
    }
  }
  return ckpt;
}

Checkpoint snapshot_system(const TwoStageSystem& system, const TrainResult& result,
                           std::uint64_t config_digest, const std::string& config_json) {
  Checkpoint ckpt;
  ckpt.config_digest = config_digest;
  ckpt.config_json = config_json;
  const ParamSet all = system.all_params();
  for (const auto& p : all.paths()) ckpt.params.emplace_back(p, all.at(p));
  for (std::size_t i = 0; i < system.specs.size(); ++i) {
    ckpt.optimizers.emplace_back("task:" + system.specs[i].name, result.task_optimizers[i]);
  }
  ckpt.optimizers.emplace_back("shared", result.shared_optimizer);
  ckpt.train_state = result.state;
  return ckpt;
}

void restore_system(const Checkpoint& ckpt, TwoStageSystem* system, TrainResult* result) {
  ParamSet all = system->all_params();
  if (ckpt.params.size() != all.size()) {
    throw io_error("checkpoint parameter count does not match the configured model");
  }
  for (const auto& [path, tensor] : ckpt.params) {
    Tensor& dst = all.at(path);
    if (dst.shape() != tensor.shape()) {
      throw io_error("checkpoint parameter " + path + " has shape " +
                     shape_str(tensor.shape()) + ", model expects " + shape_str(dst.shape()));
    }
    dst.data() = tensor.data();
  }
  result->task_optimizers.assign(system->specs.size(), AdamState{});
  bool has_shared = false;
  for (const auto& [group, st] : ckpt.optimizers) {
    if (group == "shared") {
      result->shared_optimizer = st;
      has_shared = true;
      continue;
    }
    bool found = false;
    for (std::size_t i = 0; i < system->specs.size(); ++i) {
      if (group == "task:" + system->specs[i].name) {
        result->task_optimizers[i] = st;
        found = true;
        break;
      }
    }
    if (!found) throw io_error("checkpoint optimizer group " + group + " has no matching task");
  }
  if (!has_shared) throw io_error("checkpoint is missing the shared optimizer group");
  result->state = ckpt.train_state;
}

}  // namespace tsr
