#include "tsr/encoder.hpp"

#include "tsr/errors.hpp"

namespace tsr {

namespace {

// Stride-2 downsampling happens at these blocks, alongside channel doubling.
bool is_stride_block(int block) { return block == 4 || block == 8; }

int block_out_channels(const EncoderConfig& cfg, int block) {
  if (block >= 8) return cfg.base_channels * 4;
  if (block >= 4) return cfg.base_channels * 2;
  return cfg.base_channels;
}

}  // namespace

int Encoder::channels_at(const EncoderConfig& cfg, int block) {
  return block_out_channels(cfg, block);
}

std::int64_t Encoder::param_count_for(const EncoderConfig& cfg) {
  std::int64_t n = 9LL * cfg.input_channels * cfg.base_channels + cfg.base_channels;  // stem
  for (int b = 1; b <= cfg.depth_blocks; ++b) {
    const std::int64_t ci = block_out_channels(cfg, b - 1);
    const std::int64_t co = block_out_channels(cfg, b);
    n += 9 * ci * co + co;  // conv1
    n += 9 * co * co + co;  // conv2
    if (ci != co || is_stride_block(b)) n += ci * co + co;  // skip
  }
  const std::int64_t proj_in = block_out_channels(cfg, cfg.depth_blocks);
  n += proj_in * cfg.feature_dim + cfg.feature_dim;
  return n;
}

EncoderConfig widen_encoder_to_budget(EncoderConfig cfg, std::int64_t target) {
  int best = cfg.base_channels;
  for (int c = 1; c <= 4096; ++c) {
    EncoderConfig probe = cfg;
    probe.base_channels = c;
    if (Encoder::param_count_for(probe) > target) break;
    best = c;
  }
  cfg.base_channels = best;
  const double got = static_cast<double>(Encoder::param_count_for(cfg));
  if (std::abs(got - static_cast<double>(target)) > 0.10 * static_cast<double>(target)) {
    throw config_error("cannot balance encoder parameters within 10% of target");
  }
  return cfg;
}

Encoder::Encoder(EncoderConfig cfg, std::string prefix, std::uint64_t seed)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  if (cfg_.depth_blocks < 0 || cfg_.depth_blocks > 12) {
    throw config_error("encoder depth_blocks must be in [0,12], got " +
                       std::to_string(cfg_.depth_blocks));
  }
  const auto add_conv = [&](const std::string& name, int co, int ci, int k) {
    Tensor w = Tensor::zeros({co, ci, k, k}, true);
    init::he_normal(w, static_cast<std::int64_t>(ci) * k * k, seed, prefix_ + "/" + name + "/w");
    params_.add(prefix_ + "/" + name + "/w", w);
    params_.add(prefix_ + "/" + name + "/b", Tensor::zeros({co}, true));
  };

  add_conv("stem", cfg_.base_channels, cfg_.input_channels, 3);
  for (int b = 1; b <= cfg_.depth_blocks; ++b) {
    const int ci = block_out_channels(cfg_, b - 1);
    const int co = block_out_channels(cfg_, b);
    const std::string base = "block" + std::to_string(b);
    add_conv(base + "/conv1", co, ci, 3);
    add_conv(base + "/conv2", co, co, 3);
    if (ci != co || is_stride_block(b)) add_conv(base + "/skip", co, ci, 1);
  }

  const int proj_in = block_out_channels(cfg_, cfg_.depth_blocks);
  Tensor pw = Tensor::zeros({proj_in, cfg_.feature_dim}, true);
  init::he_normal(pw, proj_in, seed, prefix_ + "/proj/w");
  params_.add(prefix_ + "/proj/w", pw);
  params_.add(prefix_ + "/proj/b", Tensor::zeros({1, cfg_.feature_dim}, true));
}

Tensor Encoder::run_blocks(Tape* tape, const Tensor& panel, int upto_block) const {
  Tensor h = ops::conv2d(tape, panel, params_.at(prefix_ + "/stem/w"), 1, 1);
  h = ops::add_channel_bias(tape, h, params_.at(prefix_ + "/stem/b"));
  h = ops::relu(tape, h);
  for (int b = 1; b <= upto_block; ++b) {
    const std::string base = prefix_ + "/block" + std::to_string(b);
    const int stride = is_stride_block(b) ? 2 : 1;
    const bool has_skip = params_.contains(base + "/skip/w");
    Tensor main = ops::conv2d(tape, h, params_.at(base + "/conv1/w"), stride, 1);
    main = ops::add_channel_bias(tape, main, params_.at(base + "/conv1/b"));
    main = ops::relu(tape, main);
    main = ops::conv2d(tape, main, params_.at(base + "/conv2/w"), 1, 1);
    main = ops::add_channel_bias(tape, main, params_.at(base + "/conv2/b"));
    Tensor skip = h;
    if (has_skip) {
      skip = ops::conv2d(tape, h, params_.at(base + "/skip/w"), stride, 0);
      skip = ops::add_channel_bias(tape, skip, params_.at(base + "/skip/b"));
    }
    h = ops::relu(tape, ops::add(tape, main, skip));
  }
  return h;
}

Tensor Encoder::forward(Tape* tape, const Tensor& panel) const {
  Tensor h = run_blocks(tape, panel, cfg_.depth_blocks);
  Tensor pooled = ops::channel_mean(tape, h);
  return project(tape, pooled);
}

Tensor Encoder::activation_at(const Tensor& panel, int upto_block) const {
  if (upto_block < 0 || upto_block > cfg_.depth_blocks) {
    throw config_error("activation_at: block " + std::to_string(upto_block) +
                       " exceeds depth " + std::to_string(cfg_.depth_blocks));
  }
  return run_blocks(nullptr, panel, upto_block);
}

Tensor Encoder::pooled_at(const Tensor& panel, int upto_block) const {
  return ops::channel_mean(nullptr, activation_at(panel, upto_block));
}

std::vector<Tensor> Encoder::pooled_at_blocks(const Tensor& panel,
                                              const std::vector<int>& blocks) const {
  std::vector<Tensor> out;
  out.reserve(blocks.size());
  std::size_t next = 0;
  Tensor h = run_blocks(nullptr, panel, 0);
  if (next < blocks.size() && blocks[next] == 0) {
    out.push_back(ops::channel_mean(nullptr, h));
    ++next;
  }
  for (int b = 1; b <= cfg_.depth_blocks && next < blocks.size(); ++b) {
    const std::string base = prefix_ + "/block" + std::to_string(b);
    const int stride = is_stride_block(b) ? 2 : 1;
    const bool has_skip = params_.contains(base + "/skip/w");
    Tensor main = ops::conv2d(nullptr, h, params_.at(base + "/conv1/w"), stride, 1);
    main = ops::add_channel_bias(nullptr, main, params_.at(base + "/conv1/b"));
    main = ops::relu(nullptr, main);
    main = ops::conv2d(nullptr, main, params_.at(base + "/conv2/w"), 1, 1);
    main = ops::add_channel_bias(nullptr, main, params_.at(base + "/conv2/b"));
    Tensor skip = h;
    if (has_skip) {
      skip = ops::conv2d(nullptr, h, params_.at(base + "/skip/w"), stride, 0);
      skip = ops::add_channel_bias(nullptr, skip, params_.at(base + "/skip/b"));
    }
    h = ops::relu(nullptr, ops::add(nullptr, main, skip));
    if (blocks[next] == b) {
      out.push_back(ops::channel_mean(nullptr, h));
      ++next;
    }
  }
  if (next != blocks.size()) {
    throw config_error("pooled_at_blocks: requested block beyond encoder depth");
  }
  return out;
}

Tensor Encoder::project(Tape* tape, const Tensor& pooled) const {
  Tensor z = ops::matmul(tape, pooled, params_.at(prefix_ + "/proj/w"));
  return ops::add(tape, z, params_.at(prefix_ + "/proj/b"));
}

std::unique_ptr<Encoder> truncate_encoder(const Encoder& full, int at_block, std::uint64_t seed,
                                          bool reuse_projection) {
  const EncoderConfig& fc = full.config();
  if (at_block < 0 || at_block > fc.depth_blocks) {
    throw config_error("truncate_encoder: at_block " + std::to_string(at_block) +
                       " exceeds encoder depth " + std::to_string(fc.depth_blocks));
  }
  if (reuse_projection && at_block != fc.depth_blocks) {
    throw config_error("truncate_encoder: the original projection only fits the full depth");
  }
  EncoderConfig cfg = fc;
  cfg.depth_blocks = at_block;
  auto trunc = std::make_unique<Encoder>(cfg, full.prefix(), seed);
  // Copy trained stem + prefix blocks over the fresh initialization.
  for (const auto& path : trunc->params().paths()) {
    const bool is_proj = path.find("/proj/") != std::string::npos;
    if (is_proj && !reuse_projection) continue;
    trunc->params().at(path).data() = full.params().at(path).data();
  }
  return trunc;
}

CoordEncoder::CoordEncoder(int input_dim, int feature_dim, std::string prefix, std::uint64_t seed)
    : input_dim_(input_dim), feature_dim_(feature_dim), prefix_(std::move(prefix)) {
  Tensor w1 = Tensor::zeros({input_dim, feature_dim}, true);
  init::he_normal(w1, input_dim, seed, prefix_ + "/fc1/w");
  params_.add(prefix_ + "/fc1/w", w1);
  params_.add(prefix_ + "/fc1/b", Tensor::zeros({1, feature_dim}, true));
  Tensor w2 = Tensor::zeros({feature_dim, feature_dim}, true);
  init::he_normal(w2, feature_dim, seed, prefix_ + "/fc2/w");
  params_.add(prefix_ + "/fc2/w", w2);
  params_.add(prefix_ + "/fc2/b", Tensor::zeros({1, feature_dim}, true));
}

Tensor CoordEncoder::forward(Tape* tape, const Tensor& flat) const {
  if (flat.ndim() != 2 || flat.dim(1) != input_dim_) {
    throw dimension_error("coord encoder expects [1," + std::to_string(input_dim_) + "], got " +
                          shape_str(flat.shape()));
  }
  Tensor h = ops::relu(
      tape, ops::add(tape, ops::matmul(tape, flat, params_.at(prefix_ + "/fc1/w")),
                     params_.at(prefix_ + "/fc1/b")));
  return ops::add(tape, ops::matmul(tape, h, params_.at(prefix_ + "/fc2/w")),
                  params_.at(prefix_ + "/fc2/b"));
}

Adapter::Adapter(int dim, std::string prefix, std::uint64_t seed)
    : dim_(dim), prefix_(std::move(prefix)) {
  Tensor w = Tensor::zeros({dim, dim}, true);
  init::he_normal(w, dim, seed, prefix_ + "/w");
  params_.add(prefix_ + "/w", w);
  params_.add(prefix_ + "/b", Tensor::zeros({1, dim}, true));
}

Tensor Adapter::forward(Tape* tape, const Tensor& rows) const {
  Tensor z = ops::matmul(tape, rows, params_.at(prefix_ + "/w"));
  z = ops::add_rowvec(tape, z, params_.at(prefix_ + "/b").reshaped({dim_}));
  return ops::relu(tape, z);
}

void Adapter::set_identity() {
  auto& w = params_.at(prefix_ + "/w").data();
  std::fill(w.begin(), w.end(), 0.0);
  for (int i = 0; i < dim_; ++i) w[static_cast<std::size_t>(i) * dim_ + i] = 1.0;
  auto& b = params_.at(prefix_ + "/b").data();
  std::fill(b.begin(), b.end(), 0.0);
}

}  // namespace tsr
