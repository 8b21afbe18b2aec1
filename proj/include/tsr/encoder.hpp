#ifndef TSR_ENCODER_HPP
#define TSR_ENCODER_HPP

#include <cstdint>
#include <memory>
#include <string>

#include "tsr/optim.hpp"
#include "tsr/ops.hpp"

namespace tsr {

// Truncatable residual encoder for 64x64 grayscale panels.
//   stem: 3x3 conv stride 1 + relu, 1 -> base channels
//   blocks 1..12: residual units (two 3x3 convs + skip), channels doubling
//   every 4 blocks from the base (16 -> 32 at block 4, 32 -> 64 at block 8),
//   spatial stride 2 at blocks 4 and 8
//   projection: global mean pool + linear to the 512-wide symbol interface
struct EncoderConfig {
  int depth_blocks = 0;  // 0 = stem + projection only
  int base_channels = 16;
  int input_channels = 1;
  int feature_dim = 512;
};

class Encoder {
 public:
  Encoder(EncoderConfig cfg, std::string prefix, std::uint64_t seed);

  // One panel [1,h,w] to one symbol row [1,feature_dim].
  Tensor forward(Tape* tape, const Tensor& panel) const;

  // Pre-projection activation after `upto_block` blocks (0 = stem output).
  // Tape-free; used by the truncation-prefix oracle and feature caching.
  Tensor activation_at(const Tensor& panel, int upto_block) const;

  // Global mean pool of activation_at: a [1, channels_at(upto_block)] row.
  Tensor pooled_at(const Tensor& panel, int upto_block) const;

  // Pooled activations at several cut points captured in a single pass;
  // `blocks` must be sorted ascending.
  std::vector<Tensor> pooled_at_blocks(const Tensor& panel, const std::vector<int>& blocks) const;

  // Applies only the projection (pool assumed done) to a pooled row.
  Tensor project(Tape* tape, const Tensor& pooled) const;

  const EncoderConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  std::int64_t param_count() const { return params_.param_count(); }

  // Channel width entering the projection when cut after `block`.
  static int channels_at(const EncoderConfig& cfg, int block);

  // Parameter count the config would instantiate; closed form.
  static std::int64_t param_count_for(const EncoderConfig& cfg);

 private:
  Tensor run_blocks(Tape* tape, const Tensor& panel, int upto_block) const;

  EncoderConfig cfg_;
  std::string prefix_;
  ParamSet params_;
};

// Probe-style truncation: copies the stem and the first `at_block` trained
// blocks, attaches a freshly initialized projection (or copies the original
// projection when `reuse_projection`, valid only at full depth).
std::unique_ptr<Encoder> truncate_encoder(const Encoder& full, int at_block, std::uint64_t seed,
                                          bool reuse_projection = false);

// Widest base channel count whose parameter count stays at or below
// `target`; config_error when nothing lands within 10%. Balances a shared
// encoder against the sum of separated ones.
EncoderConfig widen_encoder_to_budget(EncoderConfig cfg, std::int64_t target);

// Two-layer MLP over flattened trajectory coordinates; emits one symbol row.
class CoordEncoder {
 public:
  CoordEncoder(int input_dim, int feature_dim, std::string prefix, std::uint64_t seed);
  Tensor forward(Tape* tape, const Tensor& flat) const;  // [1,input_dim] -> [1,feature_dim]
  int input_dim() const { return input_dim_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  int input_dim_;
  int feature_dim_;
  std::string prefix_;
  ParamSet params_;
};

// The transfer adapter: one 512->512 linear + relu in front of a frozen
// reasoner.
class Adapter {
 public:
  Adapter(int dim, std::string prefix, std::uint64_t seed);
  Tensor forward(Tape* tape, const Tensor& rows) const;  // [p,d] -> [p,d]
  void set_identity();
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  int dim_;
  std::string prefix_;
  ParamSet params_;
};

}  // namespace tsr

#endif
