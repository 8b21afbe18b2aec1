#ifndef TSR_REASONER_HPP
#define TSR_REASONER_HPP

#include <cstdint>
#include <string>

#include "tsr/optim.hpp"
#include "tsr/ops.hpp"

namespace tsr {

enum class ReasonerArch { mlp, cnn1d, attention, graph };

const char* reasoner_arch_name(ReasonerArch a);
ReasonerArch reasoner_arch_from_name(const std::string& name);

struct ReasonerConfig {
  ReasonerArch arch = ReasonerArch::mlp;
  int hidden_dim = 512;
  int layers = 3;
  int feature_dim = 512;
  std::int64_t param_budget = 100000000;
};

// Parameter count the config would instantiate; closed form, no allocation.
std::int64_t reasoner_param_count(const ReasonerConfig& cfg);

// Largest hidden_dim whose parameter count stays at or below `target`, used
// to balance shared modes against the sum of separated reasoners. Returns
// the adjusted config; config_error if no width lands within 10%.
ReasonerConfig widen_reasoner_to_budget(ReasonerConfig cfg, std::int64_t target);

// The shared second stage. All four architectures map a [panels, feature]
// symbol matrix to one [1, feature] reasoning-result row, so they are
// drop-in replacements for one another:
//   mlp:       mean-pool over panels, then an MLP
//   cnn1d:     1-d convs over the panel sequence, pooled
//   attention: self-attention over panel tokens with residuals, mean-pooled
//   graph:     message passing on the complete panel graph, mean-pooled
class Reasoner {
 public:
  Reasoner(ReasonerConfig cfg, std::string prefix, std::uint64_t seed);

  Tensor forward(Tape* tape, const Tensor& panel_features) const;  // [p,d] -> [1,d]

  const ReasonerConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  std::int64_t param_count() const { return params_.param_count(); }

  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen) { frozen_ = frozen; }

 private:
  Tensor forward_mlp(Tape* tape, const Tensor& x) const;
  Tensor forward_cnn1d(Tape* tape, const Tensor& x) const;
  Tensor forward_attention(Tape* tape, const Tensor& x) const;
  Tensor forward_graph(Tape* tape, const Tensor& x) const;

  ReasonerConfig cfg_;
  std::string prefix_;
  ParamSet params_;
  bool frozen_ = false;
};

}  // namespace tsr

#endif
