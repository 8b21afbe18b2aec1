#ifndef TSR_HEADS_HPP
#define TSR_HEADS_HPP

#include <cstdint>
#include <string>

#include "tsr/optim.hpp"
#include "tsr/ops.hpp"

namespace tsr {

enum class HeadKind { choose_k, binary, regress_trajectory };

struct HeadConfig {
  HeadKind kind = HeadKind::choose_k;
  int feature_dim = 512;
  int out_dim = 0;  // regress_trajectory: frames * num_balls * 2
};

// Task-specific readouts over the reasoning result c.
//   choose_k: dot-product scoring of each candidate's features against a
//             learned transform of c -> K logits
//   binary:   bilinear score of c against the final panel (the query) plus a
//             linear term -> 1 logit, sigmoid-decodable
//   regress:  linear map of c to the flattened trajectory
class Head {
 public:
  Head(HeadConfig cfg, std::string prefix, std::uint64_t seed);

  Tensor score_candidates(Tape* tape, const Tensor& c, const Tensor& candidate_features) const;
  Tensor binary_logit(Tape* tape, const Tensor& c, const Tensor& query_feature) const;
  Tensor regress(Tape* tape, const Tensor& c) const;

  // The learned transform of c that candidate features are scored against.
  Tensor query_vector(Tape* tape, const Tensor& c) const;

  const HeadConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  HeadConfig cfg_;
  std::string prefix_;
  ParamSet params_;
};

}  // namespace tsr

#endif
