#include "tsr/heads.hpp"

#include "tsr/errors.hpp"

namespace tsr {

Head::Head(HeadConfig cfg, std::string prefix, std::uint64_t seed)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  (void)seed;
  // Heads start at zero so an untrained model scores every option equally:
  // uniform logits put choose_k exactly at chance and the binary readout at
  // the base rate. The interaction is a learned per-dimension gate rather
  // than a full bilinear map; a dense 512x512 form adds five hundred times
  // the parameters and its optimizer noise swamps the score signal at this
  // scale.
  const int d = cfg_.feature_dim;
  switch (cfg_.kind) {
    case HeadKind::choose_k: {
      params_.add(prefix_ + "/gate", Tensor::zeros({1, d}, true));
      params_.add(prefix_ + "/b", Tensor::zeros({1, d}, true));
      break;
    }
    case HeadKind::binary: {
      params_.add(prefix_ + "/gate", Tensor::zeros({1, d}, true));
      params_.add(prefix_ + "/b", Tensor::zeros({1, d}, true));
      params_.add(prefix_ + "/v", Tensor::zeros({d, 1}, true));
      params_.add(prefix_ + "/b0", Tensor::zeros({1, 1}, true));
      break;
    }
    case HeadKind::regress_trajectory: {
      if (cfg_.out_dim <= 0) throw config_error("regress head needs a positive out_dim");
      params_.add(prefix_ + "/w", Tensor::zeros({d, cfg_.out_dim}, true));
      params_.add(prefix_ + "/b", Tensor::zeros({1, cfg_.out_dim}, true));
      break;
    }
  }
}

Tensor Head::query_vector(Tape* tape, const Tensor& c) const {
  // q = c * gate + b, elementwise over the feature dimension.
  Tensor q = ops::mul(tape, c, params_.at(prefix_ + "/gate"));
  return ops::add(tape, q, params_.at(prefix_ + "/b"));
}

Tensor Head::score_candidates(Tape* tape, const Tensor& c,
                              const Tensor& candidate_features) const {
  if (cfg_.kind != HeadKind::choose_k) {
    throw config_error("score_candidates on a non choose_k head");
  }
  return ops::matmul_nt(tape, query_vector(tape, c), candidate_features);  // [1, K]
}

Tensor Head::binary_logit(Tape* tape, const Tensor& c, const Tensor& query_feature) const {
  if (cfg_.kind != HeadKind::binary) throw config_error("binary_logit on a non binary head");
  Tensor bilinear = ops::matmul_nt(tape, query_vector(tape, c), query_feature);  // [1,1]
  Tensor linear = ops::matmul(tape, c, params_.at(prefix_ + "/v"));              // [1,1]
  return ops::add(tape, ops::add(tape, bilinear, linear), params_.at(prefix_ + "/b0"));
}

Tensor Head::regress(Tape* tape, const Tensor& c) const {
  if (cfg_.kind != HeadKind::regress_trajectory) {
    throw config_error("regress on a non regress_trajectory head");
  }
  return ops::add(tape, ops::matmul(tape, c, params_.at(prefix_ + "/w")),
                  params_.at(prefix_ + "/b"));
}

}  // namespace tsr
