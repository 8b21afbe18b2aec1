#include "tsr/taskmodel.hpp"

#include <cmath>

#include "tsr/errors.hpp"

namespace tsr {

HeadKind head_kind_for(TaskFamily family) {
  switch (family) {
    case TaskFamily::grid_puzzle:
    case TaskFamily::odd_one_out: return HeadKind::choose_k;
    case TaskFamily::same_different:
    case TaskFamily::concept_contrast: return HeadKind::binary;
    case TaskFamily::ball_motion: return HeadKind::regress_trajectory;
  }
  throw config_error("head_kind_for: unknown family");
}

Tensor image_to_tensor(const RasterImage& img) {
  Tensor t = Tensor::zeros({1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    t.data()[i] = static_cast<double>(img.pixels[i]);
  }
  return t;
}

TaskModel::TaskModel(TaskModelConfig cfg, std::string prefix, std::uint64_t seed,
                     std::shared_ptr<Encoder> encoder_override)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  if (cfg_.family == TaskFamily::ball_motion) {
    const int in_dim = cfg_.ball.frames * cfg_.ball.num_balls * 2 + cfg_.ball.num_balls * 2;
    coord_encoder_ = std::make_shared<CoordEncoder>(in_dim, cfg_.feature_dim,
                                                    prefix_ + "/coord_encoder", seed);
  } else if (encoder_override) {
    encoder_ = std::move(encoder_override);
  } else {
    EncoderConfig ec = cfg_.encoder;
    ec.feature_dim = cfg_.feature_dim;
    encoder_ = std::make_shared<Encoder>(ec, prefix_ + "/encoder", seed);
  }
  HeadConfig hc;
  hc.kind = head_kind_for(cfg_.family);
  hc.feature_dim = cfg_.feature_dim;
  if (hc.kind == HeadKind::regress_trajectory) {
    hc.out_dim = cfg_.ball.frames * cfg_.ball.num_balls * 2;
  }
  head_ = std::make_shared<Head>(hc, prefix_ + "/head", seed);
}

Tensor TaskModel::panel_features(Tape* tape, const Episode& e) const {
  if (cfg_.family == TaskFamily::ball_motion) {
    const int in_dim = coord_encoder_->input_dim();
    Tensor flat = Tensor::zeros({1, in_dim});
    std::size_t k = 0;
    for (const float v : e.observed.coords) flat.data()[k++] = static_cast<double>(v);
    for (const float v : e.intervened_init.coords) flat.data()[k++] = static_cast<double>(v);
    if (k != static_cast<std::size_t>(in_dim)) {
      throw dimension_error("ball episode does not match the coordinate encoder input size");
    }
    return coord_encoder_->forward(tape, flat);
  }

  std::vector<Tensor> rows;
  rows.reserve(e.inputs.size() + e.candidates.size());
  for (const auto& img : e.inputs) {
    if (img.width != 64 || img.height != 64) {
      throw dimension_error("encoder expects 64x64 panels, got " + std::to_string(img.width) +
                            "x" + std::to_string(img.height));
    }
    rows.push_back(encoder_->forward(tape, image_to_tensor(img)));
  }
  for (const auto& img : e.candidates) {
    if (img.width != 64 || img.height != 64) {
      throw dimension_error("encoder expects 64x64 panels, got " + std::to_string(img.width) +
                            "x" + std::to_string(img.height));
    }
    rows.push_back(encoder_->forward(tape, image_to_tensor(img)));
  }
  if (rows.empty()) throw data_error("episode has no panels");
  return ops::stack_rows(tape, rows);
}

Tensor TaskModel::episode_logits(Tape* tape, const Reasoner& reasoner, const Episode& e,
                                 const Adapter* adapter) const {
  Tensor feats = panel_features(tape, e);
  const HeadKind kind = head_->config().kind;
  if (kind == HeadKind::choose_k) {
    const int n_inputs = static_cast<int>(e.inputs.size());
    const int n_cand = static_cast<int>(e.candidates.size());
    if (n_cand == 0) throw data_error("choose_k episode without candidates");
    // The reasoner summarizes the context panels; when the episode has no
    // separate context (odd-one-out) the candidates are the context.
    Tensor reasoner_rows = feats;
    if (n_inputs > 0) {
      std::vector<Tensor> ctx;
      ctx.reserve(static_cast<std::size_t>(n_inputs));
      for (int i = 0; i < n_inputs; ++i) ctx.push_back(ops::slice_row(tape, feats, i));
      reasoner_rows = ops::stack_rows(tape, ctx);
    }
    Tensor reasoner_in = adapter ? adapter->forward(tape, reasoner_rows) : reasoner_rows;
    Tensor c = reasoner.forward(tape, reasoner_in);
    std::vector<Tensor> cand_rows;
    cand_rows.reserve(static_cast<std::size_t>(n_cand));
    for (int i = 0; i < n_cand; ++i) {
      cand_rows.push_back(ops::slice_row(tape, feats, n_inputs + i));
    }
    Tensor cand = ops::stack_rows(tape, cand_rows);
    return head_->score_candidates(tape, c, cand);
  }
  if (kind == HeadKind::binary) {
    Tensor reasoner_in = adapter ? adapter->forward(tape, feats) : feats;
    Tensor c = reasoner.forward(tape, reasoner_in);
    Tensor query = ops::slice_row(tape, feats, feats.dim(0) - 1);
    return head_->binary_logit(tape, c, query);
  }
  throw config_error("episode_logits called on a regression task");
}

Tensor TaskModel::episode_prediction(Tape* tape, const Reasoner& reasoner, const Episode& e,
                                     const Adapter* adapter) const {
  if (head_->config().kind != HeadKind::regress_trajectory) {
    throw config_error("episode_prediction requires a regression head");
  }
  Tensor feats = panel_features(tape, e);
  Tensor reasoner_in = adapter ? adapter->forward(tape, feats) : feats;
  Tensor c = reasoner.forward(tape, reasoner_in);
  return head_->regress(tape, c);
}

Tensor TaskModel::flat_regression_target(const Episode& e) const {
  const int out_dim = head_->config().out_dim;
  Tensor t = Tensor::zeros({1, out_dim});
  if (static_cast<int>(e.target.coords.size()) != out_dim) {
    throw dimension_error("episode target size does not match the regression head");
  }
  for (std::size_t i = 0; i < e.target.coords.size(); ++i) {
    t.data()[i] = static_cast<double>(e.target.coords[i]);
  }
  return t;
}

Tensor TaskModel::batch_loss(Tape* tape, const Reasoner& reasoner,
                             const std::vector<const Episode*>& batch,
                             const Adapter* adapter) const {
  if (batch.empty()) throw data_error("empty minibatch");
  const HeadKind kind = head_->config().kind;
  if (kind == HeadKind::choose_k) {
    std::vector<Tensor> rows;
    std::vector<std::int64_t> labels;
    for (const Episode* e : batch) {
      rows.push_back(episode_logits(tape, reasoner, *e, adapter));
      labels.push_back(e->label);
    }
    return ops::softmax_cross_entropy(tape, ops::stack_rows(tape, rows), labels);
  }
  if (kind == HeadKind::binary) {
    std::vector<Tensor> rows;
    std::vector<double> targets;
    for (const Episode* e : batch) {
      rows.push_back(episode_logits(tape, reasoner, *e, adapter));
      targets.push_back(e->label == 1 ? 1.0 : 0.0);
    }
    return ops::bce_with_logits(tape, ops::stack_rows(tape, rows), targets);
  }
  std::vector<Tensor> preds, targets;
  for (const Episode* e : batch) {
    preds.push_back(episode_prediction(tape, reasoner, *e, adapter));
    targets.push_back(flat_regression_target(*e));
  }
  return ops::mse_loss(tape, ops::stack_rows(tape, preds), ops::stack_rows(tape, targets));
}

double TaskModel::evaluate(const Reasoner& reasoner, const std::vector<Episode>& episodes,
                           const Adapter* adapter) const {
  if (episodes.empty()) throw data_error("evaluate: empty split");
  const HeadKind kind = head_->config().kind;
  if (kind == HeadKind::regress_trajectory) {
    double sse = 0.0;
    std::int64_t n = 0;
    for (const auto& e : episodes) {
      Tensor pred = episode_prediction(nullptr, reasoner, e, adapter);
      for (std::int64_t i = 0; i < pred.numel(); ++i) {
        const double d = pred.data()[static_cast<std::size_t>(i)] -
                         static_cast<double>(e.target.coords[static_cast<std::size_t>(i)]);
        sse += d * d;
        ++n;
      }
    }
    return 200.0 * sse / static_cast<double>(n);
  }
  std::int64_t correct = 0;
  for (const auto& e : episodes) {
    Tensor logits = episode_logits(nullptr, reasoner, e, adapter);
    if (kind == HeadKind::choose_k) {
      int best = 0;
      for (int j = 1; j < logits.dim(1); ++j) {
        if (logits.data()[static_cast<std::size_t>(j)] >
            logits.data()[static_cast<std::size_t>(best)]) {
          best = j;
        }
      }
      correct += best == e.label ? 1 : 0;
    } else {
      const bool positive = logits.data()[0] > 0.0;
      correct += positive == (e.label == 1) ? 1 : 0;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(episodes.size());
}

ParamSet TaskModel::own_params() const {
  ParamSet p;
  if (encoder_) p.merge(encoder_->params());
  if (coord_encoder_) p.merge(coord_encoder_->params());
  p.merge(head_->params());
  return p;
}

}  // namespace tsr
