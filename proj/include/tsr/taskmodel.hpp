#ifndef TSR_TASKMODEL_HPP
#define TSR_TASKMODEL_HPP

#include <memory>
#include <string>
#include <vector>

#include "tsr/encoder.hpp"
#include "tsr/heads.hpp"
#include "tsr/reasoner.hpp"
#include "tsr/taskgen.hpp"

namespace tsr {

struct TaskModelConfig {
  TaskFamily family = TaskFamily::same_different;
  EncoderConfig encoder;
  BallTaskConfig ball;  // fixes the coordinate encoder and head dimensions
  int feature_dim = 512;
};

HeadKind head_kind_for(TaskFamily family);

// One task's symbolization + readout around a (possibly shared) reasoner.
// Image families run every panel through the residual encoder; the ball
// family flattens the observed rollout and the intervened start through the
// coordinate encoder. The reasoner is passed per call so sharing modes are a
// matter of which Reasoner instance the trainer hands in.
class TaskModel {
 public:
  TaskModel(TaskModelConfig cfg, std::string prefix, std::uint64_t seed,
            std::shared_ptr<Encoder> encoder_override = nullptr);

  // Symbol matrix [panels, feature_dim]; inputs first, then candidates.
  // Panels are encoded independently.
  Tensor panel_features(Tape* tape, const Episode& e) const;

  // Candidate logits [1,K] (choose_k) or a single logit [1,1] (binary).
  Tensor episode_logits(Tape* tape, const Reasoner& reasoner, const Episode& e,
                        const Adapter* adapter = nullptr) const;

  // Flattened trajectory prediction [1, frames*balls*2] for the ball family.
  Tensor episode_prediction(Tape* tape, const Reasoner& reasoner, const Episode& e,
                            const Adapter* adapter = nullptr) const;

  // Mean loss over a minibatch (cross-entropy, binary cross-entropy, or MSE
  // according to the family's label form).
  Tensor batch_loss(Tape* tape, const Reasoner& reasoner,
                    const std::vector<const Episode*>& batch,
                    const Adapter* adapter = nullptr) const;

  // Classification: accuracy in [0,100]. Ball: 200 x mean squared keypoint
  // error (lower is better). Side-effect free.
  double evaluate(const Reasoner& reasoner, const std::vector<Episode>& episodes,
                  const Adapter* adapter = nullptr) const;

  Tensor flat_regression_target(const Episode& e) const;

  const TaskModelConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }
  std::shared_ptr<Encoder> encoder() { return encoder_; }
  std::shared_ptr<const Encoder> encoder() const { return encoder_; }
  void set_encoder(std::shared_ptr<Encoder> enc) { encoder_ = std::move(enc); }
  std::shared_ptr<CoordEncoder> coord_encoder() { return coord_encoder_; }
  std::shared_ptr<Head> head() { return head_; }
  std::shared_ptr<const Head> head() const { return head_; }

  // Task-specific trainable parameters (encoder/coord encoder + head).
  ParamSet own_params() const;

 private:
  TaskModelConfig cfg_;
  std::string prefix_;
  std::shared_ptr<Encoder> encoder_;
  std::shared_ptr<CoordEncoder> coord_encoder_;
  std::shared_ptr<Head> head_;
};

Tensor image_to_tensor(const RasterImage& img);

}  // namespace tsr

#endif
