#ifndef TSR_TRAINER_HPP
#define TSR_TRAINER_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsr/taskmodel.hpp"

namespace tsr {

// The four encoder/reasoner sharing configurations. Shared variants are
// widened so total parameters balance the separated sum (within 10%) unless
// balancing is turned off.
enum class SharingMode { both_separated, both_shared, shared_encoder_only, shared_reasoner_only };

const char* sharing_mode_name(SharingMode m);
SharingMode sharing_mode_from_name(const std::string& name);

struct ScheduleEntry {
  int batch_size = 16;
  double lr = 3e-4;
  double weight_decay = 1e-7;
  int entry_epoch = 0;  // the task contributes nothing before this epoch
};

struct TaskSpec {
  std::string name;  // unique label; parameter prefix and data stream tag
  TaskFamily family = TaskFamily::same_different;
  BallTaskConfig ball;
  ScheduleEntry schedule;
};

struct TaskData {
  std::vector<Episode> train;
  std::vector<Episode> val;
};

struct TrainOptions {
  SharingMode mode = SharingMode::both_separated;
  int epochs = 10;
  std::uint64_t seed = 1;
  EncoderConfig encoder;
  ReasonerConfig reasoner;
  double lr_shared = 5e-5;
  double wd_shared = 1e-7;
  bool balance_shared_params = true;
  // Stop once every classification task's validation accuracy reaches this.
  std::optional<double> stop_at_accuracy;
};

struct EpochMetrics {
  double train_loss = 0.0;
  double val_metric = 0.0;  // accuracy [0,100] or scaled keypoint error
};

struct TrainState {
  int epoch = 0;  // completed epochs
  std::vector<std::vector<EpochMetrics>> history;  // [task][epoch]
};

// A wired two-stage system: per-task models around per-task or shared
// modules, plus the optimizer grouping the sharing mode implies.
struct TwoStageSystem {
  SharingMode mode = SharingMode::both_separated;
  std::vector<TaskSpec> specs;
  std::vector<std::shared_ptr<TaskModel>> models;
  std::vector<std::shared_ptr<Reasoner>> reasoners;  // per task; alias one object when shared
  std::shared_ptr<Adapter> adapter;                  // optional, trains with the task groups

  std::vector<ParamSet> task_groups;  // task-specific parameters, per task
  ParamSet shared_group;              // parameters owned by shared modules

  Reasoner& reasoner_for(std::size_t task) { return *reasoners[task]; }
  const Reasoner& reasoner_for(std::size_t task) const { return *reasoners[task]; }

  // Asserts the parameter-storage topology matches the sharing mode.
  void audit_sharing() const;

  // Every parameter of the system under its unique path.
  ParamSet all_params() const;
};

TwoStageSystem build_system(const std::vector<TaskSpec>& specs, const TrainOptions& opt);

struct TrainResult {
  TrainState state;
  std::vector<AdamState> task_optimizers;
  AdamState shared_optimizer;
};

// Round-robin multi-task training at minibatch granularity. Each task's loss
// steps its own optimizer (task lr/wd) and the shared-module optimizer
// (shared lr/wd). Tasks before their entry epoch are skipped entirely.
// Aborts with numeric_error naming task and step on a non-finite loss.
TrainResult train_multitask(TwoStageSystem& system, const std::vector<TaskData>& data,
                            const TrainOptions& opt, TrainState* resume_state = nullptr,
                            std::vector<AdamState>* resume_task_opt = nullptr,
                            AdamState* resume_shared_opt = nullptr);

// Single-task specialization.
TrainResult train_single(TwoStageSystem& system, const TaskData& data, const TrainOptions& opt);

// Exactly n_per_task training episodes per task, drawn from disjoint seed
// ranges (one stream per task name).
std::vector<TaskData> balance_samples(const std::vector<TaskSpec>& specs, int n_per_task,
                                      int n_val, std::uint64_t root_seed);

// Episode streams for one task; train/val/test are disjoint intervals.
TaskData make_task_data(const TaskSpec& spec, int n_train, int n_val, std::uint64_t root_seed);

double evaluate_task(const TwoStageSystem& system, std::size_t task,
                     const std::vector<Episode>& episodes);

// Inserts the adapter between encoder outputs and the reasoner and makes it
// trainable alongside each task group. Every reasoner in the system must be
// marked frozen first (contract_error otherwise); with an
// identity-initialized adapter the composed outputs equal the frozen
// reasoner's.
void attach_adapter(TwoStageSystem& system, std::shared_ptr<Adapter> adapter);

}  // namespace tsr

#endif
