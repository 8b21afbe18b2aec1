#ifndef TSR_EXPERIMENTS_HPP
#define TSR_EXPERIMENTS_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tsr/trainer.hpp"

namespace tsr {

struct ExperimentTaskConfig {
  TaskSpec spec;
  int train_episodes = 1000;
  int val_episodes = 300;
};

// Declarative description of one experiment: tasks, sharing mode, schedules,
// seeds, and the protocol-specific knobs.
struct Manifest {
  std::vector<ExperimentTaskConfig> tasks;
  TrainOptions base;
  std::vector<std::uint64_t> seeds = {1};
  int threads = 1;

  // depth probe
  std::vector<int> probe_depths = {0, 2, 4, 6, 8, 10, 12};
  double rho = 0.02;
  int base_epochs = 5;
  int probe_epochs = 10;
  int probe_train_episodes = 800;
  int probe_val_episodes = 300;

  // approximation study
  std::vector<int> tracks = {1000, 3000};
  ExperimentTaskConfig target;
  int joint_epochs = 6;
  int finetune_epochs = 8;
  int finetune_train_episodes = 1200;
  double finetune_lr = 5e-5;
  double finetune_wd = 1e-7;

  // consistency
  int consistency_epochs = 8;
};

struct AblationRow {
  std::string mode;
  std::string task;
  std::uint64_t seed;
  double accuracy;
};

struct DepthProbeRow {
  std::string task;
  int depth;
  double accuracy;
  bool inflection;
};

struct DepthProbeResult {
  std::vector<DepthProbeRow> rows;
  std::map<std::string, int> inflection_depth;   // rho-rule depth per task
  std::map<std::string, int> argmax_depth;       // plain curve maximum per task
};

struct TransferRow {
  int subset_mask;  // bit i set = training task i participates
  int track;
  std::uint64_t seed;
  double metric;  // scaled keypoint error, lower is better
};

struct ConsistencyRow {
  std::string task;
  double acc_choose;
  double acc_verify;
  double f1;
};

struct BreakdownRow {
  std::string task;
  std::string attribute;
  double accuracy;
  int episodes;
};

// Four sharing modes x tasks x seeds, identical data and schedules per seed.
std::vector<AblationRow> run_sharing_ablation(const Manifest& m);

// Trains per-task full-depth encoders, probes frozen truncations at the
// manifest depths through a fresh shared reasoner, detects inflections.
DepthProbeResult run_depth_probe(const Manifest& m);

// Smallest probed depth whose accuracy is within rho of the curve maximum.
int detect_inflection(const std::vector<std::pair<int, double>>& curve, double rho,
                      int* argmax_depth = nullptr);

// 15 task subsets x sample tracks x seeds: joint shared-reasoner training,
// freeze, adapter fine-tune on the held-out ball variant, scaled keypoint
// metric.
std::vector<TransferRow> run_approximation_study(const Manifest& m);

// One-for-all training over the choice tasks, then answer-selection vs
// option-verification agreement per task.
std::vector<ConsistencyRow> run_consistency(const Manifest& m,
                                            std::vector<BreakdownRow>* breakdown = nullptr);

// 200 x mean squared keypoint error between two equal-shape trajectories.
double keypoint_mse_scaled(const Trajectory& pred, const Trajectory& target);

// Accuracy partitioned by the episodes' generating attribute.
std::vector<BreakdownRow> per_rule_breakdown(const TwoStageSystem& system, std::size_t task,
                                             const std::vector<Episode>& episodes);

// Consistency readouts for one trained classification task.
struct ConsistencyCounts {
  std::int64_t episodes = 0;
  std::int64_t choose_correct = 0;
  std::int64_t verify_correct_pairs = 0;
  std::int64_t total_pairs = 0;
  std::int64_t selected_accepted = 0;  // verify accepts the chosen candidate
};
ConsistencyRow consistency_from_counts(const std::string& task, const ConsistencyCounts& c);

// Fixed-size pool running independent deterministic jobs; results ordered by
// index, exceptions rethrown.
void run_jobs(int threads, std::vector<std::function<void()>> jobs);

}  // namespace tsr

#endif
