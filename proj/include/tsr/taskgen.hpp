#ifndef TSR_TASKGEN_HPP
#define TSR_TASKGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsr/scene.hpp"

namespace tsr {

enum class TaskFamily : std::uint32_t {
  grid_puzzle = 0,
  odd_one_out = 1,
  same_different = 2,
  concept_contrast = 3,
  ball_motion = 4,
};

const char* family_name(TaskFamily f);
TaskFamily family_from_name(const std::string& name);

struct Trajectory {
  int num_balls = 0;
  int frames = 0;
  std::vector<float> coords;  // frames x num_balls x 2, row-major, in [0,1]

  float x(int t, int b) const {
    return coords[(static_cast<std::size_t>(t) * num_balls + b) * 2];
  }
  float y(int t, int b) const {
    return coords[(static_cast<std::size_t>(t) * num_balls + b) * 2 + 1];
  }
};

// One conjunct of a concept-contrast predicate.
struct ConceptTerm {
  std::string kind;  // shape | size_ge | size_lt | gray_ge | gray_lt | count_ge | inside | left_half | top_half
  int shape = 0;     // for kind == shape
  double threshold = 0.0;
};

// Ground-truth description of the generating rule; consumed by
// verify_episode and the per-rule breakdown, never by training.
struct RuleMeta {
  std::string attribute;  // rule/attribute tag for breakdown reporting
  std::vector<SceneSpec> panel_specs;      // specs behind `inputs`
  std::vector<SceneSpec> candidate_specs;  // specs behind `candidates`
  SceneSpec expected_panel;                // grid: the attributes a correct answer must carry
  std::vector<ConceptTerm> concept_terms;  // concept-contrast predicate
  double restitution = 1.0;                // ball motion
  std::vector<double> do_offsets;          // ball motion, per ball dx,dy
};

// One generated task instance. Exactly one of {integer label (with optional
// candidate panels), trajectory target} is meaningful: classification
// episodes carry label >= 0 and no target frames; the ball task carries
// label == -1 and a target trajectory.
struct Episode {
  TaskFamily family = TaskFamily::same_different;
  std::uint64_t seed = 0;
  std::vector<RasterImage> inputs;
  std::vector<RasterImage> candidates;
  std::int64_t label = -1;
  Trajectory observed;         // ball: original rollout (states A..B)
  Trajectory intervened_init;  // ball: do-operator initial state C (1 frame)
  Trajectory target;           // ball: counterfactual rollout D; frame 0 == C
  RuleMeta meta;

  bool is_regression() const { return family == TaskFamily::ball_motion; }
  int panel_count() const {
    return static_cast<int>(inputs.size() + candidates.size());
  }
};

struct BallTaskConfig {
  int num_balls = 3;
  int frames = 8;
  double restitution = 1.0;  // 1 = elastic walls
};

Episode gen_grid_puzzle(std::uint64_t seed);
Episode gen_odd_one_out(std::uint64_t seed);
Episode gen_same_different(std::uint64_t seed);
Episode gen_concept_contrast(std::uint64_t seed);
Episode gen_ball_motion(std::uint64_t seed, const BallTaskConfig& cfg);
Episode gen_ball_motion(std::uint64_t seed, int num_balls, int frames);

Episode generate_episode(TaskFamily family, std::uint64_t seed,
                         const BallTaskConfig& ball_cfg = BallTaskConfig{});

// Re-evaluates the family's rule from rule_meta and confirms the label.
// Property-test oracle; returns false on any violation.
bool verify_episode(const Episode& e);

// Wall-bouncing point-mass simulator behind the ball task. Positions clamp
// to the unit box by mirror reflection; restitution scales the reflected
// velocity component.
class BallSim {
 public:
  BallSim(std::vector<double> positions, std::vector<double> velocities, double restitution);
  void step(double dt);
  const std::vector<double>& positions() const { return pos_; }
  const std::vector<double>& velocities() const { return vel_; }

 private:
  std::vector<double> pos_;   // ball-major x,y
  std::vector<double> vel_;
  double restitution_;
};

// Simulates `frames` states (including the initial one) at the generator's
// fixed timestep.
Trajectory simulate_balls(const std::vector<double>& positions,
                          const std::vector<double>& velocities, int frames,
                          double restitution);

// Counterfactual rollout with per-ball position offsets applied at t = 0.
// Throws generation_error if an offset pushes a ball outside the box.
Trajectory simulate_intervened(const std::vector<double>& positions,
                               const std::vector<double>& velocities,
                               const std::vector<double>& offsets, int frames,
                               double restitution);

// Episode seeds for a split: a contiguous integer interval, disjoint across
// splits by construction (train/val/test live 2^30 apart per family stream).
std::vector<std::uint64_t> split_seeds(std::uint64_t root, TaskFamily family,
                                       const std::string& split, int count);

double ball_sim_dt();

}  // namespace tsr

#endif
