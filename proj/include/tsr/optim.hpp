#ifndef TSR_OPTIM_HPP
#define TSR_OPTIM_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tsr/tensor.hpp"

namespace tsr {

// Named parameter collection. Paths are unique "module/layer/name" strings;
// iteration order is insertion order so optimizer sweeps are deterministic.
// Tensors share storage, so two ParamSets can alias the same underlying
// parameters (that is exactly what the shared sharing modes do).
class ParamSet {
 public:
  Tensor& add(const std::string& path, Tensor t);
  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  bool contains(const std::string& path) const;

  const std::vector<std::string>& paths() const { return order_; }
  std::size_t size() const { return order_.size(); }

  void freeze(const std::string& path);
  void freeze_prefix(const std::string& prefix);
  bool frozen(const std::string& path) const;
  const std::set<std::string>& frozen_paths() const { return frozen_; }
  void clear_frozen() { frozen_.clear(); }

  // Absorbs all entries of `other` (paths must not collide).
  void merge(const ParamSet& other);

  std::int64_t param_count() const;

  // FNV-1a over the raw f64 bytes of every parameter, in path order.
  // Used by the freeze audits.
  std::uint64_t checksum() const;

  void zero_grads();

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor> params_;
  std::set<std::string> frozen_;
};

struct FreezeSpec {
  std::vector<std::string> paths;  // exact paths or prefixes ending in '/'
};

// Marks the listed parameters frozen; subsequent adam_step calls leave them
// bitwise unchanged. Unknown paths raise config_error.
void set_freeze(ParamSet& params, const FreezeSpec& spec);

// Classic Adam with bias correction. Weight decay is coupled L2: it is added
// to the gradient before the moment updates.
struct AdamState {
  std::int64_t step = 0;
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

// One Adam update over every unfrozen parameter of `params`. Every unfrozen
// parameter must carry a populated gradient (optimizer_error names the first
// offender otherwise). All gradients in the set, frozen ones included, are
// cleared after the step.
void adam_step(ParamSet& params, AdamState& state);

namespace init {

// He-scaled normal fill: std = sqrt(2 / fan_in), seeded per parameter path
// so initialization does not depend on construction order.
void he_normal(Tensor& t, std::int64_t fan_in, std::uint64_t seed, const std::string& path);

}  // namespace init

}  // namespace tsr

#endif
