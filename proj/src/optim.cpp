#include "tsr/optim.hpp"

#include <cmath>
#include <cstring>

#include "tsr/rng.hpp"

namespace tsr {

Tensor& ParamSet::add(const std::string& path, Tensor t) {
  if (params_.count(path)) throw config_error("duplicate parameter path: " + path);
  order_.push_back(path);
  return params_.emplace(path, std::move(t)).first->second;
}

Tensor& ParamSet::at(const std::string& path) {
  const auto it = params_.find(path);
  if (it == params_.end()) throw config_error("unknown parameter path: " + path);
  return it->second;
}

const Tensor& ParamSet::at(const std::string& path) const {
  const auto it = params_.find(path);
  if (it == params_.end()) throw config_error("unknown parameter path: " + path);
  return it->second;
}

bool ParamSet::contains(const std::string& path) const { return params_.count(path) > 0; }

void ParamSet::freeze(const std::string& path) {
  if (!params_.count(path)) throw config_error("freeze: unknown parameter path: " + path);
  frozen_.insert(path);
}

void ParamSet::freeze_prefix(const std::string& prefix) {
  bool any = false;
  for (const auto& p : order_) {
    if (p.rfind(prefix, 0) == 0) {
      frozen_.insert(p);
      any = true;
    }
  }
  if (!any) throw config_error("freeze: no parameter matches prefix: " + prefix);
}

bool ParamSet::frozen(const std::string& path) const { return frozen_.count(path) > 0; }

void ParamSet::merge(const ParamSet& other) {
  for (const auto& p : other.order_) {
    add(p, other.params_.at(p));
    if (other.frozen(p)) frozen_.insert(p);
  }
}

std::int64_t ParamSet::param_count() const {
  std::int64_t n = 0;
  for (const auto& p : order_) n += params_.at(p).numel();
  return n;
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : order_) {
    const auto& data = params_.at(p).data();
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
    const std::size_t len = data.size() * sizeof(double);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void ParamSet::zero_grads() {
  for (const auto& p : order_) params_.at(p).zero_grad();
}

void set_freeze(ParamSet& params, const FreezeSpec& spec) {
  for (const auto& p : spec.paths) {
    if (!p.empty() && p.back() == '/') {
      params.freeze_prefix(p);
    } else {
      params.freeze(p);
    }
  }
}

void adam_step(ParamSet& params, AdamState& state) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& path : params.paths()) {
    Tensor& t = params.at(path);
    if (params.frozen(path)) continue;
    GradSlot* slot = t.grad_slot();
    if (!slot || !slot->live) {
      throw optimizer_error("adam_step: missing gradient for parameter " + path);
    }
    auto& m = state.m[path];
    auto& v = state.v[path];
    const std::size_t n = t.data().size();
    if (m.size() != n) m.assign(n, 0.0);
    if (v.size() != n) v.assign(n, 0.0);
    double* theta = t.data().data();
    const double* g = slot->sum.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i] + state.weight_decay * theta[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
  params.zero_grads();
}

namespace init {

void he_normal(Tensor& t, std::int64_t fan_in, std::uint64_t seed, const std::string& path) {
  Rng rng(seed_split(seed, path));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
}

}  // namespace init

}  // namespace tsr
