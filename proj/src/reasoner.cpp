#include "tsr/reasoner.hpp"

#include <cmath>

#include "tsr/errors.hpp"

namespace tsr {

const char* reasoner_arch_name(ReasonerArch a) {
  switch (a) {
    case ReasonerArch::mlp: return "mlp";
    case ReasonerArch::cnn1d: return "cnn1d";
    case ReasonerArch::attention: return "attention";
    case ReasonerArch::graph: return "graph";
  }
  return "unknown";
}

ReasonerArch reasoner_arch_from_name(const std::string& name) {
  for (const ReasonerArch a : {ReasonerArch::mlp, ReasonerArch::cnn1d, ReasonerArch::attention,
                               ReasonerArch::graph}) {
    if (name == reasoner_arch_name(a)) return a;
  }
  throw config_error("unknown reasoner arch: " + name);
}

std::int64_t reasoner_param_count(const ReasonerConfig& cfg) {
  const std::int64_t d = cfg.feature_dim;
  const std::int64_t h = cfg.hidden_dim;
  const std::int64_t l = cfg.layers;
  switch (cfg.arch) {
    case ReasonerArch::mlp:
      if (l == 1) return d * d + d;
      return (d * h + h) + (l - 2) * (h * h + h) + (h * d + d);
    case ReasonerArch::cnn1d:
      return (3 * d * h + h) + (l - 1) * (3 * h * h + h) + (h * d + d);
    case ReasonerArch::attention:
      return l * 4 * (d * d + d);
    case ReasonerArch::graph:
      if (l == 1) return 2 * d * h + h + (h * d + d);
      return (2 * d * h + h) + (l - 1) * (2 * h * h + h) + (h * d + d);
  }
  return 0;
}

ReasonerConfig widen_reasoner_to_budget(ReasonerConfig cfg, std::int64_t target) {
  if (cfg.arch == ReasonerArch::attention) {
    throw config_error("parameter balancing is not defined for the attention reasoner");
  }
  int best = cfg.hidden_dim;
  for (int h = 1; h <= 16384; ++h) {
    ReasonerConfig probe = cfg;
    probe.hidden_dim = h;
    if (reasoner_param_count(probe) > target) break;
    best = h;
  }
  cfg.hidden_dim = best;
  const double got = static_cast<double>(reasoner_param_count(cfg));
  if (std::abs(got - static_cast<double>(target)) > 0.10 * static_cast<double>(target)) {
    throw config_error("cannot balance reasoner parameters within 10% of target");
  }
  return cfg;
}

Reasoner::Reasoner(ReasonerConfig cfg, std::string prefix, std::uint64_t seed)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  if (cfg_.layers < 1) throw config_error("reasoner needs at least one layer");
  const int d = cfg_.feature_dim;
  const int h = cfg_.hidden_dim;
  const auto add_linear = [&](const std::string& name, int in, int out) {
    Tensor w = Tensor::zeros({in, out}, true);
    init::he_normal(w, in, seed, prefix_ + "/" + name + "/w");
    params_.add(prefix_ + "/" + name + "/w", w);
    params_.add(prefix_ + "/" + name + "/b", Tensor::zeros({1, out}, true));
  };
  const auto add_conv = [&](const std::string& name, int co, int ci, int k) {
    Tensor w = Tensor::zeros({co, ci, k}, true);
    init::he_normal(w, static_cast<std::int64_t>(ci) * k, seed, prefix_ + "/" + name + "/w");
    params_.add(prefix_ + "/" + name + "/w", w);
    params_.add(prefix_ + "/" + name + "/b", Tensor::zeros({co}, true));
  };

  switch (cfg_.arch) {
    case ReasonerArch::mlp: {
      if (cfg_.layers == 1) {
        add_linear("fc1", d, d);
      } else {
        add_linear("fc1", d, h);
        for (int l = 2; l < cfg_.layers; ++l) add_linear("fc" + std::to_string(l), h, h);
        add_linear("fc" + std::to_string(cfg_.layers), h, d);
      }
      break;
    }
    case ReasonerArch::cnn1d: {
      add_conv("conv1", h, d, 3);
      for (int l = 2; l <= cfg_.layers; ++l) add_conv("conv" + std::to_string(l), h, h, 3);
      add_linear("out", h, d);
      break;
    }
    case ReasonerArch::attention: {
      for (int l = 1; l <= cfg_.layers; ++l) {
        const std::string base = "attn" + std::to_string(l);
        add_linear(base + "/q", d, d);
        add_linear(base + "/k", d, d);
        add_linear(base + "/v", d, d);
        add_linear(base + "/o", d, d);
      }
      break;
    }
    case ReasonerArch::graph: {
      add_linear("gc1/self", d, h);
      // message weights share the bias with the self path; register without
      // a second bias to keep the layer a single affine map.
      Tensor w = Tensor::zeros({d, h}, true);
      init::he_normal(w, d, seed, prefix_ + "/gc1/msg/w");
      params_.add(prefix_ + "/gc1/msg/w", w);
      for (int l = 2; l <= cfg_.layers; ++l) {
        const std::string base = "gc" + std::to_string(l);
        add_linear(base + "/self", h, h);
        Tensor wm = Tensor::zeros({h, h}, true);
        init::he_normal(wm, h, seed, prefix_ + "/" + base + "/msg/w");
        params_.add(prefix_ + "/" + base + "/msg/w", wm);
      }
      add_linear("out", h, d);
      break;
    }
  }

  if (param_count() > cfg_.param_budget) {
    throw config_error("reasoner parameter count " + std::to_string(param_count()) +
                       " exceeds budget " + std::to_string(cfg_.param_budget));
  }
}

Tensor Reasoner::forward(Tape* tape, const Tensor& panel_features) const {
  if (panel_features.ndim() != 2 || panel_features.dim(1) != cfg_.feature_dim) {
    throw dimension_error("reasoner expects [panels," + std::to_string(cfg_.feature_dim) +
                          "], got " + shape_str(panel_features.shape()));
  }
  switch (cfg_.arch) {
    case ReasonerArch::mlp: return forward_mlp(tape, panel_features);
    case ReasonerArch::cnn1d: return forward_cnn1d(tape, panel_features);
    case ReasonerArch::attention: return forward_attention(tape, panel_features);
    case ReasonerArch::graph: return forward_graph(tape, panel_features);
  }
  throw contract_error("unreachable reasoner arch");
}

Tensor Reasoner::forward_mlp(Tape* tape, const Tensor& x) const {
  Tensor h = ops::mean_rows(tape, x);
  for (int l = 1; l <= cfg_.layers; ++l) {
    const std::string base = prefix_ + "/fc" + std::to_string(l);
    h = ops::add(tape, ops::matmul(tape, h, params_.at(base + "/w")), params_.at(base + "/b"));
    if (l < cfg_.layers) h = ops::relu(tape, h);
  }
  return h;
}

Tensor Reasoner::forward_cnn1d(Tape* tape, const Tensor& x) const {
  Tensor seq = ops::transpose(tape, x);  // [d, panels]
  for (int l = 1; l <= cfg_.layers; ++l) {
    const std::string base = prefix_ + "/conv" + std::to_string(l);
    seq = ops::conv1d(tape, seq, params_.at(base + "/w"), 1);
    seq = ops::add_channel_bias(tape, seq, params_.at(base + "/b"));
    seq = ops::relu(tape, seq);
  }
  Tensor pooled = ops::channel_mean(tape, seq);  // [1, hidden]
  const std::string base = prefix_ + "/out";
  return ops::add(tape, ops::matmul(tape, pooled, params_.at(base + "/w")),
                  params_.at(base + "/b"));
}

Tensor Reasoner::forward_attention(Tape* tape, const Tensor& x) const {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg_.feature_dim));
  Tensor h = x;
  for (int l = 1; l <= cfg_.layers; ++l) {
    const std::string base = prefix_ + "/attn" + std::to_string(l);
    Tensor q = ops::add_rowvec(tape, ops::matmul(tape, h, params_.at(base + "/q/w")),
                               params_.at(base + "/q/b").reshaped({cfg_.feature_dim}));
    Tensor k = ops::add_rowvec(tape, ops::matmul(tape, h, params_.at(base + "/k/w")),
                               params_.at(base + "/k/b").reshaped({cfg_.feature_dim}));
    Tensor v = ops::add_rowvec(tape, ops::matmul(tape, h, params_.at(base + "/v/w")),
                               params_.at(base + "/v/b").reshaped({cfg_.feature_dim}));
    Tensor scores = ops::scale(tape, ops::matmul_nt(tape, q, k), inv_sqrt_d);
    Tensor attn = ops::softmax_rows(tape, scores);
    Tensor ctx = ops::matmul(tape, attn, v);
    Tensor out = ops::add_rowvec(tape, ops::matmul(tape, ctx, params_.at(base + "/o/w")),
                                 params_.at(base + "/o/b").reshaped({cfg_.feature_dim}));
    h = ops::relu(tape, ops::add(tape, h, out));
  }
  return ops::mean_rows(tape, h);
}

Tensor Reasoner::forward_graph(Tape* tape, const Tensor& x) const {
  const int p = x.dim(0);
  // Complete-graph neighbor mean: (J - I) / (p - 1); a lone node gets a zero
  // message.
  Tensor adj = Tensor::zeros({p, p});
  if (p > 1) {
    const double w = 1.0 / (p - 1);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        if (i != j) adj.data()[static_cast<std::size_t>(i) * p + j] = w;
      }
    }
  }
  Tensor h = x;
  for (int l = 1; l <= cfg_.layers; ++l) {
    const std::string base = prefix_ + "/gc" + std::to_string(l);
    Tensor msg = ops::matmul(tape, adj, h);
    Tensor z = ops::add(tape, ops::matmul(tape, h, params_.at(base + "/self/w")),
                        ops::matmul(tape, msg, params_.at(base + "/msg/w")));
    const int out_dim = z.dim(1);
    z = ops::add_rowvec(tape, z, params_.at(base + "/self/b").reshaped({out_dim}));
    h = ops::relu(tape, z);
  }
  Tensor pooled = ops::mean_rows(tape, h);
  const std::string base = prefix_ + "/out";
  return ops::add(tape, ops::matmul(tape, pooled, params_.at(base + "/w")),
                  params_.at(base + "/b"));
}

}  // namespace tsr
