#include "tsr/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "tsr/rng.hpp"

namespace tsr {

void run_jobs(int threads, std::vector<std::function<void()>> jobs) {
  if (threads <= 1 || jobs.size() <= 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  const int workers = std::min<int>(threads, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          jobs[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double keypoint_mse_scaled(const Trajectory& pred, const Trajectory& target) {
  if (pred.frames != target.frames || pred.num_balls != target.num_balls ||
      pred.coords.size() != target.coords.size()) {
    throw dimension_error("keypoint_mse_scaled: trajectory shapes differ");
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.coords.size(); ++i) {
    const double d = static_cast<double>(pred.coords[i]) - static_cast<double>(target.coords[i]);
    sse += d * d;
  }
  return 200.0 * sse / static_cast<double>(pred.coords.size());
}

int detect_inflection(const std::vector<std::pair<int, double>>& curve, double rho,
                      int* argmax_depth) {
  if (curve.size() < 3) throw config_error("detect_inflection: need at least 3 depths");
  double best = curve.front().second;
  int best_depth = curve.front().first;
  for (const auto& [depth, acc] : curve) {
    if (acc > best) {
      best = acc;
      best_depth = depth;
    }
  }
  if (argmax_depth) *argmax_depth = best_depth;
  for (const auto& [depth, acc] : curve) {
    if (acc >= (1.0 - rho) * best) return depth;
  }
  return best_depth;
}

// ---------------------------------------------------------------------------
// sharing ablation
// ---------------------------------------------------------------------------

std::vector<AblationRow> run_sharing_ablation(const Manifest& m) {
  if (m.tasks.size() < 3) throw config_error("sharing ablation needs at least 3 tasks");
  for (const auto& t : m.tasks) {
    if (t.spec.family == TaskFamily::ball_motion) {
      throw config_error("sharing ablation runs on classification tasks");
    }
  }
  const SharingMode modes[4] = {SharingMode::both_separated, SharingMode::both_shared,
                                SharingMode::shared_encoder_only,
                                SharingMode::shared_reasoner_only};

  struct Cell {
    std::vector<double> acc;  // per task
  };
  std::vector<Cell> cells(m.seeds.size() * 4);
  std::vector<std::function<void()>> jobs;
  for (std::size_t si = 0; si < m.seeds.size(); ++si) {
    for (int mi = 0; mi < 4; ++mi) {
      jobs.push_back([&m, &cells, si, mi, &modes] {
        const std::uint64_t seed = m.seeds[si];
        TrainOptions opt = m.base;
        opt.mode = modes[mi];
        opt.seed = seed;
        std::vector<TaskSpec> specs;
        std::vector<TaskData> data;
        for (const auto& t : m.tasks) {
          specs.push_back(t.spec);
          // Data depends on the seed only, so all four modes see the same
          // episodes.
          data.push_back(make_task_data(t.spec, t.train_episodes, t.val_episodes, seed));
        }
        TwoStageSystem sys = build_system(specs, opt);
        train_multitask(sys, data, opt);
        Cell cell;
        for (std::size_t ti = 0; ti < specs.size(); ++ti) {
          cell.acc.push_back(evaluate_task(sys, ti, data[ti].val));
        }
        cells[si * 4 + static_cast<std::size_t>(mi)] = std::move(cell);
      });
    }
  }
  run_jobs(m.threads, std::move(jobs));

  std::vector<AblationRow> rows;
  for (std::size_t si = 0; si < m.seeds.size(); ++si) {
    for (int mi = 0; mi < 4; ++mi) {
      const Cell& cell = cells[si * 4 + static_cast<std::size_t>(mi)];
      for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
        rows.push_back({sharing_mode_name(modes[mi]), m.tasks[ti].spec.name, m.seeds[si],
                        cell.acc[ti]});
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// depth probe
// ---------------------------------------------------------------------------

namespace {

// Cached pooled activations for one task at one depth: per episode, one
// [panels x channels] block, inputs first then candidates.
struct CachedSplit {
  std::vector<std::vector<double>> pooled;  // [episode][panel*channels]
  std::vector<int> panels;
  int channels = 0;
};

struct ProbeCache {
  // [depth index] -> features for train/val
  std::vector<CachedSplit> train;
  std::vector<CachedSplit> val;
};

void cache_split(const Encoder& enc, const std::vector<Episode>& episodes,
                 const std::vector<int>& depths, std::vector<CachedSplit>* out) {
  out->assign(depths.size(), CachedSplit{});
  for (std::size_t di = 0; di < depths.size(); ++di) {
    (*out)[di].channels = Encoder::channels_at(enc.config(), depths[di]);
    (*out)[di].pooled.reserve(episodes.size());
    (*out)[di].panels.reserve(episodes.size());
  }
  for (const auto& e : episodes) {
    std::vector<std::vector<double>> per_depth(depths.size());
    int panels = 0;
    const auto eat_panel = [&](const RasterImage& img) {
      const std::vector<Tensor> pooled = enc.pooled_at_blocks(image_to_tensor(img), depths);
      for (std::size_t di = 0; di < depths.size(); ++di) {
        const auto& v = pooled[di].data();
        per_depth[di].insert(per_depth[di].end(), v.begin(), v.end());
      }
      ++panels;
    };
    for (const auto& img : e.inputs) eat_panel(img);
    for (const auto& img : e.candidates) eat_panel(img);
    for (std::size_t di = 0; di < depths.size(); ++di) {
      (*out)[di].pooled.push_back(std::move(per_depth[di]));
      (*out)[di].panels.push_back(panels);
    }
  }
}

// Probe-side model: trainable projection (from a truncated encoder) and a
// fresh head over cached pooled features; the reasoner is passed in.
struct ProbeTaskNet {
  std::unique_ptr<Encoder> trunc;
  std::shared_ptr<Head> head;
  TaskFamily family;
  int n_inputs = 0;

  Tensor features(Tape* tape, const CachedSplit& split, std::size_t episode) const {
    const int panels = split.panels[episode];
    const int c = split.channels;
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(panels));
    for (int p = 0; p < panels; ++p) {
      Tensor pooled = Tensor::zeros({1, c});
      const double* src = split.pooled[episode].data() + static_cast<std::size_t>(p) * c;
      std::copy(src, src + c, pooled.ptr());
      rows.push_back(trunc->project(tape, pooled).reshaped({trunc->config().feature_dim}));
    }
    return ops::stack_rows(tape, rows);
  }

  Tensor logits(Tape* tape, const Reasoner& reasoner, const CachedSplit& split,
                std::size_t episode) const {
    Tensor feats = features(tape, split, episode);
    Tensor c = reasoner.forward(tape, feats);
    if (head->config().kind == HeadKind::choose_k) {
      const int n_cand = feats.dim(0) - n_inputs;
      std::vector<Tensor> cand_rows;
      for (int i = 0; i < n_cand; ++i) {
        cand_rows.push_back(ops::slice_row(tape, feats, n_inputs + i));
      }
      return head->score_candidates(tape, c, ops::stack_rows(tape, cand_rows));
    }
    return head->binary_logit(tape, c, ops::slice_row(tape, feats, feats.dim(0) - 1));
  }
};

double probe_eval(const ProbeTaskNet& net, const Reasoner& reasoner, const CachedSplit& split,
                  const std::vector<Episode>& episodes) {
  std::int64_t correct = 0;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    Tensor logits = net.logits(nullptr, reasoner, split, e);
    if (net.head->config().kind == HeadKind::choose_k) {
      int best = 0;
      for (int j = 1; j < logits.dim(1); ++j) {
        if (logits.data()[static_cast<std::size_t>(j)] >
            logits.data()[static_cast<std::size_t>(best)]) {
          best = j;
        }
      }
      correct += best == episodes[e].label ? 1 : 0;
    } else {
      correct += (logits.data()[0] > 0.0) == (episodes[e].label == 1) ? 1 : 0;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(episodes.size());
}

}  // namespace

DepthProbeResult run_depth_probe(const Manifest& m) {
  if (m.tasks.empty()) throw config_error("depth probe needs tasks");
  for (const auto& t : m.tasks) {
    if (t.spec.family == TaskFamily::ball_motion) {
      throw config_error("depth probe runs on image tasks");
    }
  }
  const std::uint64_t seed = m.seeds.front();
  const int n_tasks = static_cast<int>(m.tasks.size());
  const int full_depth = *std::max_element(m.probe_depths.begin(), m.probe_depths.end());

  // Stage 1: train each task's full-depth encoder to its own best.
  std::vector<TwoStageSystem> base_systems;
  std::vector<TaskData> base_data(m.tasks.size());
  base_systems.reserve(m.tasks.size());
  for (const auto& t : m.tasks) {
    TrainOptions opt = m.base;
    opt.mode = SharingMode::both_separated;
    opt.encoder.depth_blocks = full_depth;
    opt.seed = seed;
    opt.epochs = m.base_epochs;
    base_systems.push_back(build_system({t.spec}, opt));
  }
  {
    std::vector<std::function<void()>> jobs;
    for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
      jobs.push_back([&, ti] {
        const auto& t = m.tasks[ti];
        base_data[ti] = make_task_data(t.spec, t.train_episodes, t.val_episodes, seed);
        TrainOptions opt = m.base;
        opt.mode = SharingMode::both_separated;
        opt.encoder.depth_blocks = full_depth;
        opt.seed = seed;
        opt.epochs = m.base_epochs;
        train_multitask(base_systems[ti], {base_data[ti]}, opt);
      });
    }
    run_jobs(m.threads, std::move(jobs));
  }

  // Stage 2: probe episodes and cached pooled features at every probed depth.
  std::vector<TaskData> probe_data(m.tasks.size());
  std::vector<ProbeCache> caches(m.tasks.size());
  {
    std::vector<std::function<void()>> jobs;
    for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
      jobs.push_back([&, ti] {
        probe_data[ti] = make_task_data(m.tasks[ti].spec, m.probe_train_episodes,
                                        m.probe_val_episodes, seed);
        const Encoder& enc = *base_systems[ti].models[0]->encoder();
        cache_split(enc, probe_data[ti].train, m.probe_depths, &caches[ti].train);
        cache_split(enc, probe_data[ti].val, m.probe_depths, &caches[ti].val);
      });
    }
    run_jobs(m.threads, std::move(jobs));
  }

  // Stage 3: per depth, frozen truncations + fresh projection/heads feed a
  // fresh shared reasoner; only those train.
  std::vector<std::vector<double>> acc(m.probe_depths.size(),
                                       std::vector<double>(m.tasks.size(), 0.0));
  std::vector<std::function<void()>> depth_jobs;
  for (std::size_t di = 0; di < m.probe_depths.size(); ++di) {
    depth_jobs.push_back([&, di] {
      const int depth = m.probe_depths[di];
      const std::uint64_t dseed = seed_split(seed, "probe/depth", static_cast<std::uint64_t>(depth));
      Reasoner reasoner(m.base.reasoner, "probe/reasoner", dseed);

      std::vector<ProbeTaskNet> nets;
      std::vector<ParamSet> task_groups;
      std::vector<std::uint64_t> frozen_sums;
      for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
        ProbeTaskNet net;
        net.family = m.tasks[ti].spec.family;
        net.trunc = truncate_encoder(*base_systems[ti].models[0]->encoder(), depth,
                                     seed_split(dseed, m.tasks[ti].spec.name));
        net.n_inputs = static_cast<int>(probe_data[ti].train.front().inputs.size());
        HeadConfig hc;
        hc.kind = head_kind_for(net.family);
        hc.feature_dim = m.base.reasoner.feature_dim;
        net.head = std::make_shared<Head>(
            hc, "probe/" + m.tasks[ti].spec.name + "/head", seed_split(dseed, "head", ti));

        ParamSet group;
        const std::string proj_prefix = net.trunc->prefix() + "/proj";
        group.add(proj_prefix + "/w", net.trunc->params().at(proj_prefix + "/w"));
        group.add(proj_prefix + "/b", net.trunc->params().at(proj_prefix + "/b"));
        group.merge(net.head->params());
        task_groups.push_back(std::move(group));

        // Freeze audit baseline over the copied stem/blocks.
        ParamSet frozen;
        for (const auto& p : net.trunc->params().paths()) {
          if (p.find("/proj/") == std::string::npos) frozen.add(p, net.trunc->params().at(p));
        }
        frozen_sums.push_back(frozen.checksum());
        nets.push_back(std::move(net));
      }

      ParamSet shared_group;
      shared_group.merge(reasoner.params());

      std::vector<AdamState> task_opt(m.tasks.size());
      for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
        task_opt[ti].lr = m.tasks[ti].spec.schedule.lr;
        task_opt[ti].weight_decay = m.tasks[ti].spec.schedule.weight_decay;
      }
      AdamState shared_opt;
      shared_opt.lr = m.base.lr_shared;
      shared_opt.weight_decay = m.base.wd_shared;

      for (int epoch = 0; epoch < m.probe_epochs; ++epoch) {
        std::vector<std::vector<std::size_t>> order(m.tasks.size());
        std::vector<std::size_t> cursor(m.tasks.size(), 0);
        std::size_t max_batches = 0;
        for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
          order[ti].resize(probe_data[ti].train.size());
          for (std::size_t j = 0; j < order[ti].size(); ++j) order[ti][j] = j;
          Rng rng(seed_split(dseed, "order/" + m.tasks[ti].spec.name,
                             static_cast<std::uint64_t>(epoch)));
          rng.shuffle(order[ti]);
          const std::size_t bs =
              static_cast<std::size_t>(m.tasks[ti].spec.schedule.batch_size);
          max_batches = std::max(max_batches, (order[ti].size() + bs - 1) / bs);
        }
        for (std::size_t step = 0; step < max_batches; ++step) {
          for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
            const std::size_t bs =
                static_cast<std::size_t>(m.tasks[ti].spec.schedule.batch_size);
            if (cursor[ti] >= order[ti].size()) continue;
            Tape tape;
            std::vector<Tensor> rows;
            std::vector<std::int64_t> labels;
            std::vector<double> targets;
            for (std::size_t k = 0; k < bs && cursor[ti] < order[ti].size(); ++k) {
              const std::size_t e = order[ti][cursor[ti]++];
              rows.push_back(nets[ti].logits(&tape, reasoner, caches[ti].train[di], e));
              labels.push_back(probe_data[ti].train[e].label);
              targets.push_back(probe_data[ti].train[e].label == 1 ? 1.0 : 0.0);
            }
            Tensor loss;
            if (nets[ti].head->config().kind == HeadKind::choose_k) {
              loss = ops::softmax_cross_entropy(&tape, ops::stack_rows(&tape, rows), labels);
            } else {
              loss = ops::bce_with_logits(&tape, ops::stack_rows(&tape, rows), targets);
            }
            if (!std::isfinite(loss.value())) {
              throw numeric_error("non-finite probe loss at depth " + std::to_string(depth));
            }
            tape.backward(loss);
            adam_step(task_groups[ti], task_opt[ti]);
            adam_step(shared_group, shared_opt);
          }
        }
      }

      for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
        acc[di][ti] = probe_eval(nets[ti], reasoner, caches[ti].val[di], probe_data[ti].val);
        ParamSet frozen;
        for (const auto& p : nets[ti].trunc->params().paths()) {
          if (p.find("/proj/") == std::string::npos) {
            frozen.add(p, nets[ti].trunc->params().at(p));
          }
        }
        if (frozen.checksum() != frozen_sums[ti]) {
          throw contract_error("depth probe: frozen truncated blocks changed during probing");
        }
      }
    });
  }
  run_jobs(m.threads, std::move(depth_jobs));

  DepthProbeResult result;
  for (std::size_t ti = 0; ti < m.tasks.size(); ++ti) {
    std::vector<std::pair<int, double>> curve;
    for (std::size_t di = 0; di < m.probe_depths.size(); ++di) {
      curve.push_back({m.probe_depths[di], acc[di][ti]});
    }
    int argmax = 0;
    const int inflection = detect_inflection(curve, m.rho, &argmax);
    result.inflection_depth[m.tasks[ti].spec.name] = inflection;
    result.argmax_depth[m.tasks[ti].spec.name] = argmax;
    for (const auto& [depth, a] : curve) {
      result.rows.push_back({m.tasks[ti].spec.name, depth, a, depth == inflection});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// approximation study
// ---------------------------------------------------------------------------

std::vector<TransferRow> run_approximation_study(const Manifest& m) {
  if (m.tasks.size() != 4) throw config_error("approximation study expects 4 training tasks");
  if (m.target.spec.family != TaskFamily::ball_motion) {
    throw config_error("approximation study target must be a ball-motion variant");
  }

  struct Cell {
    int mask;
    int track;
    std::uint64_t seed;
    double metric = 0.0;
  };
  std::vector<Cell> cells;
  for (const std::uint64_t seed : m.seeds) {
    for (const int track : m.tracks) {
      for (int mask = 1; mask < 16; ++mask) cells.push_back({mask, track, seed, 0.0});
    }
  }

  std::vector<std::function<void()>> jobs;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    jobs.push_back([&m, &cells, ci] {
      Cell& cell = cells[ci];
      std::vector<TaskSpec> specs;
      for (int ti = 0; ti < 4; ++ti) {
        if (cell.mask & (1 << ti)) specs.push_back(m.tasks[static_cast<std::size_t>(ti)].spec);
      }

      // Joint training of the two-stage model with the shared reasoner. The
      // reasoner keeps a fixed width across subsets so the comparison only
      // varies training diversity.
      TrainOptions opt = m.base;
      opt.mode = SharingMode::shared_reasoner_only;
      opt.balance_shared_params = false;
      opt.seed = cell.seed;
      opt.epochs = m.joint_epochs;
      TwoStageSystem joint = build_system(specs, opt);
      const std::vector<TaskData> data = balance_samples(
          specs, cell.track, m.tasks.front().val_episodes,
          seed_split(cell.seed, "transfer/joint"));
      train_multitask(joint, data, opt);

      std::shared_ptr<Reasoner> reasoner = joint.reasoners.front();
      reasoner->set_frozen(true);
      const std::uint64_t frozen_before = reasoner->params().checksum();

      // Target fine-tune: fresh encoder + head, identity-initialized adapter
      // in front of the frozen reasoner.
      TrainOptions ft = m.base;
      ft.mode = SharingMode::both_separated;
      ft.seed = cell.seed;
      ft.epochs = m.finetune_epochs;
      TwoStageSystem target;
      target.mode = SharingMode::both_separated;
      target.specs = {m.target.spec};
      TaskModelConfig tmc;
      tmc.family = m.target.spec.family;
      tmc.encoder = ft.encoder;
      tmc.ball = m.target.spec.ball;
      target.models.push_back(std::make_shared<TaskModel>(
          tmc, m.target.spec.name, seed_split(cell.seed, "task/" + m.target.spec.name)));
      target.reasoners.push_back(reasoner);
      ParamSet group;
      group.merge(target.models[0]->own_params());
      target.task_groups.push_back(std::move(group));

      auto adapter = std::make_shared<Adapter>(ft.reasoner.feature_dim, "target/adapter",
                                               seed_split(cell.seed, "target/adapter"));
      adapter->set_identity();
      attach_adapter(target, adapter);

      TaskSpec ft_spec = m.target.spec;
      ft_spec.schedule.lr = m.finetune_lr;
      ft_spec.schedule.weight_decay = m.finetune_wd;
      target.specs = {ft_spec};
      const TaskData target_data = make_task_data(ft_spec, m.finetune_train_episodes,
                                                  m.target.val_episodes,
                                                  seed_split(cell.seed, "transfer/target"));
      train_single(target, target_data, ft);

      if (reasoner->params().checksum() != frozen_before) {
        throw contract_error("approximation study: frozen reasoner changed during fine-tune");
      }
      cell.metric = evaluate_task(target, 0, target_data.val);
    });
  }
  run_jobs(m.threads, std::move(jobs));

  std::vector<TransferRow> rows;
  rows.reserve(cells.size());
  for (const auto& c : cells) rows.push_back({c.mask, c.track, c.seed, c.metric});
  return rows;
}

// ---------------------------------------------------------------------------
// consistency
// ---------------------------------------------------------------------------

ConsistencyRow consistency_from_counts(const std::string& task, const ConsistencyCounts& c) {
  ConsistencyRow row;
  row.task = task;
  row.acc_choose = 100.0 * static_cast<double>(c.choose_correct) /
                   static_cast<double>(std::max<std::int64_t>(1, c.episodes));
  row.acc_verify = 100.0 * static_cast<double>(c.verify_correct_pairs) /
                   static_cast<double>(std::max<std::int64_t>(1, c.total_pairs));
  // Agreement F1 over the chosen candidates: the choose-mode selection is
  // the reference positive, verify-mode's accept/reject on it the prediction.
  const double tp = static_cast<double>(c.selected_accepted);
  const double fn = static_cast<double>(c.episodes - c.selected_accepted);
  row.f1 = (tp + fn) > 0 && tp > 0 ? 2.0 * tp / (2.0 * tp + fn) : 0.0;
  return row;
}

std::vector<ConsistencyRow> run_consistency(const Manifest& m,
                                            std::vector<BreakdownRow>* breakdown) {
  for (const auto& t : m.tasks) {
    if (head_kind_for(t.spec.family) != HeadKind::choose_k) {
      throw unsupported_task_error("consistency requires choice-based tasks, got " +
                                   std::string(family_name(t.spec.family)));
    }
  }
  const std::uint64_t seed = m.seeds.front();
  TrainOptions opt = m.base;
  opt.mode = SharingMode::shared_reasoner_only;
  opt.seed = seed;
  opt.epochs = m.consistency_epochs;
  std::vector<TaskSpec> specs;
  std::vector<TaskData> data;
  for (const auto& t : m.tasks) {
    specs.push_back(t.spec);
    data.push_back(make_task_data(t.spec, t.train_episodes, t.val_episodes, seed));
  }
  TwoStageSystem sys = build_system(specs, opt);
  train_multitask(sys, data, opt);

  std::vector<ConsistencyRow> rows;
  for (std::size_t ti = 0; ti < specs.size(); ++ti) {
    ConsistencyCounts counts;
    for (const auto& e : data[ti].val) {
      Tensor logits = sys.models[ti]->episode_logits(nullptr, sys.reasoner_for(ti), e);
      const int k = logits.dim(1);
      int best = 0;
      double sum = 0.0;
      for (int j = 0; j < k; ++j) {
        sum += logits.data()[static_cast<std::size_t>(j)];
        if (logits.data()[static_cast<std::size_t>(j)] >
            logits.data()[static_cast<std::size_t>(best)]) {
          best = j;
        }
      }
      counts.episodes += 1;
      counts.choose_correct += best == e.label ? 1 : 0;
      for (int j = 0; j < k; ++j) {
        const double lj = logits.data()[static_cast<std::size_t>(j)];
        const double mean_others = (sum - lj) / static_cast<double>(k - 1);
        const bool accept = lj - mean_others > 0.0;
        counts.total_pairs += 1;
        counts.verify_correct_pairs += accept == (j == e.label) ? 1 : 0;
        if (j == best && accept) counts.selected_accepted += 1;
      }
    }
    rows.push_back(consistency_from_counts(specs[ti].name, counts));
    if (breakdown) {
      const auto part = per_rule_breakdown(sys, ti, data[ti].val);
      breakdown->insert(breakdown->end(), part.begin(), part.end());
    }
  }
  return rows;
}

std::vector<BreakdownRow> per_rule_breakdown(const TwoStageSystem& system, std::size_t task,
                                             const std::vector<Episode>& episodes) {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> buckets;  // correct, total
  for (const auto& e : episodes) {
    const std::vector<Episode> one = {e};
    const double acc = system.models[task]->evaluate(system.reasoner_for(task), one,
                                                     system.adapter.get());
    auto& b = buckets[e.meta.attribute];
    b.first += acc > 50.0 ? 1 : 0;
    b.second += 1;
  }
  std::vector<BreakdownRow> rows;
  for (const auto& [attr, b] : buckets) {
    rows.push_back({system.specs[task].name, attr,
                    100.0 * static_cast<double>(b.first) / static_cast<double>(b.second),
                    static_cast<int>(b.second)});
  }
  return rows;
}

}  // namespace tsr
