#include "tsr/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "tsr/rng.hpp"

namespace tsr {

const char* sharing_mode_name(SharingMode m) {
  switch (m) {
    case SharingMode::both_separated: return "both_separated";
    case SharingMode::both_shared: return "both_shared";
    case SharingMode::shared_encoder_only: return "shared_encoder_only";
    case SharingMode::shared_reasoner_only: return "shared_reasoner_only";
  }
  return "unknown";
}

SharingMode sharing_mode_from_name(const std::string& name) {
  for (const SharingMode m : {SharingMode::both_separated, SharingMode::both_shared,
                              SharingMode::shared_encoder_only,
                              SharingMode::shared_reasoner_only}) {
    if (name == sharing_mode_name(m)) return m;
  }
  throw config_error("unknown sharing mode: " + name);
}

namespace {

bool shares_encoder(SharingMode m) {
  return m == SharingMode::both_shared || m == SharingMode::shared_encoder_only;
}

bool shares_reasoner(SharingMode m) {
  return m == SharingMode::both_shared || m == SharingMode::shared_reasoner_only;
}

}  // namespace

void TwoStageSystem::audit_sharing() const {
  const bool enc_shared = shares_encoder(mode);
  const bool rsn_shared = shares_reasoner(mode);
  for (std::size_t i = 1; i < specs.size(); ++i) {
    if (rsn_shared && reasoners[i].get() != reasoners[0].get()) {
      throw contract_error("sharing audit: reasoner storage diverged across tasks");
    }
    if (!rsn_shared && reasoners[i].get() == reasoners[0].get()) {
      throw contract_error("sharing audit: reasoners unexpectedly shared");
    }
    const auto enc_i = models[i]->encoder();
    const auto enc_0 = models[0]->encoder();
    if (enc_shared && enc_i && enc_0 && enc_i.get() != enc_0.get()) {
      throw contract_error("sharing audit: encoder storage diverged across tasks");
    }
    if (!enc_shared && enc_i && enc_0 && enc_i.get() == enc_0.get()) {
      throw contract_error("sharing audit: encoders unexpectedly shared");
    }
  }
  if (rsn_shared) {
    // Same parameter paths and the same underlying buffers.
    for (std::size_t i = 1; i < specs.size(); ++i) {
      const auto& a = reasoners[0]->params();
      const auto& b = reasoners[i]->params();
      if (a.paths() != b.paths()) {
        throw contract_error("sharing audit: reasoner parameter paths differ");
      }
      for (const auto& p : a.paths()) {
        if (a.at(p).storage_id() != b.at(p).storage_id()) {
          throw contract_error("sharing audit: reasoner parameter " + p + " not aliased");
        }
      }
    }
  }
}

ParamSet TwoStageSystem::all_params() const {
  ParamSet all;
  for (const auto& g : task_groups) all.merge(g);
  // Shared modules appear once.
  for (const auto& p : shared_group.paths()) {
    if (!all.contains(p)) all.add(p, shared_group.at(p));
  }
  return all;
}

TwoStageSystem build_system(const std::vector<TaskSpec>& specs, const TrainOptions& opt) {
  if (specs.empty()) throw config_error("build_system: no tasks");
  TwoStageSystem sys;
  sys.mode = opt.mode;
  sys.specs = specs;

  const bool enc_shared = shares_encoder(opt.mode);
  const bool rsn_shared = shares_reasoner(opt.mode);
  const int n = static_cast<int>(specs.size());

  int image_tasks = 0;
  for (const auto& s : specs) {
    if (s.family != TaskFamily::ball_motion) ++image_tasks;
    if (enc_shared && s.family == TaskFamily::ball_motion) {
      throw config_error("shared-encoder modes require image tasks only");
    }
  }

  std::shared_ptr<Encoder> shared_encoder;
  if (enc_shared) {
    EncoderConfig ec = opt.encoder;
    if (opt.balance_shared_params && image_tasks > 1) {
      ec = widen_encoder_to_budget(ec, Encoder::param_count_for(ec) * image_tasks);
    }
    shared_encoder = std::make_shared<Encoder>(ec, "shared/encoder",
                                               seed_split(opt.seed, "shared/encoder"));
    sys.shared_group.merge(shared_encoder->params());
  }

  std::shared_ptr<Reasoner> shared_reasoner;
  if (rsn_shared) {
    ReasonerConfig rc = opt.reasoner;
    if (opt.balance_shared_params && n > 1) {
      rc = widen_reasoner_to_budget(rc, reasoner_param_count(rc) * n);
    }
    shared_reasoner = std::make_shared<Reasoner>(rc, "shared/reasoner",
                                                 seed_split(opt.seed, "shared/reasoner"));
    sys.shared_group.merge(shared_reasoner->params());
  }

  for (int i = 0; i < n; ++i) {
    const TaskSpec& spec = specs[static_cast<std::size_t>(i)];
    TaskModelConfig mc;
    mc.family = spec.family;
    mc.encoder = opt.encoder;
    mc.ball = spec.ball;
    const std::uint64_t task_seed = seed_split(opt.seed, "task/" + spec.name);
    auto model = std::make_shared<TaskModel>(
        mc, spec.name, task_seed,
        (enc_shared && spec.family != TaskFamily::ball_motion) ? shared_encoder : nullptr);

    std::shared_ptr<Reasoner> reasoner;
    if (rsn_shared) {
      reasoner = shared_reasoner;
    } else {
      reasoner = std::make_shared<Reasoner>(opt.reasoner, spec.name + "/reasoner",
                                            seed_split(task_seed, "reasoner"));
    }

    ParamSet group;
    if (!enc_shared || spec.family == TaskFamily::ball_motion) {
      if (model->encoder()) group.merge(model->encoder()->params());
      if (model->coord_encoder()) group.merge(model->coord_encoder()->params());
    }
    if (!rsn_shared) group.merge(reasoner->params());
    group.merge(model->head()->params());

    sys.models.push_back(std::move(model));
    sys.reasoners.push_back(std::move(reasoner));
    sys.task_groups.push_back(std::move(group));
  }

  sys.audit_sharing();
  return sys;
}

TaskData make_task_data(const TaskSpec& spec, int n_train, int n_val, std::uint64_t root_seed) {
  const std::uint64_t stream = seed_split(root_seed, "data/" + spec.name);
  TaskData data;
  data.train.reserve(static_cast<std::size_t>(n_train));
  data.val.reserve(static_cast<std::size_t>(n_val));
  for (const std::uint64_t s : split_seeds(stream, spec.family, "train", n_train)) {
    data.train.push_back(generate_episode(spec.family, s, spec.ball));
  }
  for (const std::uint64_t s : split_seeds(stream, spec.family, "val", n_val)) {
    data.val.push_back(generate_episode(spec.family, s, spec.ball));
  }
  return data;
}

std::vector<TaskData> balance_samples(const std::vector<TaskSpec>& specs, int n_per_task,
                                      int n_val, std::uint64_t root_seed) {
  std::vector<TaskData> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(make_task_data(s, n_per_task, n_val, root_seed));
  return out;
}

double evaluate_task(const TwoStageSystem& system, std::size_t task,
                     const std::vector<Episode>& episodes) {
  return system.models[task]->evaluate(system.reasoner_for(task), episodes,
                                       system.adapter.get());
}

TrainResult train_multitask(TwoStageSystem& system, const std::vector<TaskData>& data,
                            const TrainOptions& opt, TrainState* resume_state,
                            std::vector<AdamState>* resume_task_opt,
                            AdamState* resume_shared_opt) {
  const std::size_t n = system.specs.size();
  if (data.size() != n) throw data_error("train_multitask: data/spec count mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (data[i].train.empty()) {
      throw data_error("train_multitask: empty training set for task " + system.specs[i].name);
    }
  }
  if (opt.epochs < 0) throw config_error("train_multitask: negative epoch count");

  TrainResult result;
  if (resume_state) {
    result.state = *resume_state;
  } else {
    result.state.history.assign(n, {});
  }
  if (resume_task_opt) {
    result.task_optimizers = *resume_task_opt;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      AdamState st;
      st.lr = system.specs[i].schedule.lr;
      st.weight_decay = system.specs[i].schedule.weight_decay;
      result.task_optimizers.push_back(std::move(st));
    }
  }
  if (resume_shared_opt) {
    result.shared_optimizer = *resume_shared_opt;
  } else {
    result.shared_optimizer.lr = opt.lr_shared;
    result.shared_optimizer.weight_decay = opt.wd_shared;
  }

  const bool has_shared = system.shared_group.size() > 0;

  for (int epoch = result.state.epoch; epoch < opt.epochs; ++epoch) {
    system.audit_sharing();

    // Per-task minibatch index orders, reshuffled per epoch from a stateless
    // stream so resumed runs see identical data order.
    std::vector<std::vector<std::size_t>> order(n);
    std::vector<std::size_t> cursor(n, 0);
    std::vector<double> loss_sum(n, 0.0);
    std::vector<int> loss_count(n, 0);
    std::size_t max_batches = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (epoch < system.specs[i].schedule.entry_epoch) continue;
      order[i].resize(data[i].train.size());
      for (std::size_t j = 0; j < order[i].size(); ++j) order[i][j] = j;
      Rng rng(seed_split(opt.seed, "order/" + system.specs[i].name,
                         static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order[i]);
      const std::size_t bs = static_cast<std::size_t>(system.specs[i].schedule.batch_size);
      max_batches = std::max(max_batches, (order[i].size() + bs - 1) / bs);
    }

    for (std::size_t step = 0; step < max_batches; ++step) {
      for (std::size_t i = 0; i < n; ++i) {
        if (epoch < system.specs[i].schedule.entry_epoch) continue;
        const std::size_t bs = static_cast<std::size_t>(system.specs[i].schedule.batch_size);
        if (cursor[i] >= order[i].size()) continue;
        std::vector<const Episode*> batch;
        for (std::size_t k = 0; k < bs && cursor[i] < order[i].size(); ++k) {
          batch.push_back(&data[i].train[order[i][cursor[i]++]]);
        }
        Tape tape;
        Tensor loss = system.models[i]->batch_loss(&tape, system.reasoner_for(i), batch,
                                                   system.adapter.get());
        const double lv = loss.value();
        if (!std::isfinite(lv)) {
          throw numeric_error("non-finite loss in task " + system.specs[i].name + " at epoch " +
                              std::to_string(epoch) + " step " + std::to_string(step));
        }
        loss_sum[i] += lv;
        loss_count[i] += 1;
        tape.backward(loss);
        adam_step(system.task_groups[i], result.task_optimizers[i]);
        if (has_shared) adam_step(system.shared_group, result.shared_optimizer);
      }
    }

    bool all_reached = opt.stop_at_accuracy.has_value();
    for (std::size_t i = 0; i < n; ++i) {
      EpochMetrics m;
      m.train_loss = loss_count[i] ? loss_sum[i] / loss_count[i] : 0.0;
      m.val_metric = data[i].val.empty() ? 0.0 : evaluate_task(system, i, data[i].val);
      result.state.history[i].push_back(m);
      if (all_reached) {
        const bool classification = system.specs[i].family != TaskFamily::ball_motion;
        if (!classification || m.val_metric < *opt.stop_at_accuracy) all_reached = false;
      }
    }
    result.state.epoch = epoch + 1;
    if (all_reached) break;
  }
  return result;
}

TrainResult train_single(TwoStageSystem& system, const TaskData& data, const TrainOptions& opt) {
  return train_multitask(system, {data}, opt);
}

void attach_adapter(TwoStageSystem& system, std::shared_ptr<Adapter> adapter) {
  for (const auto& r : system.reasoners) {
    if (!r->frozen()) {
      throw contract_error("attach_adapter: the reasoner must be frozen first");
    }
  }
  system.adapter = std::move(adapter);
  for (auto& group : system.task_groups) {
    for (const auto& p : system.adapter->params().paths()) {
      if (!group.contains(p)) group.add(p, system.adapter->params().at(p));
    }
  }
}

}  // namespace tsr
