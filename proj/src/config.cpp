#include "tsr/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "tsr/rng.hpp"

namespace tsr {

namespace {

using nlohmann::json;

struct Validator {
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) {
    errors.push_back(path + ": " + msg);
  }

  void check_keys(const json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
      (void)value;
      if (!allowed.count(key)) fail(path + "." + key, "unknown key");
    }
  }

  bool want_object(const json& j, const std::string& path) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    return true;
  }

  template <typename T>
  T number(const json& obj, const std::string& path, const std::string& key, T fallback,
           double lo, double hi) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(path + "." + key, "expected a number");
      return fallback;
    }
    const double d = v.get<double>();
    if (d < lo || d > hi) {
      fail(path + "." + key,
           "value " + std::to_string(d) + " out of range [" + std::to_string(lo) + ", " +
               std::to_string(hi) + "]");
      return fallback;
    }
    return static_cast<T>(d);
  }

  std::string text(const json& obj, const std::string& path, const std::string& key,
                   const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_string()) {
      fail(path + "." + key, "expected a string");
      return fallback;
    }
    return obj.at(key).get<std::string>();
  }

  bool flag(const json& obj, const std::string& path, const std::string& key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_boolean()) {
      fail(path + "." + key, "expected a boolean");
      return fallback;
    }
    return obj.at(key).get<bool>();
  }
};

BallTaskConfig parse_ball(Validator& v, const json& obj, const std::string& path) {
  BallTaskConfig ball;
  if (!v.want_object(obj, path)) return ball;
  v.check_keys(obj, path, {"num_balls", "frames", "restitution"});
  ball.num_balls = v.number<int>(obj, path, "num_balls", ball.num_balls, 1, 6);
  ball.frames = v.number<int>(obj, path, "frames", ball.frames, 2, 64);
  ball.restitution = v.number<double>(obj, path, "restitution", ball.restitution, 0.1, 1.0);
  return ball;
}

ExperimentTaskConfig parse_task(Validator& v, const json& obj, const std::string& path) {
  ExperimentTaskConfig t;
  if (!v.want_object(obj, path)) return t;
  v.check_keys(obj, path,
               {"name", "family", "train_episodes", "val_episodes", "batch_size", "lr",
                "weight_decay", "entry_epoch", "ball"});
  const std::string family = v.text(obj, path, "family", "");
  if (family.empty()) {
    v.fail(path + ".family", "required");
  } else {
    try {
      t.spec.family = family_from_name(family);
    } catch (const config_error& e) {
      v.fail(path + ".family", e.what());
    }
  }
  t.spec.name = v.text(obj, path, "name", family);
  t.train_episodes = v.number<int>(obj, path, "train_episodes", 1000, 1, 10000000);
  t.val_episodes = v.number<int>(obj, path, "val_episodes", 300, 1, 10000000);
  t.spec.schedule.batch_size = v.number<int>(obj, path, "batch_size", 16, 1, 8192);
  t.spec.schedule.lr = v.number<double>(obj, path, "lr", 3e-4, 1e-12, 10.0);
  t.spec.schedule.weight_decay = v.number<double>(obj, path, "weight_decay", 1e-7, 0.0, 1.0);
  t.spec.schedule.entry_epoch = v.number<int>(obj, path, "entry_epoch", 0, 0, 100000);
  if (obj.contains("ball")) t.spec.ball = parse_ball(v, obj.at("ball"), path + ".ball");
  return t;
}

RunConfig parse_json(const json& root) {
  Validator v;
  RunConfig cfg;
  if (!root.is_object()) throw config_error("config root must be a JSON object");
  v.check_keys(root, "$",
               {"seed", "seeds", "out_dir", "threads", "log_level", "model", "train", "tasks",
                "probe", "transfer", "consistency", "generate", "checkpoint", "report"});

  cfg.seed = v.number<std::uint64_t>(root, "$", "seed", 1, 0, 9.007199254740992e15);
  cfg.out_dir = v.text(root, "$", "out_dir", "out");
  cfg.threads = v.number<int>(root, "$", "threads", 1, 1, 1024);
  cfg.log_level = v.text(root, "$", "log_level", "info");
  if (cfg.log_level != "debug" && cfg.log_level != "info" && cfg.log_level != "warn" &&
      cfg.log_level != "error") {
    v.fail("$.log_level", "must be one of debug|info|warn|error");
  }

  Manifest& m = cfg.manifest;
  m.threads = cfg.threads;
  m.seeds = {cfg.seed};
  if (root.contains("seeds")) {
    const json& seeds = root.at("seeds");
    if (!seeds.is_array() || seeds.empty()) {
      v.fail("$.seeds", "expected a non-empty array of integers");
    } else {
      m.seeds.clear();
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!seeds[i].is_number()) {
          v.fail("$.seeds[" + std::to_string(i) + "]", "expected a number");
        } else {
          m.seeds.push_back(seeds[i].get<std::uint64_t>());
        }
      }
    }
  }

  if (root.contains("model")) {
    const json& model = root.at("model");
    if (v.want_object(model, "$.model")) {
      v.check_keys(model, "$.model", {"encoder", "reasoner"});
      if (model.contains("encoder")) {
        const json& enc = model.at("encoder");
        if (v.want_object(enc, "$.model.encoder")) {
          v.check_keys(enc, "$.model.encoder", {"depth_blocks"});
          m.base.encoder.depth_blocks =
              v.number<int>(enc, "$.model.encoder", "depth_blocks", 0, 0, 12);
        }
      }
      if (model.contains("reasoner")) {
        const json& rsn = model.at("reasoner");
        if (v.want_object(rsn, "$.model.reasoner")) {
          v.check_keys(rsn, "$.model.reasoner", {"arch", "hidden_dim", "layers", "param_budget"});
          const std::string arch = v.text(rsn, "$.model.reasoner", "arch", "mlp");
          try {
            m.base.reasoner.arch = reasoner_arch_from_name(arch);
          } catch (const config_error& e) {
            v.fail("$.model.reasoner.arch", e.what());
          }
          m.base.reasoner.hidden_dim =
              v.number<int>(rsn, "$.model.reasoner", "hidden_dim", 512, 1, 65536);
          m.base.reasoner.layers = v.number<int>(rsn, "$.model.reasoner", "layers", 3, 1, 64);
          m.base.reasoner.param_budget = v.number<std::int64_t>(
              rsn, "$.model.reasoner", "param_budget", 100000000, 1, 1e12);
        }
      }
    }
  }

  if (root.contains("train")) {
    const json& train = root.at("train");
    if (v.want_object(train, "$.train")) {
      v.check_keys(train, "$.train",
                   {"mode", "epochs", "lr_shared", "wd_shared", "balance_shared_params",
                    "stop_at_accuracy"});
      const std::string mode = v.text(train, "$.train", "mode", "both_separated");
      try {
        m.base.mode = sharing_mode_from_name(mode);
      } catch (const config_error& e) {
        v.fail("$.train.mode", e.what());
      }
      cfg.train_epochs = v.number<int>(train, "$.train", "epochs", 10, 0, 100000);
      m.base.lr_shared = v.number<double>(train, "$.train", "lr_shared", 5e-5, 1e-12, 10.0);
      m.base.wd_shared = v.number<double>(train, "$.train", "wd_shared", 1e-7, 0.0, 1.0);
      m.base.balance_shared_params =
          v.flag(train, "$.train", "balance_shared_params", true);
      if (train.contains("stop_at_accuracy")) {
        m.base.stop_at_accuracy =
            v.number<double>(train, "$.train", "stop_at_accuracy", 100.0, 0.0, 100.0);
      }
    }
  }
  m.base.epochs = cfg.train_epochs;

  if (root.contains("tasks")) {
    const json& tasks = root.at("tasks");
    if (!tasks.is_array()) {
      v.fail("$.tasks", "expected an array");
    } else {
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        m.tasks.push_back(parse_task(v, tasks[i], "$.tasks[" + std::to_string(i) + "]"));
      }
    }
  }

  if (root.contains("probe")) {
    const json& probe = root.at("probe");
    if (v.want_object(probe, "$.probe")) {
      v.check_keys(probe, "$.probe",
                   {"rho", "base_epochs", "probe_epochs", "train_episodes", "val_episodes"});
      m.rho = v.number<double>(probe, "$.probe", "rho", 0.02, 1e-6, 0.5);
      m.base_epochs = v.number<int>(probe, "$.probe", "base_epochs", 5, 1, 1000);
      m.probe_epochs = v.number<int>(probe, "$.probe", "probe_epochs", 10, 1, 1000);
      m.probe_train_episodes = v.number<int>(probe, "$.probe", "train_episodes", 800, 1, 1000000);
      m.probe_val_episodes = v.number<int>(probe, "$.probe", "val_episodes", 300, 1, 1000000);
    }
  }

  if (root.contains("transfer")) {
    const json& tr = root.at("transfer");
    if (v.want_object(tr, "$.transfer")) {
      v.check_keys(tr, "$.transfer",
                   {"tracks", "target", "joint_epochs", "finetune_epochs",
                    "finetune_train_episodes", "finetune_lr", "finetune_weight_decay"});
      if (tr.contains("tracks")) {
        const json& tracks = tr.at("tracks");
        if (!tracks.is_array() || tracks.empty()) {
          v.fail("$.transfer.tracks", "expected a non-empty array of integers");
        } else {
          m.tracks.clear();
          for (std::size_t i = 0; i < tracks.size(); ++i) {
            if (!tracks[i].is_number()) {
              v.fail("$.transfer.tracks[" + std::to_string(i) + "]", "expected a number");
            } else {
              m.tracks.push_back(tracks[i].get<int>());
            }
          }
        }
      }
      if (tr.contains("target")) {
        m.target = parse_task(v, tr.at("target"), "$.transfer.target");
      }
      m.joint_epochs = v.number<int>(tr, "$.transfer", "joint_epochs", 6, 1, 1000);
      m.finetune_epochs = v.number<int>(tr, "$.transfer", "finetune_epochs", 8, 1, 1000);
      m.finetune_train_episodes =
          v.number<int>(tr, "$.transfer", "finetune_train_episodes", 1200, 1, 1000000);
      m.finetune_lr = v.number<double>(tr, "$.transfer", "finetune_lr", 5e-5, 1e-12, 10.0);
      m.finetune_wd =
          v.number<double>(tr, "$.transfer", "finetune_weight_decay", 1e-7, 0.0, 1.0);
    }
  }

  if (root.contains("consistency")) {
    const json& c = root.at("consistency");
    if (v.want_object(c, "$.consistency")) {
      v.check_keys(c, "$.consistency", {"epochs"});
      m.consistency_epochs = v.number<int>(c, "$.consistency", "epochs", 8, 1, 1000);
    }
  }

  if (root.contains("generate")) {
    const json& g = root.at("generate");
    if (v.want_object(g, "$.generate")) {
      v.check_keys(g, "$.generate", {"family", "count", "split", "out_file", "ball"});
      const std::string family = v.text(g, "$.generate", "family", "same_different");
      try {
        cfg.generate.family = family_from_name(family);
      } catch (const config_error& e) {
        v.fail("$.generate.family", e.what());
      }
      cfg.generate.count = v.number<int>(g, "$.generate", "count", 1000, 1, 10000000);
      cfg.generate.split = v.text(g, "$.generate", "split", "train");
      if (cfg.generate.split != "train" && cfg.generate.split != "val" &&
          cfg.generate.split != "test") {
        v.fail("$.generate.split", "must be one of train|val|test");
      }
      cfg.generate.out_file = v.text(g, "$.generate", "out_file", "episodes.tsre");
      if (g.contains("ball")) {
        cfg.generate.ball = parse_ball(v, g.at("ball"), "$.generate.ball");
      }
    }
  }

  if (root.contains("checkpoint")) {
    const json& c = root.at("checkpoint");
    if (v.want_object(c, "$.checkpoint")) {
      v.check_keys(c, "$.checkpoint", {"save_path", "resume_from"});
      cfg.checkpoint.save_path = v.text(c, "$.checkpoint", "save_path", "");
      cfg.checkpoint.resume_from = v.text(c, "$.checkpoint", "resume_from", "");
    }
  }

  if (root.contains("report")) {
    const json& r = root.at("report");
    if (v.want_object(r, "$.report")) {
      v.check_keys(r, "$.report", {"results"});
      cfg.report_results = v.text(r, "$.report", "results", "");
    }
  }

  if (!v.errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : v.errors) msg += "\n  " + e;
    throw config_error(msg);
  }

  cfg.manifest.base.seed = cfg.seed;
  cfg.canonical_json = root.dump();
  cfg.digest = fnv1a64(cfg.canonical_json);
  return cfg;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_json(root);
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

}  // namespace tsr
