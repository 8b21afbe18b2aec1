#include "tsr/runner.hpp"

#include "tsr/checkpoint.hpp"
#include "tsr/rng.hpp"
#include "tsr/episode_io.hpp"
#include "tsr/report.hpp"

namespace tsr {

namespace {

void run_generate(const RunConfig& cfg) {
  ensure_directory(cfg.out_dir);
  const GenerateConfig& g = cfg.generate;
  TaskSpec spec;
  spec.name = family_name(g.family);
  spec.family = g.family;
  spec.ball = g.ball;
  const std::uint64_t stream = seed_split(cfg.seed, "data/" + spec.name);
  std::vector<Episode> episodes;
  episodes.reserve(static_cast<std::size_t>(g.count));
  for (const std::uint64_t s : split_seeds(stream, g.family, g.split, g.count)) {
    episodes.push_back(generate_episode(g.family, s, g.ball));
  }
  write_episode_batch(cfg.out_dir + "/" + g.out_file, g.family, episodes);
}

void run_train(const RunConfig& cfg) {
  const Manifest& m = cfg.manifest;
  if (m.tasks.empty()) throw config_error("train: the config lists no tasks");
  ensure_directory(cfg.out_dir);

  TrainOptions opt = m.base;
  opt.epochs = cfg.train_epochs;
  std::vector<TaskSpec> specs;
  std::vector<TaskData> data;
  for (const auto& t : m.tasks) {
    specs.push_back(t.spec);
    data.push_back(make_task_data(t.spec, t.train_episodes, t.val_episodes, opt.seed));
  }
  TwoStageSystem sys = build_system(specs, opt);

  TrainResult result;
  if (!cfg.checkpoint.resume_from.empty()) {
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint.resume_from);
    if (ckpt.config_digest != cfg.digest) {
      throw config_error("checkpoint was produced by a different configuration");
    }
    restore_system(ckpt, &sys, &result);
    result = train_multitask(sys, data, opt, &result.state, &result.task_optimizers,
                             &result.shared_optimizer);
  } else {
    result = train_multitask(sys, data, opt);
  }

  if (!cfg.checkpoint.save_path.empty()) {
    save_checkpoint(cfg.checkpoint.save_path,
                    snapshot_system(sys, result, cfg.digest, cfg.canonical_json));
  }

  ResultsBundle bundle;
  bundle.kind = "train";
  for (const auto& s : specs) bundle.task_names.push_back(s.name);
  bundle.train_state = result.state;
  write_results_json(cfg.out_dir + "/results.json", bundle);
  emit_report(bundle, cfg.out_dir);
}

void run_ablation(const RunConfig& cfg) {
  ensure_directory(cfg.out_dir);
  ResultsBundle bundle;
  bundle.kind = "sharing_ablation";
  for (const auto& t : cfg.manifest.tasks) bundle.task_names.push_back(t.spec.name);
  bundle.ablation = run_sharing_ablation(cfg.manifest);
  write_results_json(cfg.out_dir + "/results.json", bundle);
  emit_report(bundle, cfg.out_dir);
}

void run_probe(const RunConfig& cfg) {
  ensure_directory(cfg.out_dir);
  ResultsBundle bundle;
  bundle.kind = "depth_probe";
  for (const auto& t : cfg.manifest.tasks) bundle.task_names.push_back(t.spec.name);
  bundle.probe = run_depth_probe(cfg.manifest);
  write_results_json(cfg.out_dir + "/results.json", bundle);
  emit_report(bundle, cfg.out_dir);
}

void run_transfer(const RunConfig& cfg) {
  ensure_directory(cfg.out_dir);
  ResultsBundle bundle;
  bundle.kind = "transfer";
  for (const auto& t : cfg.manifest.tasks) bundle.task_names.push_back(t.spec.name);
  bundle.transfer = run_approximation_study(cfg.manifest);
  write_results_json(cfg.out_dir + "/results.json", bundle);
  emit_report(bundle, cfg.out_dir);
}

void run_consistency_cmd(const RunConfig& cfg) {
  ensure_directory(cfg.out_dir);
  ResultsBundle bundle;
  bundle.kind = "consistency";
  for (const auto& t : cfg.manifest.tasks) bundle.task_names.push_back(t.spec.name);
  bundle.consistency = run_consistency(cfg.manifest, &bundle.breakdown);
  write_results_json(cfg.out_dir + "/results.json", bundle);
  emit_report(bundle, cfg.out_dir);
}

void run_report(const RunConfig& cfg) {
  const std::string source =
      cfg.report_results.empty() ? cfg.out_dir + "/results.json" : cfg.report_results;
  const ResultsBundle bundle = read_results_json(source);
  emit_report(bundle, cfg.out_dir);
}

}  // namespace

void run_command(const std::string& command, const RunConfig& cfg) {
  if (command == "generate") {
    run_generate(cfg);
  } else if (command == "train") {
    run_train(cfg);
  } else if (command == "ablate-sharing") {
    run_ablation(cfg);
  } else if (command == "probe-depth") {
    run_probe(cfg);
  } else if (command == "transfer") {
    run_transfer(cfg);
  } else if (command == "consistency") {
    run_consistency_cmd(cfg);
  } else if (command == "report") {
    run_report(cfg);
  } else {
    throw config_error("unknown command: " + command);
  }
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const config_error&) {
    return 2;
  } catch (const data_error&) {
    return 3;
  } catch (const generation_error&) {
    return 3;
  } catch (const label_error&) {
    return 3;
  } catch (const unsupported_task_error&) {
    return 3;
  } catch (const numeric_error&) {
    return 4;
  } catch (const std::exception&) {
    return 1;
  } catch (...) {
    return 1;
  }
}

}  // namespace tsr
