#include "tsr/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"
#include "tsr/errors.hpp"

namespace tsr {

namespace {

using nlohmann::json;

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot write " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw io_error("write failed: " + path);
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  r.n = static_cast<int>(xs.size());
  if (xs.empty()) return r;
  double s = 0.0;
  for (const double x : xs) s += x;
  r.mean = s / static_cast<double>(xs.size());
  double q = 0.0;
  for (const double x : xs) q += (x - r.mean) * (x - r.mean);
  r.stddev = xs.size() > 1 ? std::sqrt(q / static_cast<double>(xs.size() - 1)) : 0.0;
  return r;
}

json cell(const MeanStd& m) {
  return json{{"mean", fmt4(m.mean)}, {"std", fmt4(m.stddev)}, {"n", m.n}};
}

}  // namespace

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw io_error("cannot create directory " + path + ": " + ec.message());
}

void write_results_json(const std::string& path, const ResultsBundle& b) {
  json j;
  j["kind"] = b.kind;
  j["task_names"] = b.task_names;
  json abl = json::array();
  for (const auto& r : b.ablation) {
    abl.push_back({{"mode", r.mode}, {"task", r.task}, {"seed", r.seed}, {"accuracy", r.accuracy}});
  }
  j["ablation"] = abl;
  json probe = json::array();
  for (const auto& r : b.probe.rows) {
    probe.push_back(
        {{"task", r.task}, {"depth", r.depth}, {"accuracy", r.accuracy}, {"inflection", r.inflection}});
  }
  j["probe_rows"] = probe;
  j["probe_inflection"] = b.probe.inflection_depth;
  j["probe_argmax"] = b.probe.argmax_depth;
  json tr = json::array();
  for (const auto& r : b.transfer) {
    tr.push_back(
        {{"subset_mask", r.subset_mask}, {"track", r.track}, {"seed", r.seed}, {"metric", r.metric}});
  }
  j["transfer"] = tr;
  json cons = json::array();
  for (const auto& r : b.consistency) {
    cons.push_back({{"task", r.task},
                    {"acc_choose", r.acc_choose},
                    {"acc_verify", r.acc_verify},
                    {"f1", r.f1}});
  }
  j["consistency"] = cons;
  json br = json::array();
  for (const auto& r : b.breakdown) {
    br.push_back({{"task", r.task},
                  {"attribute", r.attribute},
                  {"accuracy", r.accuracy},
                  {"episodes", r.episodes}});
  }
  j["breakdown"] = br;
  j["train_epoch"] = b.train_state.epoch;
  json hist = json::array();
  for (const auto& task_hist : b.train_state.history) {
    json th = json::array();
    for (const auto& m : task_hist) {
      th.push_back({{"train_loss", m.train_loss}, {"val_metric", m.val_metric}});
    }
    hist.push_back(th);
  }
  j["train_history"] = hist;
  write_file(path, j.dump(2) + "\n");
}

ResultsBundle read_results_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open results file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw io_error(std::string("results file is not valid JSON: ") + e.what());
  }
  ResultsBundle b;
  b.kind = j.value("kind", "");
  b.task_names = j.value("task_names", std::vector<std::string>{});
  for (const auto& r : j.value("ablation", json::array())) {
    b.ablation.push_back({r.at("mode"), r.at("task"), r.at("seed"), r.at("accuracy")});
  }
  for (const auto& r : j.value("probe_rows", json::array())) {
    b.probe.rows.push_back({r.at("task"), r.at("depth"), r.at("accuracy"), r.at("inflection")});
  }
  if (j.contains("probe_inflection")) {
    for (const auto& [k, v] : j.at("probe_inflection").items()) {
      b.probe.inflection_depth[k] = v.get<int>();
    }
  }
  if (j.contains("probe_argmax")) {
    for (const auto& [k, v] : j.at("probe_argmax").items()) b.probe.argmax_depth[k] = v.get<int>();
  }
  for (const auto& r : j.value("transfer", json::array())) {
    b.transfer.push_back({r.at("subset_mask"), r.at("track"), r.at("seed"), r.at("metric")});
  }
  for (const auto& r : j.value("consistency", json::array())) {
    b.consistency.push_back({r.at("task"), r.at("acc_choose"), r.at("acc_verify"), r.at("f1")});
  }
  for (const auto& r : j.value("breakdown", json::array())) {
    b.breakdown.push_back({r.at("task"), r.at("attribute"), r.at("accuracy"), r.at("episodes")});
  }
  b.train_state.epoch = j.value("train_epoch", 0);
  for (const auto& th : j.value("train_history", json::array())) {
    std::vector<EpochMetrics> hist;
    for (const auto& m : th) hist.push_back({m.at("train_loss"), m.at("val_metric")});
    b.train_state.history.push_back(std::move(hist));
  }
  return b;
}

void emit_report(const ResultsBundle& b, const std::string& out_dir) {
  ensure_directory(out_dir);
  json summary;
  summary["kind"] = b.kind;

  if (b.kind == "sharing_ablation") {
    std::string csv = "mode,task,seed,accuracy\n";
    std::vector<AblationRow> rows = b.ablation;
    std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& r) {
      if (a.mode != r.mode) return a.mode < r.mode;
      if (a.task != r.task) return a.task < r.task;
      return a.seed < r.seed;
    });
    std::map<std::string, std::vector<double>> cells;
    for (const auto& r : rows) {
      csv += r.mode + "," + r.task + "," + std::to_string(r.seed) + "," + fmt4(r.accuracy) + "\n";
      cells[r.mode + "/" + r.task].push_back(r.accuracy);
      cells[r.mode + "/mean"].push_back(r.accuracy);
    }
    write_file(out_dir + "/sharing_ablation.csv", csv);
    for (const auto& [key, xs] : cells) summary["cells"][key] = cell(mean_std(xs));
  } else if (b.kind == "depth_probe") {
    std::string csv = "task,depth,accuracy,inflection_flag\n";
    std::vector<DepthProbeRow> rows = b.probe.rows;
    std::stable_sort(rows.begin(), rows.end(), [](const DepthProbeRow& a, const DepthProbeRow& r) {
      if (a.task != r.task) return a.task < r.task;
      return a.depth < r.depth;
    });
    for (const auto& r : rows) {
      csv += r.task + "," + std::to_string(r.depth) + "," + fmt4(r.accuracy) + "," +
             (r.inflection ? "1" : "0") + "\n";
    }
    write_file(out_dir + "/depth_probe.csv", csv);
    summary["inflection_depth"] = b.probe.inflection_depth;
    summary["argmax_depth"] = b.probe.argmax_depth;
  } else if (b.kind == "transfer") {
    std::string csv = "subset_bitmask,track,seed,metric\n";
    std::vector<TransferRow> rows = b.transfer;
    std::stable_sort(rows.begin(), rows.end(), [](const TransferRow& a, const TransferRow& r) {
      if (a.track != r.track) return a.track < r.track;
      if (a.subset_mask != r.subset_mask) return a.subset_mask < r.subset_mask;
      return a.seed < r.seed;
    });
    std::map<std::string, std::vector<double>> cells;
    for (const auto& r : rows) {
      csv += std::to_string(r.subset_mask) + "," + std::to_string(r.track) + "," +
             std::to_string(r.seed) + "," + fmt4(r.metric) + "\n";
      const int n = __builtin_popcount(static_cast<unsigned>(r.subset_mask));
      cells["track" + std::to_string(r.track) + "/n" + std::to_string(n)].push_back(r.metric);
    }
    write_file(out_dir + "/transfer.csv", csv);
    for (const auto& [key, xs] : cells) summary["cells"][key] = cell(mean_std(xs));
  } else if (b.kind == "consistency") {
    std::string csv = "task,acc_choose,acc_verify,f1\n";
    std::vector<ConsistencyRow> rows = b.consistency;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ConsistencyRow& a, const ConsistencyRow& r) { return a.task < r.task; });
    for (const auto& r : rows) {
      csv += r.task + "," + fmt4(r.acc_choose) + "," + fmt4(r.acc_verify) + "," + fmt4(r.f1) + "\n";
    }
    write_file(out_dir + "/consistency.csv", csv);
    std::string bcsv = "task,attribute,accuracy\n";
    std::vector<BreakdownRow> brows = b.breakdown;
    std::stable_sort(brows.begin(), brows.end(), [](const BreakdownRow& a, const BreakdownRow& r) {
      if (a.task != r.task) return a.task < r.task;
      return a.attribute < r.attribute;
    });
    for (const auto& r : brows) {
      bcsv += r.task + "," + r.attribute + "," + fmt4(r.accuracy) + "\n";
    }
    write_file(out_dir + "/breakdown.csv", bcsv);
    for (const auto& r : rows) {
      summary["cells"][r.task] = {{"acc_choose", fmt4(r.acc_choose)},
                                  {"acc_verify", fmt4(r.acc_verify)},
                                  {"f1", fmt4(r.f1)}};
    }
  } else if (b.kind == "train") {
    std::string csv = "task,epoch,train_loss,val_metric\n";
    for (std::size_t t = 0; t < b.train_state.history.size(); ++t) {
      const std::string name =
          t < b.task_names.size() ? b.task_names[t] : "task" + std::to_string(t);
      for (std::size_t e = 0; e < b.train_state.history[t].size(); ++e) {
        csv += name + "," + std::to_string(e) + "," +
               fmt4(b.train_state.history[t][e].train_loss) + "," +
               fmt4(b.train_state.history[t][e].val_metric) + "\n";
      }
    }
    write_file(out_dir + "/train.csv", csv);
    for (std::size_t t = 0; t < b.train_state.history.size(); ++t) {
      const std::string name =
          t < b.task_names.size() ? b.task_names[t] : "task" + std::to_string(t);
      if (!b.train_state.history[t].empty()) {
        summary["final"][name] = fmt4(b.train_state.history[t].back().val_metric);
      }
    }
  } else {
    throw config_error("emit_report: unknown results kind '" + b.kind + "'");
  }

  write_file(out_dir + "/summary.json", summary.dump(2) + "\n");
}

void write_failure_record(const std::string& out_dir, int code, const std::string& message) {
  try {
    ensure_directory(out_dir);
    json j{{"exit_code", code}, {"error", message}};
    write_file(out_dir + "/failure.json", j.dump(2) + "\n");
  } catch (...) {
    // A failure record must never mask the original failure.
  }
}

}  // namespace tsr
