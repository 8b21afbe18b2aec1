#ifndef TSR_REPORT_HPP
#define TSR_REPORT_HPP

#include <string>
#include <vector>

#include "tsr/experiments.hpp"

namespace tsr {

// Everything one experiment run produced, serializable to results.json so
// reports can be regenerated byte-identically later.
struct ResultsBundle {
  std::string kind;  // train | sharing_ablation | depth_probe | transfer | consistency
  std::vector<std::string> task_names;
  std::vector<AblationRow> ablation;
  DepthProbeResult probe;
  std::vector<TransferRow> transfer;
  std::vector<ConsistencyRow> consistency;
  std::vector<BreakdownRow> breakdown;
  TrainState train_state;
};

void write_results_json(const std::string& path, const ResultsBundle& bundle);
ResultsBundle read_results_json(const std::string& path);

// Emits the experiment's CSV (fixed schema, 4 decimal places) and a JSON
// summary with per-cell mean and standard deviation. Regeneration from the
// same bundle is byte-identical.
void emit_report(const ResultsBundle& bundle, const std::string& out_dir);

// Machine-readable failure record accompanying a non-zero exit.
void write_failure_record(const std::string& out_dir, int code, const std::string& message);

void ensure_directory(const std::string& path);

}  // namespace tsr

#endif
