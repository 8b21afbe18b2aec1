// Command-line front end; everything flows through the C API in tsr/tsr.h.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tsr/tsr.h"

namespace {

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int threads = 0;
};

int run_subcommand(const std::string& command, const Options& opt) {
  tsr_config_t* cfg = nullptr;
  char* err = nullptr;
  int rc = tsr_config_open(opt.config_path.c_str(), &cfg, &err);
  if (rc != 0) {
    std::fprintf(stderr, "error: %s\n", err ? err : "failed to load config");
    tsr_free(err);
    return rc;
  }
  if (opt.seed_set) tsr_config_set_seed(cfg, opt.seed);
  if (!opt.out_dir.empty()) tsr_config_set_out_dir(cfg, opt.out_dir.c_str());
  if (opt.threads > 0) tsr_config_set_threads(cfg, opt.threads);

  rc = tsr_run(cfg, command.c_str(), &err);
  if (rc != 0) {
    std::fprintf(stderr, "error: %s\n", err ? err : "command failed");
    tsr_free(err);
  }
  tsr_config_destroy(cfg);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage visual reasoning harness"};
  app.set_version_flag("--version", std::string(tsr_version()));
  app.require_subcommand(1);

  Options opt;
  const std::vector<std::string> commands = {"generate",    "train",    "ablate-sharing",
                                             "probe-depth", "transfer", "consistency",
                                             "report"};
  std::string chosen;
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "path to the JSON run configuration")
        ->required();
    sub->add_option("--seed", opt.seed, "override the root seed")
        ->each([&opt](const std::string&) { opt.seed_set = true; });
    sub->add_option("--out", opt.out_dir, "override the output directory");
    sub->add_option("--threads", opt.threads, "override the cross-job thread count");
    sub->callback([&chosen, name] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return run_subcommand(chosen, opt);
}
