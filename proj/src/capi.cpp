#include "tsr/tsr.h"

#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>

#include "tsr/episode_io.hpp"
#include "tsr/rng.hpp"
#include "tsr/report.hpp"
#include "tsr/runner.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

struct OwnedConfig {
  tsr::RunConfig cfg;
};

void set_error(char** errptr, const std::string& message) {
  if (!errptr) return;
  char* buf = static_cast<char*>(std::malloc(message.size() + 1));
  if (!buf) return;
  std::memcpy(buf, message.c_str(), message.size() + 1);
  *errptr = buf;
}

int guard(char** errptr, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    set_error(errptr, e.what());
    return tsr::exit_code_for_current_exception();
  } catch (...) {
    set_error(errptr, "unknown error");
    return 1;
  }
}

}  // namespace

extern "C" {

struct tsr_config_t {
  OwnedConfig owned;
};

const char* tsr_version(void) { return kVersion; }

int tsr_config_open(const char* path, tsr_config_t** out, char** errptr) {
  if (!path || !out) {
    set_error(errptr, "tsr_config_open: path and out must be non-NULL");
    return 2;
  }
  *out = nullptr;
  return guard(errptr, [&] {
    auto* handle = new tsr_config_t{};
    try {
      handle->owned.cfg = tsr::parse_config(path);
    } catch (...) {
      delete handle;
      throw;
    }
    *out = handle;
  });
}

int tsr_config_set_seed(tsr_config_t* cfg, uint64_t seed) {
  if (!cfg) return 2;
  cfg->owned.cfg.seed = seed;
  cfg->owned.cfg.manifest.base.seed = seed;
  cfg->owned.cfg.manifest.seeds = {seed};
  return 0;
}

int tsr_config_set_out_dir(tsr_config_t* cfg, const char* dir) {
  if (!cfg || !dir) return 2;
  cfg->owned.cfg.out_dir = dir;
  return 0;
}

int tsr_config_set_threads(tsr_config_t* cfg, int threads) {
  if (!cfg || threads < 1) return 2;
  cfg->owned.cfg.threads = threads;
  cfg->owned.cfg.manifest.threads = threads;
  return 0;
}

void tsr_config_destroy(tsr_config_t* cfg) { delete cfg; }

int tsr_run(const tsr_config_t* cfg, const char* command, char** errptr) {
  if (!cfg || !command) {
    set_error(errptr, "tsr_run: cfg and command must be non-NULL");
    return 2;
  }
  const int rc = guard(errptr, [&] { tsr::run_command(command, cfg->owned.cfg); });
  if (rc != 0) {
    std::string message = "unknown error";
    if (errptr && *errptr) message = *errptr;
    tsr::write_failure_record(cfg->owned.cfg.out_dir, rc, message);
  }
  return rc;
}

int tsr_generate_batch(const char* family, uint64_t seed, int count, const char* split,
                       const char* out_path, char** errptr) {
  if (!family || !split || !out_path) {
    set_error(errptr, "tsr_generate_batch: family, split and out_path must be non-NULL");
    return 2;
  }
  return guard(errptr, [&] {
    const tsr::TaskFamily fam = tsr::family_from_name(family);
    const std::uint64_t stream = tsr::seed_split(seed, std::string("data/") + family);
    std::vector<tsr::Episode> episodes;
    episodes.reserve(static_cast<std::size_t>(count));
    for (const std::uint64_t s : tsr::split_seeds(stream, fam, split, count)) {
      episodes.push_back(tsr::generate_episode(fam, s));
    }
    tsr::write_episode_batch(out_path, fam, episodes);
  });
}

void tsr_free(void* p) { std::free(p); }

}  // extern "C"
