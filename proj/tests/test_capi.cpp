// Exercises the shared-library C surface end to end: config lifecycle,
// overrides, batch generation, a tiny train run, and the failure record.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "doctest.h"
#include "tsr/tsr.h"

namespace {

void spit(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

bool exists(const std::string& path) {
  std::ifstream f(path);
  return static_cast<bool>(f);
}

}  // namespace

TEST_CASE("version string is stable") {
  REQUIRE(tsr_version() != nullptr);
  CHECK(std::strlen(tsr_version()) > 0);
}

TEST_CASE("config open rejects a missing file with code 2 and a message") {
  tsr_config_t* cfg = nullptr;
  char* err = nullptr;
  const int rc = tsr_config_open("/tmp/definitely_missing_tsr.json", &cfg, &err);
  CHECK(rc == 2);
  CHECK(cfg == nullptr);
  REQUIRE(err != nullptr);
  CHECK(std::strlen(err) > 0);
  tsr_free(err);
}

TEST_CASE("config open surfaces validation errors") {
  spit("/tmp/tsr_capi_bad.json", R"({"model": {"encoder": {"depth_blocks": 40}}})");
  tsr_config_t* cfg = nullptr;
  char* err = nullptr;
  const int rc = tsr_config_open("/tmp/tsr_capi_bad.json", &cfg, &err);
  CHECK(rc == 2);
  REQUIRE(err != nullptr);
  CHECK(std::string(err).find("depth_blocks") != std::string::npos);
  tsr_free(err);
}

TEST_CASE("generate batch writes a readable TSRE file") {
  char* err = nullptr;
  const int rc =
      tsr_generate_batch("same_different", 5, 20, "train", "/tmp/tsr_capi_batch.tsre", &err);
  REQUIRE(rc == 0);
  const std::string bytes = slurp("/tmp/tsr_capi_batch.tsre");
  CHECK(bytes.substr(0, 4) == "TSRE");

  // Same seed, same bytes.
  REQUIRE(tsr_generate_batch("same_different", 5, 20, "train", "/tmp/tsr_capi_batch2.tsre",
                             nullptr) == 0);
  CHECK(slurp("/tmp/tsr_capi_batch2.tsre") == bytes);

  CHECK(tsr_generate_batch("no_such_family", 5, 20, "train", "/tmp/x.tsre", &err) == 2);
  tsr_free(err);
}

TEST_CASE("a tiny train run completes through the C API") {
  spit("/tmp/tsr_capi_train.json", R"({
    "seed": 11,
    "out_dir": "/tmp/tsr_capi_train_out",
    "train": {"mode": "both_separated", "epochs": 1},
    "tasks": [{"family": "same_different", "train_episodes": 24, "val_episodes": 8,
               "batch_size": 8, "lr": 0.003}]
  })");
  tsr_config_t* cfg = nullptr;
  char* err = nullptr;
  REQUIRE(tsr_config_open("/tmp/tsr_capi_train.json", &cfg, &err) == 0);
  REQUIRE(tsr_config_set_threads(cfg, 1) == 0);
  const int rc = tsr_run(cfg, "train", &err);
  if (err) {
    CAPTURE(err);
  }
  REQUIRE(rc == 0);
  CHECK(exists("/tmp/tsr_capi_train_out/results.json"));
  CHECK(exists("/tmp/tsr_capi_train_out/train.csv"));
  CHECK(exists("/tmp/tsr_capi_train_out/summary.json"));

  // Regenerating the report from results.json is byte-identical.
  const std::string before = slurp("/tmp/tsr_capi_train_out/train.csv");
  REQUIRE(tsr_run(cfg, "report", &err) == 0);
  CHECK(slurp("/tmp/tsr_capi_train_out/train.csv") == before);
  tsr_config_destroy(cfg);
}

TEST_CASE("failed runs leave a machine-readable failure record") {
  spit("/tmp/tsr_capi_fail.json", R"({
    "seed": 11,
    "out_dir": "/tmp/tsr_capi_fail_out",
    "tasks": []
  })");
  tsr_config_t* cfg = nullptr;
  char* err = nullptr;
  REQUIRE(tsr_config_open("/tmp/tsr_capi_fail.json", &cfg, &err) == 0);
  const int rc = tsr_run(cfg, "train", &err);
  CHECK(rc == 2);
  REQUIRE(err != nullptr);
  tsr_free(err);
  const std::string record = slurp("/tmp/tsr_capi_fail_out/failure.json");
  CHECK(record.find("\"exit_code\": 2") != std::string::npos);
  tsr_config_destroy(cfg);

  // Unknown command also fails with a config error.
  REQUIRE(tsr_config_open("/tmp/tsr_capi_fail.json", &cfg, &err) == 0);
  CHECK(tsr_run(cfg, "florp", &err) == 2);
  tsr_free(err);
  tsr_config_destroy(cfg);
}

TEST_CASE("seed and out-dir overrides take effect") {
  spit("/tmp/tsr_capi_gen.json", R"({
    "seed": 1,
    "out_dir": "/tmp/unused",
    "generate": {"family": "odd_one_out", "count": 10, "split": "val",
                 "out_file": "batch.tsre"}
  })");
  tsr_config_t* cfg = nullptr;
  char* err = nullptr;
  REQUIRE(tsr_config_open("/tmp/tsr_capi_gen.json", &cfg, &err) == 0);
  REQUIRE(tsr_config_set_out_dir(cfg, "/tmp/tsr_capi_gen_out") == 0);
  REQUIRE(tsr_config_set_seed(cfg, 99) == 0);
  REQUIRE(tsr_run(cfg, "generate", &err) == 0);
  CHECK(exists("/tmp/tsr_capi_gen_out/batch.tsre"));
  tsr_config_destroy(cfg);
}
