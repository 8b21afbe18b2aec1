#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "tsr/checkpoint.hpp"
#include "tsr/config.hpp"
#include "tsr/report.hpp"

using namespace tsr;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace

TEST_CASE("minimal config fills documented defaults") {
  const RunConfig cfg = parse_config_text(R"({"seed": 7})");
  CHECK(cfg.seed == 7);
  CHECK(cfg.threads == 1);
  CHECK(cfg.manifest.rho == 0.02);
  CHECK(cfg.manifest.base.lr_shared == 5e-5);
  CHECK(cfg.manifest.base.wd_shared == 1e-7);
  CHECK(cfg.manifest.seeds == std::vector<std::uint64_t>{7});
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.manifest.base.reasoner.param_budget == 100000000);
}

TEST_CASE("unknown keys are rejected with their path") {
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"tasks": [{"family": "same_different", "learnig_rate": 1.0}]})"),
      doctest::Contains("learnig_rate"), config_error);
}

TEST_CASE("out-of-range encoder depth names the key") {
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"model": {"encoder": {"depth_blocks": 13}}})"),
                       doctest::Contains("depth_blocks"), config_error);
}

TEST_CASE("all config errors are reported together") {
  try {
    parse_config_text(
        R"({"threads": 0, "log_level": "loud", "model": {"encoder": {"depth_blocks": 99}}})");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("threads") != std::string::npos);
    CHECK(msg.find("log_level") != std::string::npos);
    CHECK(msg.find("depth_blocks") != std::string::npos);
  }
}

TEST_CASE("missing or malformed config files fail cleanly") {
  CHECK_THROWS_AS(parse_config("/tmp/tsr_no_such_config.json"), config_error);
  CHECK_THROWS_AS(parse_config_text("not json at all"), config_error);
  CHECK_THROWS_AS(parse_config_text(R"(["array"])"), config_error);
}

TEST_CASE("task and transfer sections parse into the manifest") {
  const RunConfig cfg = parse_config_text(R"({
    "seed": 3,
    "seeds": [3, 4, 5],
    "tasks": [
      {"family": "same_different", "train_episodes": 100, "val_episodes": 50, "lr": 0.003},
      {"family": "ball_motion", "ball": {"num_balls": 4, "frames": 6}}
    ],
    "train": {"mode": "shared_reasoner_only", "epochs": 7},
    "transfer": {"tracks": [1000, 3000],
                 "target": {"family": "ball_motion", "name": "ball_target",
                            "ball": {"num_balls": 5, "frames": 6, "restitution": 0.8}}}
  })");
  REQUIRE(cfg.manifest.tasks.size() == 2);
  CHECK(cfg.manifest.tasks[0].spec.schedule.lr == 0.003);
  CHECK(cfg.manifest.tasks[1].spec.ball.num_balls == 4);
  CHECK(cfg.manifest.base.mode == SharingMode::shared_reasoner_only);
  CHECK(cfg.train_epochs == 7);
  CHECK(cfg.manifest.seeds.size() == 3);
  CHECK(cfg.manifest.target.spec.ball.restitution == 0.8);
  CHECK(cfg.manifest.target.spec.name == "ball_target");
}

TEST_CASE("checkpoint round trip is bitwise faithful") {
  Checkpoint ckpt;
  ckpt.config_digest = 0xdeadbeefULL;
  ckpt.config_json = R"({"seed": 1})";
  Tensor t1 = Tensor::from({2, 3}, {0.1, -0.25, 1e-17, 3.5, 4.0, -0.0}, true);
  Tensor t2 = Tensor::from({1}, {42.0}, true);
  ckpt.params.emplace_back("a/w", t1);
  ckpt.params.emplace_back("b/w", t2);
  AdamState st;
  st.step = 17;
  st.lr = 3e-4;
  st.m["a/w"] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  st.v["a/w"] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  ckpt.optimizers.emplace_back("task:a", st);
  ckpt.optimizers.emplace_back("shared", AdamState{});
  ckpt.train_state.epoch = 3;
  ckpt.train_state.history = {{{0.5, 60.0}, {0.4, 70.0}}};

  const std::string path = "/tmp/tsr_test_ckpt.bin";
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.config_digest == ckpt.config_digest);
  CHECK(back.config_json == ckpt.config_json);
  REQUIRE(back.params.size() == 2);
  CHECK(back.params[0].first == "a/w");
  CHECK(back.params[0].second.shape() == t1.shape());
  CHECK(std::memcmp(back.params[0].second.data().data(), t1.data().data(),
                    t1.data().size() * sizeof(double)) == 0);
  CHECK(back.optimizers[0].second.step == 17);
  CHECK(back.optimizers[0].second.m.at("a/w") == st.m.at("a/w"));
  CHECK(back.train_state.history[0][1].val_metric == 70.0);

  // Saving again produces identical bytes.
  const std::string path2 = "/tmp/tsr_test_ckpt2.bin";
  save_checkpoint(path2, ckpt);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("checkpoint corruption kinds are distinguished") {
  Checkpoint ckpt;
  ckpt.config_json = "{}";
  ckpt.params.emplace_back("w", Tensor::from({2}, {1.0, 2.0}, true));
  ckpt.optimizers.emplace_back("shared", AdamState{});
  const std::string path = "/tmp/tsr_test_ckpt3.bin";
  save_checkpoint(path, ckpt);
  const std::string good = slurp(path);

  // Truncated file.
  spit(path, good.substr(0, good.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(path), checkpoint_truncated_error);

  // One flipped payload byte breaks the trailing checksum.
  std::string corrupt = good;
  corrupt[20] = static_cast<char>(corrupt[20] ^ 0x40);
  spit(path, corrupt);
  CHECK_THROWS_AS(load_checkpoint(path), checkpoint_checksum_error);

  // Version bump (with a checksum fixed up to match) is rejected.
  Checkpoint vnext = ckpt;
  vnext.version = kCheckpointVersion + 1;
  save_checkpoint(path, vnext);
  CHECK_THROWS_AS(load_checkpoint(path), checkpoint_version_error);
}

TEST_CASE("report emission has the documented shapes and is reproducible") {
  ResultsBundle b;
  b.kind = "sharing_ablation";
  const char* modes[4] = {"both_separated", "both_shared", "shared_encoder_only",
                          "shared_reasoner_only"};
  for (const char* mode : modes) {
    for (const char* task : {"sd", "odd", "cc"}) {
      for (std::uint64_t seed : {1, 2, 3}) {
        b.ablation.push_back({mode, task, seed, 50.0 + seed});
      }
    }
  }
  const std::string dir = "/tmp/tsr_report_test";
  emit_report(b, dir);
  const std::string csv = slurp(dir + "/sharing_ablation.csv");
  // Header plus 4 modes x 3 tasks x 3 seeds.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 36);
  emit_report(b, dir);
  CHECK(slurp(dir + "/sharing_ablation.csv") == csv);

  ResultsBundle probe;
  probe.kind = "depth_probe";
  for (const char* task : {"sd", "odd", "cc"}) {
    for (const int depth : {0, 2, 4, 6, 8, 10, 12}) {
      probe.probe.rows.push_back({task, depth, 50.0 + depth, depth == 8});
    }
    probe.probe.inflection_depth[task] = 8;
    probe.probe.argmax_depth[task] = 12;
  }
  emit_report(probe, dir);
  const std::string pcsv = slurp(dir + "/depth_probe.csv");
  CHECK(std::count(pcsv.begin(), pcsv.end(), '\n') == 1 + 21);
  CHECK(std::count(pcsv.begin(), pcsv.end(), '1') >= 3);

  ResultsBundle tr;
  tr.kind = "transfer";
  for (int mask = 1; mask < 16; ++mask) {
    for (const int track : {1000, 3000}) {
      tr.transfer.push_back({mask, track, 1, 10.0 - mask * 0.1});
    }
  }
  emit_report(tr, dir);
  const std::string tcsv = slurp(dir + "/transfer.csv");
  CHECK(std::count(tcsv.begin(), tcsv.end(), '\n') == 1 + 30);

  // Round trip through results.json preserves the emitted report bytes.
  write_results_json(dir + "/results.json", tr);
  const ResultsBundle back = read_results_json(dir + "/results.json");
  emit_report(back, dir);
  CHECK(slurp(dir + "/transfer.csv") == tcsv);
}

TEST_CASE("numbers in reports carry four decimals") {
  ResultsBundle b;
  b.kind = "consistency";
  b.consistency.push_back({"grid", 55.123456, 80.0, 0.987654321});
  const std::string dir = "/tmp/tsr_report_test2";
  emit_report(b, dir);
  const std::string csv = slurp(dir + "/consistency.csv");
  CHECK(csv.find("55.1235") != std::string::npos);
  CHECK(csv.find("0.9877") != std::string::npos);
}
