#include <cmath>
#include <cstring>

#include "doctest.h"
#include "tsr/errors.hpp"
#include "tsr/trainer.hpp"

using namespace tsr;

namespace {

TaskSpec make_spec(const std::string& name, TaskFamily family, int batch = 8,
                   double lr = 3e-4) {
  TaskSpec s;
  s.name = name;
  s.family = family;
  s.schedule.batch_size = batch;
  s.schedule.lr = lr;
  return s;
}

TrainOptions tiny_options(SharingMode mode, int epochs, std::uint64_t seed) {
  TrainOptions opt;
  opt.mode = mode;
  opt.epochs = epochs;
  opt.seed = seed;
  opt.encoder.depth_blocks = 0;
  opt.reasoner.hidden_dim = 64;
  opt.reasoner.layers = 2;
  return opt;
}

}  // namespace

TEST_CASE("sharing modes wire parameter storage as specified") {
  const std::vector<TaskSpec> specs = {make_spec("a", TaskFamily::same_different),
                                       make_spec("b", TaskFamily::odd_one_out)};

  for (const SharingMode mode : {SharingMode::both_separated, SharingMode::both_shared,
                                 SharingMode::shared_encoder_only,
                                 SharingMode::shared_reasoner_only}) {
    CAPTURE(sharing_mode_name(mode));
    TwoStageSystem sys = build_system(specs, tiny_options(mode, 1, 5));
    sys.audit_sharing();
    const bool rsn_shared =
        mode == SharingMode::both_shared || mode == SharingMode::shared_reasoner_only;
    const bool enc_shared =
        mode == SharingMode::both_shared || mode == SharingMode::shared_encoder_only;
    CHECK((sys.reasoners[0].get() == sys.reasoners[1].get()) == rsn_shared);
    CHECK((sys.models[0]->encoder().get() == sys.models[1]->encoder().get()) == enc_shared);
    if (rsn_shared || enc_shared) {
      CHECK(sys.shared_group.size() > 0);
    } else {
      CHECK(sys.shared_group.size() == 0);
    }
  }
}

TEST_CASE("shared modules are widened to balance the separated sum") {
  const std::vector<TaskSpec> specs = {make_spec("a", TaskFamily::same_different),
                                       make_spec("b", TaskFamily::odd_one_out),
                                       make_spec("c", TaskFamily::concept_contrast)};
  TrainOptions opt = tiny_options(SharingMode::shared_reasoner_only, 1, 7);
  opt.reasoner.hidden_dim = 512;
  opt.reasoner.layers = 3;
  TwoStageSystem sys = build_system(specs, opt);
  const std::int64_t one = reasoner_param_count(opt.reasoner);
  const std::int64_t got = sys.reasoners[0]->param_count();
  CHECK(std::abs(static_cast<double>(got) - 3.0 * static_cast<double>(one)) <=
        0.10 * 3.0 * static_cast<double>(one));

  // Shared encoder balancing, both_shared.
  TrainOptions opt2 = tiny_options(SharingMode::both_shared, 1, 7);
  TwoStageSystem sys2 = build_system(specs, opt2);
  const std::int64_t enc_one = Encoder::param_count_for(opt2.encoder);
  const std::int64_t enc_got = sys2.models[0]->encoder()->param_count();
  CHECK(std::abs(static_cast<double>(enc_got) - 3.0 * static_cast<double>(enc_one)) <=
        0.10 * 3.0 * static_cast<double>(enc_one));
}

TEST_CASE("shared encoder modes reject trajectory tasks") {
  const std::vector<TaskSpec> specs = {make_spec("a", TaskFamily::same_different),
                                       make_spec("b", TaskFamily::ball_motion)};
  CHECK_THROWS_AS(build_system(specs, tiny_options(SharingMode::both_shared, 1, 5)),
                  config_error);
  CHECK_NOTHROW(build_system(specs, tiny_options(SharingMode::shared_reasoner_only, 1, 5)));
}

TEST_CASE("training is deterministic and loss decreases on a learnable task") {
  const auto run = [](std::uint64_t seed) {
    const std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different)};
    TrainOptions opt = tiny_options(SharingMode::both_separated, 3, seed);
    TwoStageSystem sys = build_system(specs, opt);
    const TaskData data = make_task_data(specs[0], 200, 64, seed);
    const TrainResult res = train_multitask(sys, {data}, opt);
    return res;
  };
  const TrainResult a = run(11);
  const TrainResult b = run(11);
  REQUIRE(a.state.history.size() == 1);
  REQUIRE(a.state.history[0].size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(std::memcmp(&a.state.history[0][e].train_loss, &b.state.history[0][e].train_loss,
                      sizeof(double)) == 0);
    CHECK(std::memcmp(&a.state.history[0][e].val_metric, &b.state.history[0][e].val_metric,
                      sizeof(double)) == 0);
  }
  // Loss averaged over the first epoch sits under the untrained loss (ln 2
  // for a zero-initialized binary head) and keeps improving.
  CHECK(a.state.history[0][0].train_loss < std::log(2.0));
  CHECK(a.state.history[0][2].train_loss < a.state.history[0][0].train_loss);
}

TEST_CASE("zero epochs yields empty history and untouched parameters") {
  const std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different)};
  TrainOptions opt = tiny_options(SharingMode::both_separated, 0, 3);
  TwoStageSystem sys = build_system(specs, opt);
  const std::uint64_t before = sys.all_params().checksum();
  const TaskData data = make_task_data(specs[0], 16, 8, 3);
  const TrainResult res = train_multitask(sys, {data}, opt);
  CHECK(res.state.history[0].empty());
  CHECK(sys.all_params().checksum() == before);
}

TEST_CASE("a task contributes nothing before its entry epoch") {
  std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different),
                                 make_spec("odd", TaskFamily::odd_one_out)};
  specs[1].schedule.entry_epoch = 2;
  TrainOptions opt = tiny_options(SharingMode::shared_reasoner_only, 2, 13);
  TwoStageSystem sys = build_system(specs, opt);
  const std::uint64_t before = sys.task_groups[1].checksum();
  std::vector<TaskData> data = {make_task_data(specs[0], 32, 8, 13),
                                make_task_data(specs[1], 32, 8, 13)};
  train_multitask(sys, data, opt);
  // Two epochs trained, entry at 2: the late task's parameters are bitwise
  // untouched while the shared reasoner moved.
  CHECK(sys.task_groups[1].checksum() == before);
}

TEST_CASE("frozen reasoner paths stay bitwise unchanged through training") {
  const std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different)};
  TrainOptions opt = tiny_options(SharingMode::both_separated, 2, 17);
  TwoStageSystem sys = build_system(specs, opt);
  set_freeze(sys.task_groups[0], FreezeSpec{{"sd/reasoner/"}});
  ParamSet reasoner_only;
  reasoner_only.merge(sys.reasoners[0]->params());
  const std::uint64_t before = reasoner_only.checksum();
  const TaskData data = make_task_data(specs[0], 32, 8, 17);
  train_multitask(sys, {data}, opt);
  CHECK(reasoner_only.checksum() == before);
  // Everything else trained.
  CHECK(sys.models[0]->head()->params().checksum() != 0);
}

TEST_CASE("non-finite loss aborts with task and step named") {
  const std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different)};
  TrainOptions opt = tiny_options(SharingMode::both_separated, 1, 19);
  TwoStageSystem sys = build_system(specs, opt);
  // Poison a head weight; the relu stack would mask a NaN planted earlier.
  sys.models[0]->head()->params().at("sd/head/v").data()[0] =
      std::numeric_limits<double>::quiet_NaN();
  const TaskData data = make_task_data(specs[0], 16, 8, 19);
  CHECK_THROWS_WITH_AS(train_multitask(sys, {data}, opt), doctest::Contains("sd"),
                       numeric_error);
}

TEST_CASE("empty dataset raises a data error") {
  const std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different)};
  TrainOptions opt = tiny_options(SharingMode::both_separated, 1, 23);
  TwoStageSystem sys = build_system(specs, opt);
  TaskData empty;
  CHECK_THROWS_AS(train_multitask(sys, {empty}, opt), data_error);
}

TEST_CASE("balance_samples delivers exact per-task counts from disjoint streams") {
  const std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different),
                                       make_spec("odd", TaskFamily::odd_one_out),
                                       make_spec("cc", TaskFamily::concept_contrast),
                                       make_spec("grid", TaskFamily::grid_puzzle)};
  const auto data = balance_samples(specs, 50, 10, 31);
  REQUIRE(data.size() == 4);
  for (const auto& d : data) {
    CHECK(d.train.size() == 50);
    CHECK(d.val.size() == 10);
  }
  const auto again = balance_samples(specs, 50, 10, 31);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(again[t].train[i].seed == data[t].train[i].seed);
    }
  }
  // Streams differ across tasks of the same family under different names.
  const std::vector<TaskSpec> twins = {make_spec("ball_a", TaskFamily::ball_motion),
                                       make_spec("ball_b", TaskFamily::ball_motion)};
  const auto tw = balance_samples(twins, 10, 2, 31);
  CHECK(tw[0].train[0].seed != tw[1].train[0].seed);
}

TEST_CASE("untrained chooser sits at chance on grid puzzles") {
  const std::vector<TaskSpec> specs = {make_spec("grid", TaskFamily::grid_puzzle)};
  TrainOptions opt = tiny_options(SharingMode::both_separated, 1, 37);
  TwoStageSystem sys = build_system(specs, opt);
  const TaskData data = make_task_data(specs[0], 1, 600, 37);
  const double acc = evaluate_task(sys, 0, data.val);
  CHECK(acc > 12.5 - 4.0);
  CHECK(acc < 12.5 + 4.0);
}

TEST_CASE("attach_adapter demands a frozen reasoner") {
  const std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different)};
  TrainOptions opt = tiny_options(SharingMode::both_separated, 1, 41);
  TwoStageSystem sys = build_system(specs, opt);
  auto adapter = std::make_shared<Adapter>(512, "adapter", 41);
  CHECK_THROWS_AS(attach_adapter(sys, adapter), contract_error);
  sys.reasoners[0]->set_frozen(true);
  CHECK_NOTHROW(attach_adapter(sys, adapter));
  CHECK(sys.task_groups[0].contains("adapter/w"));
}

TEST_CASE("resume reproduces an uninterrupted run") {
  const std::vector<TaskSpec> specs = {make_spec("sd", TaskFamily::same_different)};
  const TaskData data = make_task_data(specs[0], 48, 16, 43);

  TrainOptions full = tiny_options(SharingMode::both_separated, 4, 43);
  TwoStageSystem straight = build_system(specs, full);
  const TrainResult whole = train_multitask(straight, {data}, full);

  TrainOptions first = tiny_options(SharingMode::both_separated, 2, 43);
  TwoStageSystem resumed = build_system(specs, first);
  TrainResult part = train_multitask(resumed, {data}, first);
  TrainOptions second = tiny_options(SharingMode::both_separated, 4, 43);
  const TrainResult rest = train_multitask(resumed, {data}, second, &part.state,
                                           &part.task_optimizers, &part.shared_optimizer);

  CHECK(straight.all_params().checksum() == resumed.all_params().checksum());
  REQUIRE(rest.state.history[0].size() == whole.state.history[0].size());
  for (std::size_t e = 0; e < whole.state.history[0].size(); ++e) {
    CHECK(rest.state.history[0][e].val_metric == whole.state.history[0][e].val_metric);
    CHECK(rest.state.history[0][e].train_loss == whole.state.history[0][e].train_loss);
  }
}
