#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "tsr/ops.hpp"
#include "tsr/optim.hpp"
#include "tsr/rng.hpp"
#include "tsr/tensor.hpp"

using namespace tsr;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false,
                     double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

// Independent oracle: naive triple loop.
std::vector<double> matmul_oracle(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += a.data()[i * k + t] * b.data()[t * n + j];
      c[static_cast<std::size_t>(i * n + j)] = s;
    }
  }
  return c;
}

// Independent oracle: direct nested-loop cross-correlation.
std::vector<double> conv2d_oracle(const Tensor& x, const Tensor& k4, int stride, int pad) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int co = k4.dim(0), k = k4.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(co) * oh * ow, 0.0);
  for (int o = 0; o < co; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double s = 0.0;
        for (int ci = 0; ci < c; ++ci) {
          for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
              const int iy = oy * stride + ki - pad;
              const int ix = ox * stride + kj - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              s += x.data()[(ci * h + iy) * w + ix] *
                   k4.data()[((o * c + ci) * k + ki) * k + kj];
            }
          }
        }
        out[static_cast<std::size_t>((o * oh + oy) * ow + ox)] = s;
      }
    }
  }
  return out;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / (std::abs(want) + 1e-6);
}

void check_grad_matches_fd(const Tensor& param, const Tensor& fd, double tol) {
  REQUIRE(param.grad_live());
  const auto& g = param.grad();
  for (std::size_t i = 0; i < g.size(); ++i) {
    CAPTURE(i);
    CHECK(rel_err(g[i], fd.data()[i]) < tol);
  }
}

}  // namespace

TEST_CASE("matmul identity and annihilator") {
  Tensor eye = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.0;
  Rng rng(7);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor out = ops::matmul(nullptr, eye, a);
  for (int i = 0; i < 9; ++i) CHECK(out.data()[i] == a.data()[i]);

  Tensor z = Tensor::zeros({2, 3});
  Tensor b = random_tensor({3, 4}, rng);
  Tensor out2 = ops::matmul(nullptr, z, b);
  for (const double v : out2.data()) CHECK(v == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(11);
  Tensor a = random_tensor({2, 3}, rng);
  Tensor b = random_tensor({3, 2}, rng);
  Tensor out = ops::matmul(nullptr, a, b);
  const auto want = matmul_oracle(a, b);
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(std::abs(out.data()[i] - want[i]) <= 1e-12);
  }

  // Larger odd shapes to exercise the blocked kernel's edge tiles.
  Tensor c = random_tensor({13, 17}, rng);
  Tensor d = random_tensor({17, 21}, rng);
  Tensor out2 = ops::matmul(nullptr, c, d);
  const auto want2 = matmul_oracle(c, d);
  for (std::size_t i = 0; i < want2.size(); ++i) {
    CHECK(std::abs(out2.data()[i] - want2[i]) <= 1e-10);
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_WITH_AS(ops::matmul(nullptr, a, b),
                       doctest::Contains("[2x3]"), dimension_error);
}

TEST_CASE("matmul_nt matches oracle") {
  Rng rng(13);
  Tensor a = random_tensor({4, 6}, rng);
  Tensor b = random_tensor({5, 6}, rng);
  Tensor out = ops::matmul_nt(nullptr, a, b);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) {
      double s = 0.0;
      for (int t = 0; t < 6; ++t) s += a.data()[i * 6 + t] * b.data()[j * 6 + t];
      CHECK(std::abs(out.data()[i * 5 + j] - s) <= 1e-12);
    }
  }
}

TEST_CASE("conv2d identity kernel") {
  Rng rng(17);
  Tensor x = random_tensor({1, 5, 5}, rng);
  Tensor k = Tensor::from({1, 1, 1, 1}, {1.0});
  Tensor out = ops::conv2d(nullptr, x, k, 1, 0);
  REQUIRE(out.shape() == std::vector<int>{1, 5, 5});
  for (int i = 0; i < 25; ++i) CHECK(out.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d output shape formula") {
  Tensor x = Tensor::zeros({1, 64, 64});
  Tensor k = Tensor::zeros({4, 1, 3, 3});
  Tensor out = ops::conv2d(nullptr, x, k, 2, 1);
  CHECK(out.shape() == std::vector<int>{4, 32, 32});
}

TEST_CASE("conv2d matches nested-loop oracle") {
  Rng rng(19);
  Tensor x = random_tensor({2, 8, 8}, rng);
  Tensor k = random_tensor({4, 2, 3, 3}, rng);
  for (const int stride : {1, 2}) {
    for (const int pad : {0, 1}) {
      Tensor out = ops::conv2d(nullptr, x, k, stride, pad);
      const auto want = conv2d_oracle(x, k, stride, pad);
      REQUIRE(out.data().size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(std::abs(out.data()[i] - want[i]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("conv2d rejects kernel larger than padded input") {
  Tensor x = Tensor::zeros({1, 2, 2});
  Tensor k = Tensor::zeros({1, 1, 5, 5});
  CHECK_THROWS_AS(ops::conv2d(nullptr, x, k, 1, 0), dimension_error);
}

TEST_CASE("relu forward and idempotence") {
  Tensor x = Tensor::from({3}, {-1.0, 0.0, 2.0});
  Tensor y = ops::relu(nullptr, x);
  CHECK(y.data() == std::vector<double>{0.0, 0.0, 2.0});
  Tensor y2 = ops::relu(nullptr, y);
  CHECK(y2.data() == y.data());
}

TEST_CASE("relu gradient matches finite differences away from zero") {
  Rng rng(23);
  Tensor x = Tensor::zeros({2, 6}, true);
  for (auto& v : x.data()) {
    do {
      v = rng.normal();
    } while (std::abs(v) < 1e-3);
  }
  Tape tape;
  Tensor y = ops::relu(&tape, x);
  Tensor loss = ops::mse_loss(&tape, y, Tensor::zeros({2, 6}));
  tape.backward(loss);

  Tensor fd = ops::finite_difference_grad(
      [&](const Tensor& probe) {
        Tensor py = ops::relu(nullptr, probe);
        return ops::mse_loss(nullptr, py, Tensor::zeros({2, 6})).value();
      },
      x, 1e-5);
  check_grad_matches_fd(x, fd, 1e-6);
}

TEST_CASE("softmax cross entropy uniform and saturated cases") {
  Tensor logits = Tensor::zeros({1, 8});
  Tensor loss = ops::softmax_cross_entropy(nullptr, logits, {3});
  CHECK(loss.value() == doctest::Approx(std::log(8.0)).epsilon(1e-12));

  Tensor sat = Tensor::zeros({1, 8});
  sat.data()[2] = 1e4;
  Tensor loss2 = ops::softmax_cross_entropy(nullptr, sat, {2});
  CHECK(loss2.value() < 1e-6);
  CHECK(loss2.value() >= 0.0);
}

TEST_CASE("softmax cross entropy rejects out-of-range label") {
  Tensor logits = Tensor::zeros({2, 4});
  CHECK_THROWS_WITH_AS(ops::softmax_cross_entropy(nullptr, logits, {1, 9}),
                       doctest::Contains("9"), label_error);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  Rng rng(29);
  Tensor logits = random_tensor({4, 8}, rng, true);
  const std::vector<std::int64_t> labels = {1, 0, 7, 3};
  Tape tape;
  Tensor loss = ops::softmax_cross_entropy(&tape, logits, labels);
  tape.backward(loss);
  Tensor fd = ops::finite_difference_grad(
      [&](const Tensor& probe) {
        return ops::softmax_cross_entropy(nullptr, probe, labels).value();
      },
      logits, 1e-5);
  check_grad_matches_fd(logits, fd, 1e-6);
}

TEST_CASE("internal softmax rows sum to one") {
  Rng rng(31);
  Tensor x = random_tensor({5, 9}, rng, false, 3.0);
  Tensor y = ops::softmax_rows(nullptr, x);
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 9; ++j) s += y.data()[i * 9 + j];
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("mse loss basics and gradient") {
  Tensor a = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(ops::mse_loss(nullptr, a, a).value() == 0.0);

  Tensor p = Tensor::from({1}, {0.0});
  Tensor t = Tensor::from({1}, {1.0});
  CHECK(ops::mse_loss(nullptr, p, t).value() == doctest::Approx(1.0));

  CHECK_THROWS_AS(ops::mse_loss(nullptr, a, p), dimension_error);

  Rng rng(37);
  Tensor pred = random_tensor({3, 4}, rng, true);
  Tensor target = random_tensor({3, 4}, rng);
  Tape tape;
  Tensor loss = ops::mse_loss(&tape, pred, target);
  tape.backward(loss);
  Tensor fd = ops::finite_difference_grad(
      [&](const Tensor& probe) { return ops::mse_loss(nullptr, probe, target).value(); }, pred,
      1e-5);
  check_grad_matches_fd(pred, fd, 1e-6);
}

TEST_CASE("bce with logits gradient matches finite differences") {
  Rng rng(41);
  Tensor logits = random_tensor({6}, rng, true);
  const std::vector<double> targets = {1, 0, 1, 1, 0, 0};
  Tape tape;
  Tensor loss = ops::bce_with_logits(&tape, logits, targets);
  tape.backward(loss);
  Tensor fd = ops::finite_difference_grad(
      [&](const Tensor& probe) { return ops::bce_with_logits(nullptr, probe, targets).value(); },
      logits, 1e-5);
  check_grad_matches_fd(logits, fd, 1e-6);
}

TEST_CASE("backward on x*x") {
  Tensor x = Tensor::from({1, 1}, {3.0}, true);
  Tape tape;
  Tensor y = ops::matmul(&tape, x, x);
  Tensor loss = ops::mse_loss(&tape, y, Tensor::zeros({1, 1}));
  // loss = (x^2)^2 = x^4, d/dx = 4 x^3 = 108.
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(108.0).epsilon(1e-12));
}

TEST_CASE("constant tensors get no gradient buffer") {
  Tensor x = Tensor::from({1, 2}, {1.0, 2.0}, true);
  Tensor w = Tensor::from({2, 1}, {0.5, 0.25});  // constant
  Tape tape;
  Tensor y = ops::matmul(&tape, x, w);
  Tensor loss = ops::mse_loss(&tape, y, Tensor::zeros({1, 1}));
  tape.backward(loss);
  CHECK(x.grad_live());
  CHECK(w.grad_slot() == nullptr);
}

TEST_CASE("backward requires scalar final-node loss") {
  Tensor x = Tensor::from({1, 2}, {1.0, 2.0}, true);
  Tape tape;
  Tensor y = ops::relu(&tape, x);
  CHECK_THROWS_AS(tape.backward(y), contract_error);

  Tensor loss = ops::mse_loss(&tape, y, Tensor::zeros({1, 2}));
  Tensor extra = ops::relu(&tape, x);
  CHECK_THROWS_AS(tape.backward(loss), contract_error);
}

TEST_CASE("two-layer mlp gradients match central finite differences") {
  Rng rng(43);
  Tensor x = random_tensor({2, 5}, rng);
  Tensor w1 = random_tensor({5, 7}, rng, true, 0.5);
  Tensor b1 = random_tensor({1, 7}, rng, true, 0.1);
  Tensor w2 = random_tensor({7, 3}, rng, true, 0.5);
  Tensor b2 = random_tensor({1, 3}, rng, true, 0.1);
  const std::vector<std::int64_t> labels = {2, 0};

  const auto forward = [&](Tape* tape, const Tensor& pw1, const Tensor& pb1, const Tensor& pw2,
                           const Tensor& pb2) {
    Tensor h = ops::relu(tape, ops::add_rowvec(tape, ops::matmul(tape, x, pw1), pb1));
    Tensor logits = ops::add_rowvec(tape, ops::matmul(tape, h, pw2), pb2);
    return ops::softmax_cross_entropy(tape, logits, labels);
  };

  Tape tape;
  Tensor loss = forward(&tape, w1, b1, w2, b2);
  tape.backward(loss);

  struct Case {
    Tensor* param;
    int which;
  };
  const std::vector<Case> cases = {{&w1, 0}, {&b1, 1}, {&w2, 2}, {&b2, 3}};
  for (const auto& c : cases) {
    CAPTURE(c.which);
    Tensor fd = ops::finite_difference_grad(
        [&](const Tensor& probe) {
          const Tensor& pw1 = c.which == 0 ? probe : w1;
          const Tensor& pb1 = c.which == 1 ? probe : b1;
          const Tensor& pw2 = c.which == 2 ? probe : w2;
          const Tensor& pb2 = c.which == 3 ? probe : b2;
          return forward(nullptr, pw1, pb1, pw2, pb2).value();
        },
        *c.param, 1e-5);
    check_grad_matches_fd(*c.param, fd, 1e-4);
  }
}

TEST_CASE("gradients sum over fan-out") {
  Tensor x = Tensor::from({1, 1}, {2.0}, true);
  Tape tape;
  Tensor y = ops::add(&tape, x, x);  // y = 2x
  Tensor loss = ops::mse_loss(&tape, y, Tensor::zeros({1, 1}));
  // loss = 4x^2, dloss/dx = 8x = 16.
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("adam single step matches closed form") {
  ParamSet params;
  Tensor theta = Tensor::zeros({1}, true);
  params.add("p", theta);
  theta.accumulate_grad({1.0});

  AdamState state;
  state.lr = 1e-3;
  state.beta1 = 0.9;
  state.beta2 = 0.999;
  state.eps = 1e-8;
  state.weight_decay = 0.0;
  adam_step(params, state);

  // Bias-corrected first step: delta = -lr * g / (|g| + eps) with g = 1.
  const double want = -1e-3 * 1.0 / (1.0 + 1e-8);
  CHECK(std::abs(params.at("p").data()[0] - want) <= 1e-18);
  CHECK(state.step == 1);
  CHECK_FALSE(params.at("p").grad_live());
}

TEST_CASE("frozen parameters are bitwise unchanged") {
  ParamSet params;
  Tensor a = Tensor::from({2}, {0.5, -0.25}, true);
  Tensor b = Tensor::from({2}, {1.0, 2.0}, true);
  params.add("module/a", a);
  params.add("module/b", b);
  set_freeze(params, FreezeSpec{{"module/a"}});

  const std::vector<double> before = a.data();
  a.accumulate_grad({3.0, 4.0});
  b.accumulate_grad({1.0, 1.0});
  AdamState state;
  state.lr = 0.1;
  adam_step(params, state);

  CHECK(std::memcmp(a.data().data(), before.data(), before.size() * sizeof(double)) == 0);
  CHECK(b.data()[0] != 1.0);

  CHECK_THROWS_AS(set_freeze(params, FreezeSpec{{"module/nope"}}), config_error);
}

TEST_CASE("adam requires populated gradients on unfrozen parameters") {
  ParamSet params;
  Tensor a = Tensor::from({1}, {0.0}, true);
  params.add("lonely/w", a);
  AdamState state;
  CHECK_THROWS_WITH_AS(adam_step(params, state), doctest::Contains("lonely/w"), optimizer_error);
}

TEST_CASE("adam over ten steps matches an independent scalar loop") {
  // Minimize f(theta) = theta^2 from theta = 1.
  ParamSet params;
  Tensor theta = Tensor::from({1}, {1.0}, true);
  params.add("p", theta);
  AdamState state;
  state.lr = 0.05;
  state.weight_decay = 0.0;

  // Independent oracle: hand-coded scalar Adam.
  double ot = 1.0, om = 0.0, ov = 0.0;
  for (int step = 1; step <= 10; ++step) {
    const double g = 2.0 * ot;
    om = 0.9 * om + 0.1 * g;
    ov = 0.999 * ov + 0.001 * g * g;
    const double mhat = om / (1.0 - std::pow(0.9, step));
    const double vhat = ov / (1.0 - std::pow(0.999, step));
    ot -= 0.05 * mhat / (std::sqrt(vhat) + 1e-8);

    // f(theta) = theta^2 expressed as mse(theta, 0).
    Tape tape;
    Tensor loss = ops::mse_loss(&tape, params.at("p"), Tensor::zeros({1}));
    tape.backward(loss);
    adam_step(params, state);
  }
  CHECK(std::abs(params.at("p").data()[0] - ot) <= 1e-12);
}

TEST_CASE("adam weight decay is coupled L2") {
  ParamSet params;
  Tensor theta = Tensor::from({1}, {2.0}, true);
  params.add("p", theta);
  theta.accumulate_grad({0.5});
  AdamState state;
  state.lr = 1e-2;
  state.weight_decay = 0.1;
  adam_step(params, state);
  // Effective gradient g + wd*theta = 0.5 + 0.2 = 0.7; first step delta =
  // -lr * 0.7 / (0.7 + eps).
  const double want = 2.0 - 1e-2 * 0.7 / (0.7 + 1e-8);
  CHECK(std::abs(params.at("p").data()[0] - want) <= 1e-15);
}

TEST_CASE("he initialization is deterministic and correctly scaled") {
  Tensor w1 = Tensor::zeros({512, 512});
  Tensor w2 = Tensor::zeros({512, 512});
  init::he_normal(w1, 512, 99, "layer/w");
  init::he_normal(w2, 512, 99, "layer/w");
  CHECK(std::memcmp(w1.data().data(), w2.data().data(), w1.data().size() * sizeof(double)) == 0);

  Tensor w3 = Tensor::zeros({512, 512});
  init::he_normal(w3, 512, 100, "layer/w");
  CHECK(std::memcmp(w1.data().data(), w3.data().data(), w1.data().size() * sizeof(double)) != 0);

  // Empirical std over 10k samples within 5% of sqrt(2/512).
  double sum = 0.0, sq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    sum += w1.data()[static_cast<std::size_t>(i)];
    sq += w1.data()[static_cast<std::size_t>(i)] * w1.data()[static_cast<std::size_t>(i)];
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sq / n - mean * mean);
  const double want = std::sqrt(2.0 / 512.0);
  CHECK(stddev > want * 0.95);
  CHECK(stddev < want * 1.05);
}

TEST_CASE("finite differences on known functions") {
  Tensor x = Tensor::from({4}, {1.0, -2.0, 0.5, 3.0});
  Tensor fd = ops::finite_difference_grad(
      [](const Tensor& t) {
        double s = 0.0;
        for (const double v : t.data()) s += v;
        return s;
      },
      x, 1e-5);
  for (const double v : fd.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  Tensor x2 = Tensor::from({1}, {3.0});
  Tensor fd2 = ops::finite_difference_grad(
      [](const Tensor& t) { return t.data()[0] * t.data()[0]; }, x2, 1e-5);
  CHECK(std::abs(fd2.data()[0] - 6.0) <= 1e-8);

  CHECK_THROWS_AS(ops::finite_difference_grad(
                      [](const Tensor&) { return 0.0; }, x, 0.0),
                  contract_error);
}

TEST_CASE("forward and backward are deterministic under a fixed seed") {
  const auto run = [] {
    Rng rng(1234);
    Tensor x = random_tensor({3, 6}, rng);
    Tensor w = random_tensor({6, 4}, rng, true);
    Tape tape;
    Tensor logits = ops::matmul(&tape, x, w);
    Tensor loss = ops::softmax_cross_entropy(&tape, logits, {0, 1, 2});
    tape.backward(loss);
    std::vector<double> out = logits.data();
    const auto& g = w.grad();
    out.insert(out.end(), g.begin(), g.end());
    out.push_back(loss.value());
    return out;
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::memcmp(&a[i], &b[i], sizeof(double)) == 0);
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(47);
  Tensor x = random_tensor({2, 6, 6}, rng, true);
  Tensor k = random_tensor({3, 2, 3, 3}, rng, true, 0.5);
  Tensor target = random_tensor({3, 3, 3}, rng);

  const auto forward = [&](Tape* tape, const Tensor& px, const Tensor& pk) {
    Tensor y = ops::conv2d(tape, px, pk, 2, 1);
    return ops::mse_loss(tape, y, target);
  };
  Tape tape;
  Tensor loss = forward(&tape, x, k);
  tape.backward(loss);

  Tensor fdx = ops::finite_difference_grad(
      [&](const Tensor& probe) { return forward(nullptr, probe, k).value(); }, x, 1e-5);
  check_grad_matches_fd(x, fdx, 1e-4);
  Tensor fdk = ops::finite_difference_grad(
      [&](const Tensor& probe) { return forward(nullptr, x, probe).value(); }, k, 1e-5);
  check_grad_matches_fd(k, fdk, 1e-4);
}

TEST_CASE("conv1d gradients match finite differences") {
  Rng rng(53);
  Tensor x = random_tensor({3, 7}, rng, true);
  Tensor k = random_tensor({4, 3, 3}, rng, true, 0.5);
  Tensor target = random_tensor({4, 7}, rng);
  const auto forward = [&](Tape* tape, const Tensor& px, const Tensor& pk) {
    return ops::mse_loss(tape, ops::conv1d(tape, px, pk, 1), target);
  };
  Tape tape;
  Tensor loss = forward(&tape, x, k);
  tape.backward(loss);
  Tensor fdx = ops::finite_difference_grad(
      [&](const Tensor& probe) { return forward(nullptr, probe, k).value(); }, x, 1e-5);
  check_grad_matches_fd(x, fdx, 1e-4);
  Tensor fdk = ops::finite_difference_grad(
      [&](const Tensor& probe) { return forward(nullptr, x, probe).value(); }, k, 1e-5);
  check_grad_matches_fd(k, fdk, 1e-4);
}

TEST_CASE("structural ops gradients match finite differences") {
  Rng rng(59);
  Tensor a = random_tensor({3, 5}, rng, true);
  Tensor target = random_tensor({1, 5}, rng);
  const auto forward = [&](Tape* tape, const Tensor& p) {
    Tensor sm = ops::softmax_rows(tape, p);
    Tensor mr = ops::mean_rows(tape, sm);
    Tensor sl = ops::slice_row(tape, p, 1);
    Tensor sum = ops::add(tape, mr, sl);
    return ops::mse_loss(tape, sum, target);
  };
  Tape tape;
  Tensor loss = forward(&tape, a);
  tape.backward(loss);
  Tensor fd = ops::finite_difference_grad(
      [&](const Tensor& probe) { return forward(nullptr, probe).value(); }, a, 1e-5);
  check_grad_matches_fd(a, fd, 1e-4);
}

TEST_CASE("stack and pooling ops gradients match finite differences") {
  Rng rng(61);
  Tensor p1 = random_tensor({4}, rng, true);
  Tensor p2 = random_tensor({4}, rng, true);
  Tensor img = random_tensor({3, 4, 4}, rng, true);
  Tensor target = random_tensor({1, 4}, rng);
  Tensor target2 = random_tensor({1, 3}, rng);

  const auto forward = [&](Tape* tape, const Tensor& q1, const Tensor& q2, const Tensor& qi) {
    Tensor st = ops::stack_rows(tape, {q1, q2});
    Tensor mr = ops::mean_rows(tape, st);
    Tensor l1 = ops::mse_loss(tape, mr, target);
    Tensor pooled = ops::channel_mean(tape, qi);
    Tensor l2 = ops::mse_loss(tape, pooled, target2);
    return ops::add(tape, l1, l2);
  };
  Tape tape;
  Tensor loss = forward(&tape, p1, p2, img);
  tape.backward(loss);

  Tensor fd1 = ops::finite_difference_grad(
      [&](const Tensor& probe) { return forward(nullptr, probe, p2, img).value(); }, p1, 1e-5);
  check_grad_matches_fd(p1, fd1, 1e-4);
  Tensor fdi = ops::finite_difference_grad(
      [&](const Tensor& probe) { return forward(nullptr, p1, p2, probe).value(); }, img, 1e-5);
  check_grad_matches_fd(img, fdi, 1e-4);
}
