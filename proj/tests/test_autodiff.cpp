#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "canet/common.hpp"
#include "canet/optimizer.hpp"
#include "canet/tensor.hpp"

using namespace canet;

namespace {

Tensor<double> random_tensor(Rng& rng, int rows, int cols, double scale = 1.0) {
  auto t = Tensor<double>::zeros(rows, cols);
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

using Named = std::vector<std::pair<std::string, Tensor<double>>>;

void check_grads(const std::function<Tensor<double>()>& f, const Named& params,
                 double tol = 1e-6) {
  auto report = grad_check(f, params, 1e-6, tol);
  INFO("worst entry: " << report.worst.param << "[" << report.worst.index
                       << "] analytic=" << report.worst.analytic
                       << " numeric=" << report.worst.numeric
                       << " rel_err=" << report.worst.rel_err);
  CHECK(report.passed);
  CHECK(report.entries_checked > 0);
}

}  // namespace

TEST_CASE("matmul gradients match central differences") {
  Rng rng(1);
  auto a = random_tensor(rng, 3, 5);
  auto b = random_tensor(rng, 5, 2);
  auto w = random_tensor(rng, 3, 2);  // breaks symmetry in the objective
  check_grads([&] { return sum_all(mul(matmul(a, b), w)); },
              {{"a", a}, {"b", b}});
}

TEST_CASE("elementwise add and mul gradients") {
  Rng rng(2);
  auto a = random_tensor(rng, 4, 3);
  auto b = random_tensor(rng, 4, 3);
  auto w = random_tensor(rng, 4, 3);
  check_grads([&] { return sum_all(mul(add(a, b), w)); },
              {{"a", a}, {"b", b}});
  check_grads([&] { return sum_all(mul(mul(a, b), w)); },
              {{"a", a}, {"b", b}});
}

TEST_CASE("bias broadcast, row scaling, and scalar scaling gradients") {
  Rng rng(3);
  auto a = random_tensor(rng, 4, 3);
  auto bias = random_tensor(rng, 1, 3);
  auto scale = random_tensor(rng, 4, 1);
  auto w = random_tensor(rng, 4, 3);
  check_grads([&] { return sum_all(mul(add_bias(a, bias), w)); },
              {{"a", a}, {"bias", bias}});
  check_grads([&] { return sum_all(mul(mul_rows(a, scale), w)); },
              {{"a", a}, {"scale", scale}});
  check_grads([&] { return sum_all(mul(scalar_mul(a, 1.7), w)); }, {{"a", a}});
}

TEST_CASE("concat, gather (with repeats), and scatter gradients") {
  Rng rng(4);
  auto a = random_tensor(rng, 3, 2);
  auto b = random_tensor(rng, 3, 4);
  auto w = random_tensor(rng, 3, 6);
  check_grads([&] { return sum_all(mul(concat_cols<double>({a, b}), w)); },
              {{"a", a}, {"b", b}});

  std::vector<int> idx = {2, 0, 2, 1, 2};
  auto wg = random_tensor(rng, 5, 2);
  check_grads([&] { return sum_all(mul(gather_rows(a, idx), wg)); },
              {{"a", a}});

  std::vector<int> tgt = {1, 3, 1};
  auto ws = random_tensor(rng, 4, 2);
  check_grads([&] { return sum_all(mul(scatter_add_rows(a, tgt, 4), ws)); },
              {{"a", a}});
}

TEST_CASE("masked softmax: values and gradients") {
  auto flat = Tensor<double>::from(3, 1, {2.0, 2.0, 2.0});
  auto y = masked_softmax(flat, {0, 3});
  for (int i = 0; i < 3; ++i)
    CHECK(y.at(i, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Rng rng(5);
  auto scores = random_tensor(rng, 6, 1, 2.0);
  std::vector<int> offsets = {0, 2, 2, 5, 6};  // second group is empty
  auto sm = masked_softmax(scores, offsets);
  for (size_t g = 0; g + 1 < offsets.size(); ++g) {
    if (offsets[g] == offsets[g + 1]) continue;
    double total = 0.0;
    for (int i = offsets[g]; i < offsets[g + 1]; ++i) total += sm.at(i, 0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  auto w = random_tensor(rng, 6, 1);
  check_grads(
      [&] { return sum_all(mul(masked_softmax(scores, offsets), w)); },
      {{"scores", scores}});
}

TEST_CASE("activation values and gradients") {
  CHECK(gelu(Tensor<double>::scalar(0.0)).item() == 0.0);
  CHECK(relu(Tensor<double>::scalar(-2.0)).item() == 0.0);
  CHECK(leaky_relu(Tensor<double>::scalar(-2.0), 0.1).item() ==
        doctest::Approx(-0.2));
  CHECK(elu(Tensor<double>::scalar(-1.0)).item() ==
        doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(sigmoid(Tensor<double>::scalar(0.0)).item() == doctest::Approx(0.5));
  CHECK(tanh_act(Tensor<double>::scalar(0.0)).item() == 0.0);

  Rng rng(6);
  // Keep values away from the ReLU kink so central differences are valid.
  auto x = Tensor<double>::zeros(4, 3);
  for (auto& v : x.values()) {
    v = rng.uniform(0.2, 1.5);
    if (rng.uniform() < 0.5) v = -v;
  }
  auto w = random_tensor(rng, 4, 3);
  for (auto act : {Activation::Identity, Activation::ReLU,
                   Activation::LeakyReLU, Activation::ELU, Activation::Tanh,
                   Activation::Sigmoid, Activation::GELU}) {
    check_grads(
        [&] { return sum_all(mul(apply_activation(x, act, 0.1), w)); },
        {{"x", x}});
  }
}

TEST_CASE("cross entropy at uniform logits gives the softmax gradient") {
  auto logits = Tensor<double>::from(1, 2, {0.0, 0.0});
  auto loss = cross_entropy(logits, {0});
  CHECK(loss.item() == doctest::Approx(std::log(2.0)));
  loss.backward();
  CHECK(logits.grad()[0] == doctest::Approx(-0.5));
  CHECK(logits.grad()[1] == doctest::Approx(0.5));

  Rng rng(7);
  auto big = random_tensor(rng, 5, 3, 3.0);
  std::vector<int> labels = {0, 2, 1, 1, 0};
  check_grads([&] { return cross_entropy(big, labels); }, {{"big", big}});
}

TEST_CASE("batch norm: training statistics, running stats, gradients") {
  Rng rng(8);
  auto x = random_tensor(rng, 16, 3, 2.0);
  auto gamma = Tensor<double>::from(1, 3, {1.0, 1.0, 1.0});
  auto beta = Tensor<double>::from(1, 3, {0.0, 0.0, 0.0});
  std::vector<double> run_mean(3, 0.0), run_var(3, 1.0);

  auto y = batch_norm_1d(x, gamma, beta, run_mean, run_var, true);
  for (int j = 0; j < 3; ++j) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < 16; ++i) mean += y.at(i, j);
    mean /= 16.0;
    for (int i = 0; i < 16; ++i)
      var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= 16.0;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shifts it a bit
  }

  // Momentum-0.1 update toward the batch statistics (unbiased variance).
  for (int j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (int i = 0; i < 16; ++i) mean += x.at(i, j);
    mean /= 16.0;
    double var = 0.0;
    for (int i = 0; i < 16; ++i)
      var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
    CHECK(run_mean[j] == doctest::Approx(0.1 * mean));
    CHECK(run_var[j] == doctest::Approx(0.9 + 0.1 * var / 15.0));
  }

  // Eval mode is a fixed affine map of the running stats.
  auto ye = batch_norm_1d(x, gamma, beta, run_mean, run_var, false);
  CHECK(ye.at(0, 0) == doctest::Approx((x.at(0, 0) - run_mean[0]) /
                                       std::sqrt(run_var[0] + 1e-5)));

  auto g2 = random_tensor(rng, 1, 3);
  auto b2 = random_tensor(rng, 1, 3);
  auto w = random_tensor(rng, 16, 3);
  std::vector<double> rm(3, 0.0), rv(3, 1.0);
  check_grads(
      [&] {
        return sum_all(mul(batch_norm_1d(x, g2, b2, rm, rv, true), w));
      },
      {{"x", x}, {"gamma", g2}, {"beta", b2}}, 1e-5);
}

TEST_CASE("dropout: identity in eval mode, inverted scaling in train") {
  Rng rng(9);
  auto x = random_tensor(rng, 8, 4);
  Rng d1(42);
  auto eval_out = dropout(x, 0.5, false, d1);
  CHECK(eval_out.values() == x.values());

  Rng d2(42);
  auto train_out = dropout(x, 0.5, true, d2);
  int kept = 0;
  for (int64_t i = 0; i < x.size(); ++i) {
    double v = train_out.values()[i];
    bool zero = v == 0.0;
    bool doubled = v == doctest::Approx(2.0 * x.values()[i]);
    CHECK((zero || doubled));
    kept += doubled ? 1 : 0;
  }
  CHECK(kept > 0);
  CHECK(kept < x.size());

  Rng d3(43);
  auto p0 = dropout(x, 0.0, true, d3);
  CHECK(p0.values() == x.values());
}

TEST_CASE("AdamW: no-op on zero grads, sign step, quadratic descent") {
  auto x = Tensor<double>::from(1, 1, {1.0});
  auto opt = adamw_init<double>({x}, 0.05, 0.0);

  zero_grads(opt);
  adamw_step(opt);
  CHECK(x.values()[0] == doctest::Approx(1.0).epsilon(1e-12));

  // First step with a fresh state moves by ~lr * sign(grad).
  auto y = Tensor<double>::from(1, 1, {1.0});
  auto opt_y = adamw_init<double>({y}, 0.05, 0.0);
  auto loss = mul(y, y);
  loss.backward();
  adamw_step(opt_y);
  CHECK(y.values()[0] == doctest::Approx(1.0 - 0.05).epsilon(1e-6));

  // Decoupled weight decay shows up even with zero gradients.
  auto z = Tensor<double>::from(1, 1, {2.0});
  auto opt_z = adamw_init<double>({z}, 0.1, 0.5);
  adamw_step(opt_z);
  CHECK(z.values()[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));

  for (int step = 0; step < 100; ++step) {
    x.zero_grad();
    mul(x, x).backward();
    adamw_step(opt);
  }
  CHECK(std::abs(x.values()[0]) < 0.05);
}

TEST_CASE("constant objectives leave zero gradients") {
  Rng rng(10);
  auto p = random_tensor(rng, 3, 3);
  auto report =
      grad_check([&] { return sum_all(scalar_mul(p, 0.0)); }, {{"p", p}});
  CHECK(report.passed);
  CHECK(report.worst.rel_err == 0.0);
}

TEST_CASE("shape mismatches raise ContractViolation, not UB") {
  auto a = Tensor<double>::zeros(2, 3);
  auto b = Tensor<double>::zeros(2, 3);
  CHECK_THROWS_AS(matmul(a, b), ContractViolation);
  CHECK_THROWS_AS(add(a, Tensor<double>::zeros(3, 2)), ContractViolation);
  CHECK_THROWS_AS(gather_rows(a, {0, 7}), ContractViolation);
  CHECK_THROWS_AS(masked_softmax(a, {0, 2}), ContractViolation);
  CHECK_THROWS_AS(cross_entropy(a, {0}), ContractViolation);
  CHECK_THROWS_AS(cross_entropy(a, {0, 3}), ContractViolation);
}
