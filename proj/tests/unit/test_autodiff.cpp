#include <cmath>
#include <functional>
#include <limits>

#include "doctest.h"
#include "evrptw/autodiff.hpp"
#include "evrptw/random.hpp"

using namespace evrptw;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

Mat random_mat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

// Builds a scalar from the params via `body`, then compares tape gradients
// against central differences for every parameter entry.
using Body = std::function<Var(Tape&, const std::vector<Var>&)>;

double max_gradient_error(std::vector<Mat> params, const Body& body, double h = 1e-6) {
  auto eval = [&](const std::vector<Mat>& p) {
    Tape t(&p);
    std::vector<Var> vars;
    for (int i = 0; i < static_cast<int>(p.size()); ++i) vars.push_back(t.param(i));
    return t.item(body(t, vars));
  };
  Tape t(&params);
  std::vector<Var> vars;
  for (int i = 0; i < static_cast<int>(params.size()); ++i) vars.push_back(t.param(i));
  ad::GradBuffer grads;
  t.backward(body(t, vars), grads);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index e = 0; e < params[k].size(); ++e) {
      std::vector<Mat> plus = params, minus = params;
      plus[k].data()[e] += h;
      minus[k].data()[e] -= h;
      const double fd = (eval(plus) - eval(minus)) / (2 * h);
      const double an = grads[k].size() ? grads[k].data()[e] : 0.0;
      worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

// Weighted sum so every output entry matters.
Var readout(Tape& t, Var x, std::uint64_t seed = 99) {
  Rng rng(seed);
  const Mat& v = t.value(x);
  return t.sum(t.mul(x, t.constant(random_mat(rng, static_cast<int>(v.rows()), static_cast<int>(v.cols())))));
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("linear algebra ops") {
    Rng rng(1);
    const std::vector<Mat> p{random_mat(rng, 3, 4), random_mat(rng, 4, 2), random_mat(rng, 3, 4),
                             random_mat(rng, 1, 4), random_mat(rng, 3, 1), random_mat(rng, 1, 1)};
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.matmul(v[0], v[1])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.transpose(v[0])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.add(v[0], v[2])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.sub(v[0], v[2])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.add_row(v[0], v[3])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.mul(v[0], v[2])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.mul_row(v[0], v[3])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.mul_col(v[0], v[4])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.scale(v[0], -2.5)); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.add_scalar(v[0], 3.0)); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) {
            Rng r(5);
            return readout(t, t.add_scaled_const(v[0], v[5], random_mat(r, 3, 4)));
          }) < 1e-7);
  }

  TEST_CASE("elementwise ops") {
    Rng rng(2);
    // Keep entries away from the kinks of relu / clamp / min / max.
    Mat a = random_mat(rng, 3, 3, 0.1, 0.9);
    for (Eigen::Index i = 0; i < a.size(); i += 2) a.data()[i] = -a.data()[i];
    Mat b = a.array() + 0.05;
    for (Eigen::Index i = 0; i < b.size(); i += 3) b.data()[i] = a.data()[i] - 0.05;
    const std::vector<Mat> p{a, b};
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.relu(v[0])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.sigmoid(v[0])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.tanh(v[0])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.exp(v[0])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.square(v[0])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.clamp(v[0], -0.5, 0.5)); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.minimum(v[0], v[1])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.maximum(v[0], v[1])); }) < 1e-7);
  }

  TEST_CASE("shape ops and reductions") {
    Rng rng(3);
    const std::vector<Mat> p{random_mat(rng, 3, 4), random_mat(rng, 3, 2), random_mat(rng, 2, 4)};
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.concat_cols({v[0], v[1]})); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.concat_rows({v[0], v[2]})); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.slice_cols(v[0], 1, 2)); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.row(v[0], 2)); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.pick(v[0], 1, 3)); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) {
            return readout(t, t.mask_rows(v[0], {1, 0, 1}));
          }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return readout(t, t.mean_rows(v[0])); }) < 1e-7);
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) { return t.sum(t.square(v[0])); }) < 1e-7);
  }

  TEST_CASE("normalization and attention helpers") {
    Rng rng(4);
    const std::vector<Mat> p{random_mat(rng, 4, 5), random_mat(rng, 1, 5, 0.5, 1.5), random_mat(rng, 1, 5),
                             random_mat(rng, 1, 6, -3, 3)};
    CHECK(max_gradient_error(p, [](Tape& t, const auto& v) {
            return readout(t, t.layer_norm_rows(v[0], v[1], v[2]));
          }) < 1e-6);
    Eigen::ArrayXXd allowed = Eigen::ArrayXXd::Ones(4, 5);
    allowed(0, 1) = 0;
    allowed(2, 4) = 0;
    allowed(3, 0) = 0;
    CHECK(max_gradient_error(p, [&](Tape& t, const auto& v) {
            return readout(t, t.masked_softmax_rows(v[0], allowed));
          }) < 1e-7);
    const std::vector<char> keep{1, 0, 1, 1, 0, 1};
    CHECK(max_gradient_error(p, [&](Tape& t, const auto& v) {
            return t.pick(t.masked_log_softmax(v[3], keep), 0, 2);
          }) < 1e-7);
    CHECK(max_gradient_error(p, [&](Tape& t, const auto& v) { return t.masked_entropy(v[3], keep); }) < 1e-7);
  }

  TEST_CASE("masked softmax puts exact zeros and -inf on masked entries") {
    Tape t;
    const Var logits = t.constant(Mat::Constant(1, 4, 0.3));
    const std::vector<char> keep{0, 1, 1, 0};
    const Mat lp = t.value(t.masked_log_softmax(logits, keep));
    CHECK(lp(0, 0) == -std::numeric_limits<double>::infinity());
    CHECK(lp(0, 1) == doctest::Approx(std::log(0.5)));
    CHECK(t.item(t.masked_entropy(logits, keep)) == doctest::Approx(std::log(2.0)));
    Eigen::ArrayXXd allowed = Eigen::ArrayXXd::Ones(1, 4);
    allowed(0, 3) = 0;
    const Mat sm = t.value(t.masked_softmax_rows(t.constant(Mat::Constant(1, 4, 1e3)), allowed));
    CHECK(sm(0, 3) == 0.0);
    CHECK(sm.sum() == doctest::Approx(1.0));
  }

  TEST_CASE("parameters used twice accumulate gradients") {
    std::vector<Mat> p{Mat::Constant(1, 1, 3.0)};
    Tape t(&p);
    const Var x = t.param(0);
    CHECK(t.param(0).id == x.id);
    ad::GradBuffer g;
    t.backward(t.mul(x, x), g);
    CHECK(g[0](0, 0) == doctest::Approx(6.0));
  }

  TEST_CASE("backward needs a scalar") {
    std::vector<Mat> p{Mat::Ones(2, 2)};
    Tape t(&p);
    ad::GradBuffer g;
    CHECK_THROWS(t.backward(t.param(0), g));
  }
}
