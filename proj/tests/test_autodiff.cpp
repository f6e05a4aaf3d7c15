// Copyright 2026 The ngcc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "ngcc/autodiff.hpp"
#include "ngcc/common.hpp"

using namespace ngcc;

namespace {

double rms(const std::vector<double>& x, std::size_t from, std::size_t to) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += x[i] * x[i];
  return std::sqrt(s / (to - from));
}

std::vector<double> tone(double hz, double fs, int n) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * hz * i / fs);
  return x;
}

SincLayerParams<double> band_filter(double lo_hz, double hi_hz, double fs, int taps = 101) {
  SincLayerParams<double> p;
  p.filter_length = taps;
  p.low = Tensor<double>({1}, true);
  p.band = Tensor<double>({1}, true);
  p.low.values[0] = lo_hz / fs;
  p.band.values[0] = (hi_hz - lo_hz) / fs;
  return p;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("leaky relu") {
  const std::vector<double> x{-2, -0.5, 0, 1.5};
  std::vector<double> y(4);
  leaky_relu_forward<double>(x, y);
  CHECK(y == std::vector<double>{-0.4, -0.1, 0, 1.5});
  std::vector<double> g{1, 1, 1, 1};
  leaky_relu_backward<double>(x, g);
  CHECK(g == std::vector<double>{0.2, 0.2, 0.2, 1});
}

TEST_CASE("tensor finiteness check") {
  Tensor<float> t({2, 3});
  CHECK(t.size() == 6);
  CHECK_NOTHROW(t.check_finite("t"));
  t.values[4] = std::nanf("");
  CHECK_THROWS_AS(t.check_finite("t"), NumericError);
}

TEST_CASE("mel initialisation covers the band in order") {
  const auto p = SincLayerParams<double>::mel_init(32, 101, 24000.0);
  CHECK(p.filters() == 32);
  double prev = 0;
  for (int l = 0; l < 32; ++l) {
    const auto [f1, f2] = p.cutoffs(l);
    CHECK(f1 > 0);
    CHECK(f2 > f1);
    CHECK(f2 < 0.5);
    CHECK(f1 >= prev - 1e-12);
    prev = f2;
  }
  CHECK(p.cutoffs(0).first * 24000 == doctest::Approx(30.0));
}

TEST_CASE("band-pass rejects an out-of-band tone") {
  const double fs = 24000;
  const auto p = band_filter(2000, 4000, fs);
  for (double hz : {1000.0, 3000.0, 6000.0}) {
    const auto x = tone(hz, fs, 2400);
    std::vector<double> y(x.size());
    sinc_forward<double>(x, p, Padding::kZero, y);
    const double ratio = rms(y, 200, 2200) / rms(x, 200, 2200);
    if (hz == 3000.0)
      CHECK(ratio > 0.9);
    else
      CHECK(ratio < 0.05);
  }
}

TEST_CASE("full band filter is the identity") {
  const auto p = band_filter(0, 12000, 24000, 31);
  const auto k = sinc_kernels(p);
  for (int i = 0; i < 31; ++i) CHECK(std::abs(k[i] - (i == 15 ? 1.0 : 0.0)) < 1e-14);
}

TEST_CASE("upper cutoff clamps at nyquist") {
  auto p = band_filter(0.3 * 24000, 0.9 * 24000, 24000);
  const auto [f1, f2] = p.cutoffs(0);
  CHECK(f1 == doctest::Approx(0.3));
  CHECK(f2 == 0.5);
}

TEST_CASE("sinc parameter gradients agree with central differences") {
  auto p = SincLayerParams<double>::mel_init(5, 21, 16000.0);
  p.low.values[2] = -p.low.values[2];  // |.| branch
  const auto g = test::randn(5 * 21, 3);
  auto loss = [&]() {
    const auto k = sinc_kernels(p);
    double s = 0;
    for (std::size_t i = 0; i < k.size(); ++i) s += g[i] * k[i];
    return s;
  };
  p.low.zero_grad();
  p.band.zero_grad();
  sinc_kernels_backward<double>(p, g);
  const double h = 1e-7;
  for (Tensor<double>* t : {&p.low, &p.band})
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double keep = t->values[i];
      t->values[i] = keep + h;
      const double up = loss();
      t->values[i] = keep - h;
      const double down = loss();
      t->values[i] = keep;
      CHECK(t->grad[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("cross entropy on uniform and confident logits") {
  std::vector<double> logits(13, 0.0);
  const int target[] = {2};
  auto r = softmax_xent(logits, 6, target);
  CHECK(r.loss == doctest::Approx(std::log(13.0)).epsilon(1e-12));
  logits[8] = 1000.0;
  r = softmax_xent(logits, 6, target);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss < 1e-12);
  for (double g : r.grad) CHECK(std::isfinite(g));
}

TEST_CASE("cross entropy against a long double oracle") {
  const int K = 3, lags = 13;
  const auto logits = test::randn(K * lags, 4, 3.0);
  const int targets[] = {-6, 0, 4};
  const auto r = softmax_xent(logits, 6, targets);
  long double loss = 0;
  for (int k = 0; k < K; ++k) {
    long double z = 0;
    for (int l = 0; l < lags; ++l) z += std::exp(static_cast<long double>(logits[k * lags + l]));
    loss -= logits[k * lags + targets[k] + 6] - std::log(z);
    double row = 0;
    for (int l = 0; l < lags; ++l) {
      const double p = static_cast<double>(std::exp(logits[k * lags + l] - std::log(z)));
      CHECK(r.grad[k * lags + l] ==
            doctest::Approx((p - (l == targets[k] + 6 ? 1.0 : 0.0)) / K).epsilon(1e-10));
      row += r.grad[k * lags + l];
    }
    CHECK(std::abs(row) < 1e-15);
  }
  CHECK(std::abs(r.loss - static_cast<double>(loss / K)) < 1e-12);
  const int bad[] = {0, 0, 7};
  CHECK_THROWS_AS(softmax_xent(logits, 6, bad), ContractError);
}

TEST_CASE("log softmax rows normalise and stay stable") {
  std::vector<double> x{1000, 1001, 1002, -5, 0, 5};
  std::vector<double> y(6);
  log_softmax_rows<double>(x, 2, 3, y);
  for (int r = 0; r < 2; ++r) {
    double s = 0;
    for (int c = 0; c < 3; ++c) s += std::exp(y[r * 3 + c]);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(y[2] == doctest::Approx(-std::log(1 + std::exp(-1.0) + std::exp(-2.0))).epsilon(1e-14));
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
  std::vector<double> p{1, -2, 3}, g(3, 0.0), m(3, 0.0), v(3, 0.0);
  for (long t = 1; t <= 5; ++t) adam_step<double>(p, g, m, v, AdamConfig{}, t);
  CHECK(p == std::vector<double>{1, -2, 3});
}

TEST_CASE("adam first step moves by about lr against the gradient sign") {
  std::vector<double> p{0, 0, 0}, g{3, -0.01, 50}, m(3, 0.0), v(3, 0.0);
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step<double>(p, g, m, v, cfg, 1);
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam matches the bias-corrected recurrence") {
  AdamConfig cfg{0.05, 0.8, 0.99, 1e-8};
  std::vector<double> p{0.5}, m{0}, v{0};
  double rp = 0.5, rm = 0, rv = 0;
  const double grads[] = {0.3, -1.2, 0.7, 0.05};
  for (long t = 1; t <= 4; ++t) {
    const std::vector<double> g{grads[t - 1]};
    adam_step<double>(p, g, m, v, cfg, t);
    rm = 0.8 * rm + 0.2 * g[0];
    rv = 0.99 * rv + 0.01 * g[0] * g[0];
    const double mh = rm / (1 - std::pow(0.8, t)), vh = rv / (1 - std::pow(0.99, t));
    rp -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p[0] == doctest::Approx(rp).epsilon(1e-12));
  }
}

TEST_CASE("adam loss strictly decreases on a bowl at lr 0.001") {
  Tensor<double> x({4}, true);
  x.values = {3, -2, 1, 4};
  AdamOptimizer<double> opt({{"x", &x}}, AdamConfig{0.001});
  auto f = [&] {
    double s = 0;
    for (double v : x.values) s += v * v;
    return s;
  };
  double prev = f();
  for (int i = 1; i <= 200; ++i) {
    for (std::size_t k = 0; k < 4; ++k) x.grad[k] = 2 * x.values[k];
    opt.step();
    if (i > 10) CHECK(f() < prev);
    prev = f();
  }
}

TEST_CASE("adam optimiser descends a quadratic bowl") {
  Tensor<double> x({4}, true);
  x.values = {3, -2, 1, 4};
  AdamOptimizer<double> opt({{"x", &x}}, AdamConfig{0.05});
  auto f = [&] {
    double s = 0;
    for (double v : x.values) s += v * v;
    return s;
  };
  const double start = f();
  for (int i = 0; i < 300; ++i) {
    for (std::size_t k = 0; k < 4; ++k) x.grad[k] = 2 * x.values[k];
    opt.step();
    if (i == 9) CHECK(f() < start);
  }
  CHECK(opt.steps() == 300);
  CHECK(f() < 0.05);
}

TEST_CASE("gradient check passes a correct gradient and flags a wrong one") {
  Tensor<double> a({3}, true), b({2}, true);
  a.values = {0.5, -1, 2};
  b.values = {1.5, 0.25};
  auto loss = [&] {
    return a.values[0] * a.values[0] * b.values[1] + std::sin(a.values[1]) + a.values[2] * b.values[0];
  };
  bool wrong = false;
  auto backward = [&] {
    a.grad = {2 * a.values[0] * b.values[1], std::cos(a.values[1]), b.values[0]};
    b.grad = {a.values[2], a.values[0] * a.values[0] * (wrong ? 1.1 : 1.0)};
  };
  GradCheckOptions opt;
  auto r = grad_check(loss, backward, {{"a", &a}, {"b", &b}}, opt);
  CHECK(r.passed);
  CHECK(r.max_rel_error < 1e-8);
  REQUIRE(r.layers.size() == 2);
  CHECK(r.layers[0].checked == 3);
  wrong = true;
  r = grad_check(loss, backward, {{"a", &a}, {"b", &b}}, opt);
  CHECK_FALSE(r.passed);
  CHECK(r.failing_layer == "b");
  CHECK(a.values == std::vector<double>{0.5, -1, 2});
}

TEST_CASE("gradient check treats a constant loss as zero gradient") {
  Tensor<double> a({5}, true);
  auto r = grad_check([] { return 1.0; }, [&] { a.zero_grad(); }, {{"a", &a}}, {});
  CHECK(r.passed);
  CHECK(r.max_rel_error == 0.0);
}

TEST_CASE("gradient check shrinks the step across a kink") {
  // Leaky unit with its kink 3e-7 to the left of the evaluation point.
  Tensor<double> a({1}, true);
  a.values = {3e-7};
  auto value = [&] { return a.values[0] > 0 ? a.values[0] : 0.2 * a.values[0]; };
  auto backward = [&] { a.grad = {a.values[0] > 0 ? 1.0 : 0.2}; };
  GradCheckOptions one_step;
  one_step.refinements = 0;
  CHECK(grad_check([&] { return value(); }, backward, {{"a", &a}}, one_step).max_rel_error > 0.01);
  // Agreement alone recovers here; the fingerprint rejects the step up front.
  CHECK(grad_check([&] { return value(); }, backward, {{"a", &a}}, {}).passed);
  const auto aware = grad_check(
      [&](std::uint64_t* region) {
        if (region) *region = a.values[0] > 0;
        return value();
      },
      backward, {{"a", &a}}, {});
  CHECK(aware.passed);
  CHECK(aware.max_rel_error < 1e-8);
  CHECK(aware.layers[0].refined == 1);
}

TEST_CASE("gradient check refines a strongly curved direction") {
  // Truncation error at h = 1e-6 is about (1e5 h)^2 / 6.
  Tensor<double> a({1}, true);
  a.values = {0.3};
  auto loss = [&] { return std::sin(1e5 * a.values[0]); };
  auto backward = [&] { a.grad = {1e5 * std::cos(1e5 * a.values[0])}; };
  GradCheckOptions opt;
  opt.refinements = 0;
  CHECK(grad_check(loss, backward, {{"a", &a}}, opt).max_rel_error > 1e-3);
  opt.refinements = 2;
  const auto r = grad_check(loss, backward, {{"a", &a}}, opt);
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.layers[0].refined == 1);
}

}  // TEST_SUITE
