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

#include <omp.h>

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "ngcc/common.hpp"
#include "ngcc/kernels.hpp"

using namespace ngcc;

namespace {

struct Case {
  ConvShape s;
  std::vector<double> in, w, b;
};

Case make_case(ConvShape s, std::uint64_t seed) {
  return {s, test::randn(s.input_size(), seed), test::randn(s.weight_size(), seed + 1, 0.3),
          test::randn(s.out_channels, seed + 2)};
}

std::vector<double> forward(const Case& c, bool serial = false) {
  std::vector<double> out(c.s.output_size());
  if (serial)
    conv1d_forward_serial<double>(c.s, c.in, c.w, c.b, out);
  else
    conv1d_forward<double>(c.s, c.in, c.w, c.b, out);
  return out;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1e-300);
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("forward matches the serial reference exactly") {
  for (Padding pad : {Padding::kCircular, Padding::kZero}) {
    const auto c = make_case({32, 32, 11, 480, pad}, 1);
    CHECK(forward(c) == forward(c, true));
    const auto small = make_case({3, 2, 5, 13, pad}, 2);
    CHECK(forward(small) == forward(small, true));
  }
}

TEST_CASE("backward matches the serial reference") {
  for (Padding pad : {Padding::kCircular, Padding::kZero}) {
    const auto c = make_case({16, 24, 9, 200, pad}, 3);
    const auto g = test::randn(c.s.output_size(), 7);
    std::vector<double> gi(c.in.size()), gw(c.w.size(), 0.0), gb(c.b.size(), 0.0);
    std::vector<double> si(c.in.size()), sw(c.w.size(), 0.0), sb(c.b.size(), 0.0);
    conv1d_backward<double>(c.s, c.in, c.w, g, gi, gw, gb);
    conv1d_backward_serial<double>(c.s, c.in, c.w, g, si, sw, sb);
    CHECK(rel_diff(gi, si) < 1e-13);
    CHECK(rel_diff(gw, sw) < 1e-13);
    CHECK(rel_diff(gb, sb) < 1e-13);
  }
}

TEST_CASE("results do not depend on the thread count") {
  const auto c = make_case({32, 32, 11, 480, Padding::kCircular}, 5);
  const auto g = test::randn(c.s.output_size(), 6);
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<double> out(c.s.output_size()), gi(c.in.size()), gw(c.w.size(), 0.0);
    conv1d_forward<double>(c.s, c.in, c.w, c.b, out);
    conv1d_backward<double>(c.s, c.in, c.w, g, gi, gw, {});
    out.insert(out.end(), gi.begin(), gi.end());
    out.insert(out.end(), gw.begin(), gw.end());
    return out;
  };
  const int saved = omp_get_max_threads();
  const auto one = run(1), four = run(4);
  omp_set_num_threads(saved);
  CHECK(one == four);
}

TEST_CASE("identity kernel passes the input through") {
  ConvShape s{3, 3, 7, 20, Padding::kCircular};
  std::vector<double> w(s.weight_size(), 0.0);
  for (int c = 0; c < 3; ++c) w[(c * 3 + c) * 7 + 3] = 1.0;
  const auto in = test::randn(s.input_size(), 8);
  std::vector<double> out(s.output_size());
  conv1d_forward<double>(s, in, w, {}, out);
  CHECK(out == in);
}

TEST_CASE("circular convolution commutes with circular shifts") {
  const auto c = make_case({4, 5, 7, 48, Padding::kCircular}, 11);
  const int n = c.s.length;
  for (int shift : {1, 5, 47}) {
    Case d = c;
    for (int ch = 0; ch < c.s.in_channels; ++ch)
      for (int i = 0; i < n; ++i) d.in[ch * n + (i + shift) % n] = c.in[ch * n + i];
    const auto y = forward(c), z = forward(d);
    for (int o = 0; o < c.s.out_channels; ++o)
      for (int i = 0; i < n; ++i) CHECK(z[o * n + (i + shift) % n] == y[o * n + i]);
  }
}

TEST_CASE("zero padding sees nothing past the edges") {
  ConvShape s{1, 1, 3, 4, Padding::kZero};
  const std::vector<double> in{1, 2, 3, 4}, w{1, 10, 100};
  std::vector<double> out(4);
  conv1d_forward<double>(s, in, w, {}, out);
  CHECK(out == std::vector<double>{210, 321, 432, 43});
  s.padding = Padding::kCircular;
  conv1d_forward<double>(s, in, w, {}, out);
  CHECK(out == std::vector<double>{214, 321, 432, 143});
}

TEST_CASE("gradients agree with central differences") {
  for (Padding pad : {Padding::kCircular, Padding::kZero}) {
    auto c = make_case({3, 2, 5, 12, pad}, 21);
    const auto g = test::randn(c.s.output_size(), 22);
    auto loss = [&]() {
      const auto y = forward(c);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += g[i] * y[i];
      return s;
    };
    std::vector<double> gi(c.in.size()), gw(c.w.size(), 0.0), gb(c.b.size(), 0.0);
    conv1d_backward<double>(c.s, c.in, c.w, g, gi, gw, gb);
    const double h = 1e-6;
    auto check = [&](std::vector<double>& v, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double up = loss();
        v[i] = keep - h;
        const double down = loss();
        v[i] = keep;
        CHECK(std::abs((up - down) / (2 * h) - grad[i]) < 1e-6);
      }
    };
    check(c.in, gi);
    check(c.w, gw);
    check(c.b, gb);
  }
}

TEST_CASE("weight gradients accumulate") {
  const auto c = make_case({2, 2, 3, 10, Padding::kCircular}, 31);
  const auto g = test::randn(c.s.output_size(), 32);
  std::vector<double> once(c.w.size(), 0.0), twice(c.w.size(), 0.0);
  conv1d_backward<double>(c.s, c.in, c.w, g, {}, once, {});
  conv1d_backward<double>(c.s, c.in, c.w, g, {}, twice, {});
  conv1d_backward<double>(c.s, c.in, c.w, g, {}, twice, {});
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2 * once[i]));
}

TEST_CASE("float kernels track double") {
  const auto c = make_case({8, 8, 7, 100, Padding::kCircular}, 41);
  const std::vector<float> in(c.in.begin(), c.in.end()), w(c.w.begin(), c.w.end());
  std::vector<float> out(c.s.output_size());
  conv1d_forward<float>(c.s, in, w, {}, out);
  std::vector<double> ref(c.s.output_size());
  conv1d_forward_serial<double>(c.s, c.in, c.w, {}, ref);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - ref[i]) < 1e-4);
}

TEST_CASE("shape errors") {
  ConvShape even{1, 1, 4, 10, Padding::kZero};
  CHECK_THROWS_AS(validate(even), ContractError);
  ConvShape wide{1, 1, 11, 5, Padding::kCircular};
  CHECK_THROWS_AS(validate(wide), ContractError);
  wide.padding = Padding::kZero;
  CHECK_NOTHROW(validate(wide));
  ConvShape s{2, 2, 3, 8, Padding::kZero};
  std::vector<double> in(15), w(12), out(16);
  CHECK_THROWS_AS(conv1d_forward<double>(s, in, w, {}, out), ContractError);
}

}  // TEST_SUITE
