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

#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ngcc/model.hpp"

namespace ngcc::test {

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline std::vector<float> randn_f(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  const auto d = randn(n, seed, scale);
  return {d.begin(), d.end()};
}

/// Fresh scratch directory for one test case.
inline std::filesystem::path scratch(const std::string& name) {
  const char* root = std::getenv("NGCC_TEST_TMP");
  std::filesystem::path dir = root ? std::filesystem::path(root)
                                   : std::filesystem::temp_directory_path() / "ngcc_tests";
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Small network that keeps every stage but runs in milliseconds.
inline ModelConfig tiny_model(std::uint64_t seed = 3) {
  ModelConfig c;
  c.filters = 4;
  c.feature_channels = 3;
  c.head_channels = 4;
  c.sinc_length = 15;
  c.filterbank_lengths = {5, 3};
  c.head_lengths = {3, 3, 1};
  c.window = 64;
  c.init_seed = seed;
  return c;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ngcc::test
