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

#include "ngcc/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "ngcc/common.hpp"

namespace ngcc {
namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanPair {
  void* forward = nullptr;
  void* inverse = nullptr;
};

template <typename T>
struct FftwTraits;

template <>
struct FftwTraits<double> {
  using Complex = fftw_complex;
  static void* plan(int n, int sign) {
    std::vector<std::complex<double>> a(n), b(n);
    return fftw_plan_dft_1d(n, reinterpret_cast<Complex*>(a.data()),
                            reinterpret_cast<Complex*>(b.data()), sign,
                            FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void run(void* p, const std::complex<double>* in,
                  std::complex<double>* out) {
    fftw_execute_dft(static_cast<fftw_plan>(p),
                     reinterpret_cast<Complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<Complex*>(out));
  }
};

template <>
struct FftwTraits<float> {
  using Complex = fftwf_complex;
  static void* plan(int n, int sign) {
    std::vector<std::complex<float>> a(n), b(n);
    return fftwf_plan_dft_1d(n, reinterpret_cast<Complex*>(a.data()),
                             reinterpret_cast<Complex*>(b.data()), sign,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void run(void* p, const std::complex<float>* in,
                  std::complex<float>* out) {
    fftwf_execute_dft(static_cast<fftwf_plan>(p),
                      reinterpret_cast<Complex*>(const_cast<std::complex<float>*>(in)),
                      reinterpret_cast<Complex*>(out));
  }
};

// Plans live for the whole process.
template <typename T>
PlanPair cached_plans(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  PlanPair p{FftwTraits<T>::plan(static_cast<int>(n), FFTW_FORWARD),
             FftwTraits<T>::plan(static_cast<int>(n), FFTW_BACKWARD)};
  cache.emplace(n, p);
  return p;
}

}  // namespace

template <typename T>
Dft<T>::Dft(std::size_t n) : n_(n) {
  require(n > 0, "Dft: length must be positive");
  PlanPair p = cached_plans<T>(n);
  forward_plan_ = p.forward;
  inverse_plan_ = p.inverse;
}

template <typename T>
void Dft<T>::forward(std::span<const std::complex<T>> in,
                     std::span<std::complex<T>> out) const {
  require(in.size() == n_ && out.size() == n_, "Dft::forward: size mismatch");
  FftwTraits<T>::run(forward_plan_, in.data(), out.data());
}

template <typename T>
void Dft<T>::inverse(std::span<const std::complex<T>> in,
                     std::span<std::complex<T>> out) const {
  require(in.size() == n_ && out.size() == n_, "Dft::inverse: size mismatch");
  FftwTraits<T>::run(inverse_plan_, in.data(), out.data());
}

template <typename T>
void Dft<T>::forward_real(std::span<const T> in,
                          std::span<std::complex<T>> out) const {
  require(in.size() == n_ && out.size() == n_,
          "Dft::forward_real: size mismatch");
  std::vector<std::complex<T>> tmp(n_);
  for (std::size_t i = 0; i < n_; ++i) tmp[i] = {in[i], T(0)};
  FftwTraits<T>::run(forward_plan_, tmp.data(), out.data());
}

template class Dft<float>;
template class Dft<double>;

}  // namespace ngcc
