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

#include <complex>
#include <cstddef>
#include <span>

namespace ngcc {

/// Unnormalized complex DFT of a fixed length, backed by FFTW.
///
/// forward:  X[k] = sum_n x[n] exp(-i 2 pi k n / N)
/// inverse:  x[n] = sum_k X[k] exp(+i 2 pi k n / N)   (no 1/N factor)
///
/// Plans are created once per (length, precision) and shared; execution is
/// thread-safe.
template <typename T>
class Dft {
 public:
  explicit Dft(std::size_t n);

  std::size_t size() const { return n_; }

  void forward(std::span<const std::complex<T>> in,
               std::span<std::complex<T>> out) const;
  void inverse(std::span<const std::complex<T>> in,
               std::span<std::complex<T>> out) const;
  /// Forward transform of a real sequence, returning all N bins.
  void forward_real(std::span<const T> in, std::span<std::complex<T>> out) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

extern template class Dft<float>;
extern template class Dft<double>;

}  // namespace ngcc
