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

#include <span>

namespace ngcc {

enum class Padding { kCircular, kZero };

/// Shape of a same-length 1-D convolution over [channels, length] tensors
/// with weights laid out [out_channels][in_channels][taps]. Taps are odd and
/// centred, cross-correlation style:
///   out[o][n] = b[o] + sum_{c,t} w[o][c][t] * in[c][n + t - taps/2]
struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int taps = 1;
  int length = 1;
  Padding padding = Padding::kCircular;

  int input_size() const { return in_channels * length; }
  int output_size() const { return out_channels * length; }
  int weight_size() const { return out_channels * in_channels * taps; }
};

void validate(const ConvShape& shape);

// OpenMP kernels. Output channels (forward, weight gradient) and input
// channels (input gradient) are split across threads; every output element is
// produced by one thread with a fixed operation order, so results do not
// depend on the thread count.

template <typename T>
void conv1d_forward(const ConvShape& shape, std::span<const T> input,
                    std::span<const T> weights, std::span<const T> bias,
                    std::span<T> output);

/// Accumulates into grad_weights / grad_bias; overwrites grad_input. Empty
/// spans skip that gradient.
template <typename T>
void conv1d_backward(const ConvShape& shape, std::span<const T> input,
                     std::span<const T> weights, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weights,
                     std::span<T> grad_bias);

// Serial reference kernels: the defining sum written out directly, with
// modular indexing. Kept for cross-checking and benchmarking.

template <typename T>
void conv1d_forward_serial(const ConvShape& shape, std::span<const T> input,
                           std::span<const T> weights, std::span<const T> bias,
                           std::span<T> output);

template <typename T>
void conv1d_backward_serial(const ConvShape& shape, std::span<const T> input,
                            std::span<const T> weights,
                            std::span<const T> grad_output,
                            std::span<T> grad_input, std::span<T> grad_weights,
                            std::span<T> grad_bias);

}  // namespace ngcc
