// Copyright 2026 The MMGP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MMGP_SRC_FFT_H_
#define MMGP_SRC_FFT_H_

#include <complex>
#include <span>
#include <vector>

namespace mmgp::internal {

// Real-to-complex FFT of fixed size. Plans are created under a global lock
// (FFTW planning is not reentrant); Forward/Inverse are thread-safe.
class RealFft {
 public:
  explicit RealFft(int size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return size_; }
  int num_bins() const { return size_ / 2 + 1; }

  // `in` is zero-padded or must not exceed size().
  void Forward(std::span<const double> in,
               std::vector<std::complex<double>>& out) const;
  // Unnormalized inverse: Inverse(Forward(x)) == size() * x.
  void Inverse(std::span<const std::complex<double>> in,
               std::vector<double>& out) const;

 private:
  int size_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

// Smallest power of two >= n.
int NextPow2(std::size_t n);

// Linear convolution, length a.size() + b.size() - 1.
std::vector<double> FftConvolve(std::span<const double> a,
                                std::span<const double> b);

}  // namespace mmgp::internal

#endif  // MMGP_SRC_FFT_H_
