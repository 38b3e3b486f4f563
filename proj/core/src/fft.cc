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

#include "fft.h"

#include <algorithm>
#include <cstring>
#include <mutex>

#include <fftw3.h>

#include "mmgp/error.h"

namespace mmgp::internal {
namespace {

std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

RealFft::RealFft(int size) : size_(size) {
  if (size < 2) throw Error(ErrorCode::kInvalidArgument, "FFT size < 2");
  std::lock_guard<std::mutex> lock(PlannerMutex());
  double* r = fftw_alloc_real(size);
  fftw_complex* c = fftw_alloc_complex(size / 2 + 1);
  forward_plan_ = fftw_plan_dft_r2c_1d(size, r, c, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(size, c, r, FFTW_ESTIMATE);
  fftw_free(r);
  fftw_free(c);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void RealFft::Forward(std::span<const double> in,
                      std::vector<std::complex<double>>& out) const {
  double* r = fftw_alloc_real(size_);
  fftw_complex* c = fftw_alloc_complex(num_bins());
  const std::size_t n = std::min<std::size_t>(in.size(), size_);
  std::copy_n(in.begin(), n, r);
  std::fill(r + n, r + size_, 0.0);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), r, c);
  out.resize(num_bins());
  for (int k = 0; k < num_bins(); ++k) out[k] = {c[k][0], c[k][1]};
  fftw_free(r);
  fftw_free(c);
}

void RealFft::Inverse(std::span<const std::complex<double>> in,
                      std::vector<double>& out) const {
  double* r = fftw_alloc_real(size_);
  fftw_complex* c = fftw_alloc_complex(num_bins());
  for (int k = 0; k < num_bins(); ++k) {
    c[k][0] = in[k].real();
    c[k][1] = in[k].imag();
  }
  // c2r destroys its input, which is our scratch copy.
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), c, r);
  out.assign(r, r + size_);
  fftw_free(r);
  fftw_free(c);
}

int NextPow2(std::size_t n) {
  int p = 1;
  while (static_cast<std::size_t>(p) < n) p <<= 1;
  return p;
}

std::vector<double> FftConvolve(std::span<const double> a,
                                std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  std::span<const double> longer = a.size() >= b.size() ? a : b;
  std::span<const double> shorter = a.size() >= b.size() ? b : a;
  if (shorter.size() <= 32) {
    std::vector<double> out(out_len, 0.0);
    for (std::size_t j = 0; j < shorter.size(); ++j) {
      if (shorter[j] == 0.0) continue;
      for (std::size_t i = 0; i < longer.size(); ++i) {
        out[i + j] += shorter[j] * longer[i];
      }
    }
    return out;
  }
  // Overlap-add with blocks a few times the filter length.
  const int fft_size = NextPow2(4 * shorter.size());
  const std::size_t block = fft_size - shorter.size() + 1;
  RealFft fft(fft_size);
  std::vector<std::complex<double>> filter_spec, block_spec;
  fft.Forward(shorter, filter_spec);
  std::vector<double> out(out_len, 0.0), chunk;
  for (std::size_t start = 0; start < longer.size(); start += block) {
    const std::size_t len = std::min(block, longer.size() - start);
    fft.Forward(longer.subspan(start, len), block_spec);
    for (std::size_t k = 0; k < block_spec.size(); ++k) {
      block_spec[k] *= filter_spec[k];
    }
    fft.Inverse(block_spec, chunk);
    const std::size_t valid = std::min<std::size_t>(
        len + shorter.size() - 1, out_len - start);
    for (std::size_t i = 0; i < valid; ++i) {
      out[start + i] += chunk[i] / fft_size;
    }
  }
  return out;
}

}  // namespace mmgp::internal
