#include "picknet/dsp/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

#include "picknet/error.hpp"

namespace picknet::dsp {
namespace {
// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Plan {
  double* time = nullptr;
  fftw_complex* freq = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  ~Plan() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    fftw_free(time);
    fftw_free(freq);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), plan_(std::make_unique<Plan>()) {
  require(n >= 2, ErrorCode::kInvalidInput, "FFT size must be at least 2");
  std::lock_guard lock(planner_mutex());
  plan_->time = fftw_alloc_real(n);
  plan_->freq = fftw_alloc_complex(n / 2 + 1);
  const int ni = static_cast<int>(n);
  plan_->fwd = fftw_plan_dft_r2c_1d(ni, plan_->time, plan_->freq, FFTW_ESTIMATE);
  plan_->inv = fftw_plan_dft_c2r_1d(ni, plan_->freq, plan_->time, FFTW_ESTIMATE);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  require(in.size() == n_ && out.size() == bins(), ErrorCode::kInvalidInput,
          "RealFft::forward size mismatch");
  std::copy(in.begin(), in.end(), plan_->time);
  fftw_execute(plan_->fwd);
  const auto* f = reinterpret_cast<const std::complex<double>*>(plan_->freq);
  std::copy(f, f + bins(), out.begin());
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  require(in.size() == bins() && out.size() == n_, ErrorCode::kInvalidInput,
          "RealFft::inverse size mismatch");
  auto* f = reinterpret_cast<std::complex<double>*>(plan_->freq);
  std::copy(in.begin(), in.end(), f);
  // c2r ignores the imaginary parts of DC and Nyquist; real signals have none.
  fftw_execute(plan_->inv);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = plan_->time[i] * scale;
}

RealFft& real_fft(std::size_t n) {
  thread_local std::map<std::size_t, RealFft> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, RealFft(n)).first;
  return it->second;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace picknet::dsp
