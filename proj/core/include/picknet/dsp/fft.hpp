#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace picknet::dsp {

// Real-input DFT of a fixed size backed by FFTW. Plans are created once per
// instance; an instance must not be shared between threads (use real_fft()).
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // X[k] = sum_n x[n] exp(-2 pi i k n / N), k = 0..N/2.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  // Inverse of forward(), including the 1/N scale.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Plan;
  std::size_t n_;
  std::unique_ptr<Plan> plan_;
};

// Per-thread cache of transforms keyed by size.
RealFft& real_fft(std::size_t n);

std::size_t next_pow2(std::size_t n);

}  // namespace picknet::dsp
