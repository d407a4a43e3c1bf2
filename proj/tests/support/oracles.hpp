#pragma once

// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library beyond types.

#include <complex>
#include <cstddef>
#include <vector>

#include "picknet/nn/model_config.hpp"
#include "picknet/nn/tensor.hpp"
#include "picknet/sim/room.hpp"

namespace oracle {

// C_out x H x W output of a zero-padded 3x3 convolution, six nested loops.
std::vector<double> naive_conv3x3(const std::vector<double>& in, std::size_t c_in, std::size_t h,
                                  std::size_t w, const std::vector<double>& kernels,
                                  const std::vector<double>& bias, std::size_t c_out);

// y[n] = sum_k x[k] h[n-k] for n < out_len.
std::vector<double> direct_convolution(const std::vector<double>& x, const std::vector<double>& h,
                                       std::size_t out_len);

// X[k] of a real sequence by the textbook sum.
std::complex<double> direct_dft(const std::vector<double>& x, std::size_t k);

// Periodic sqrt-Hann evaluated from its definition.
std::vector<double> sqrt_hann(std::size_t n);

// Sum over every image (n, q) with |n_x - q_x| + |n_x| + ... <= max_order,
// each placed with the library's fractional-delay interpolator.
std::vector<double> brute_force_rir(const picknet::sim::RoomScene& scene, const picknet::sim::Vec3& src,
                                    const picknet::sim::Vec3& mic, std::size_t length, int max_order,
                                    double c = 343.0, int fs = 16000);

// Schroeder backward integration; T60 extrapolated from the -5 to -25 dB span.
double schroeder_t60(const std::vector<double>& rir, int fs);

// Welch PSD (Hann, 50% overlap) summed over [f_lo, f_hi), via direct DFT of the needed bins.
double welch_band_power(const std::vector<double>& x, int fs, double f_lo, double f_hi,
                        std::size_t segment = 1024);

double frame_loss(const std::vector<double>& p, const std::vector<std::vector<double>>& amps,
                  const std::vector<double>& target);

// Straightforward eval-mode forward of a ModelConfig given its named
// parameters (library naming), M patches of input_frames x input_dim.
std::vector<double> reference_forward(const picknet::nn::ModelConfig& cfg,
                                      const std::vector<picknet::nn::NamedTensor<double>>& params,
                                      const std::vector<std::vector<double>>& patches);

}  // namespace oracle
