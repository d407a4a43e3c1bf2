#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace picknet::train {

struct FrameLoss {
  double loss = 0.0;
  std::vector<double> d_p;  // dL/dp_m
};

// L = sum_f (sum_m p_m |s_{m,f}| - |s*_f|)^2 with channel_amps laid out M x F.
FrameLoss frame_loss(std::span<const double> p, std::span<const double> channel_amps,
                     std::span<const double> target_amp);

}  // namespace picknet::train
