#include "picknet/train/loss.hpp"

#include "picknet/error.hpp"

namespace picknet::train {

FrameLoss frame_loss(std::span<const double> p, std::span<const double> channel_amps,
                     std::span<const double> target_amp) {
  const std::size_t m_count = p.size(), bins = target_amp.size();
  require(m_count >= 1 && channel_amps.size() == m_count * bins, ErrorCode::kInvalidInput,
          "channel amplitudes must be M x F for the given posteriors and target");
  FrameLoss out;
  out.d_p.assign(m_count, 0.0);
  for (std::size_t f = 0; f < bins; ++f) {
    double mix = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) mix += p[m] * channel_amps[m * bins + f];
    const double r = mix - target_amp[f];
    out.loss += r * r;
    for (std::size_t m = 0; m < m_count; ++m) out.d_p[m] += 2.0 * r * channel_amps[m * bins + f];
  }
  return out;
}

}  // namespace picknet::train
