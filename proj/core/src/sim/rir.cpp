#include "picknet/sim/rir.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "picknet/dsp/fft.hpp"
#include "picknet/error.hpp"

namespace picknet::sim {

void add_fractional_impulse(std::span<double> h, double delay, double amplitude) {
  constexpr double kPi = std::numbers::pi;
  constexpr double kWindowHalf = kSincHalfTaps + 1.0;
  const double base = std::floor(delay);
  const double frac = delay - base;
  const long centre = static_cast<long>(base);
  // sin(pi (k - frac)) = -(-1)^k sin(pi frac), one sine per impulse
  const double s = std::sin(kPi * frac);
  for (int k = -kSincHalfTaps; k <= kSincHalfTaps; ++k) {
    const long n = centre + k;
    if (n < 0 || n >= static_cast<long>(h.size())) continue;
    const double x = k - frac;
    double sinc;
    if (x == 0.0) {
      sinc = 1.0;
    } else {
      const double sign = (k % 2 == 0) ? -1.0 : 1.0;
      sinc = frac == 0.0 ? 0.0 : sign * s / (kPi * x);
    }
    const double w = 0.5 * (1.0 + std::cos(kPi * x / kWindowHalf));
    h[static_cast<std::size_t>(n)] += amplitude * w * sinc;
  }
}

namespace {

// Allen & Berkley image coordinate along one axis: (1 - 2q) p + 2 n L,
// hitting |n - q| + |n| walls on the way.
struct AxisImage {
  double offset;  // image coordinate minus mic coordinate
  int order;
};

std::vector<AxisImage> axis_images(double src, double mic, double len, double reach) {
  std::vector<AxisImage> out;
  const int n_max = static_cast<int>(std::ceil(reach / (2.0 * len))) + 1;
  for (int n = -n_max; n <= n_max; ++n) {
    for (int q = 0; q <= 1; ++q) {
      const double img = (1 - 2 * q) * src + 2.0 * n * len;
      const double off = img - mic;
      if (std::abs(off) > reach) continue;
      out.push_back({off, std::abs(n - q) + std::abs(n)});
    }
  }
  return out;
}

bool strictly_inside(const Vec3& p, const RoomScene& s) {
  return p.x > 0 && p.x < s.depth && p.y > 0 && p.y < s.width && p.z > 0 && p.z < s.height;
}

}  // namespace

dsp::AudioClip image_method_rir(const RoomScene& scene, const Vec3& src, const Vec3& mic,
                                std::size_t length, const RirOptions& opt) {
  require(length > 0, ErrorCode::kInvalidInput, "RIR length must be positive");
  require(scene.depth > 0 && scene.width > 0 && scene.height > 0, ErrorCode::kInvalidInput,
          "room dimensions must be positive");
  require(scene.reflection >= 0.0 && scene.reflection < 1.0, ErrorCode::kInvalidInput,
          "reflection coefficient must lie in [0, 1)");
  require(strictly_inside(src, scene), ErrorCode::kInvalidInput, "source outside the room");
  require(strictly_inside(mic, scene), ErrorCode::kInvalidInput, "microphone outside the room");
  require(opt.sound_speed > 0 && opt.sample_rate > 0, ErrorCode::kInvalidInput,
          "sound speed and sample rate must be positive");

  dsp::AudioClip out;
  out.sample_rate = opt.sample_rate;
  out.samples.assign(length, 0.0);

  const double per_metre = opt.sample_rate / opt.sound_speed;
  const double reach = (static_cast<double>(length) + kSincHalfTaps) / per_metre;
  const double reach2 = reach * reach;
  const auto ix = axis_images(src.x, mic.x, scene.depth, reach);
  const auto iy = axis_images(src.y, mic.y, scene.width, reach);
  const auto iz = axis_images(src.z, mic.z, scene.height, reach);
  const double beta = scene.reflection;
  const int cap = opt.max_order;
  constexpr double kFourPi = 4.0 * std::numbers::pi;

  for (const auto& ax : ix) {
    const double dx2 = ax.offset * ax.offset;
    if (dx2 > reach2 || (cap >= 0 && ax.order > cap)) continue;
    for (const auto& ay : iy) {
      const double dxy2 = dx2 + ay.offset * ay.offset;
      if (dxy2 > reach2 || (cap >= 0 && ax.order + ay.order > cap)) continue;
      for (const auto& az : iz) {
        const double d2 = dxy2 + az.offset * az.offset;
        const int order = ax.order + ay.order + az.order;
        if (d2 > reach2 || (cap >= 0 && order > cap)) continue;
        const double gain = order == 0 ? 1.0 : std::pow(beta, order);
        if (gain == 0.0) continue;
        const double d = std::sqrt(d2);
        add_fractional_impulse(out.samples, d * per_metre, gain / (kFourPi * d));
      }
    }
  }
  return out;
}

std::size_t rir_length(const RoomScene& scene, int sample_rate) {
  double far = 0.0;
  for (const auto& m : scene.mics) far = std::max(far, distance(scene.speaker, m));
  return static_cast<std::size_t>(std::ceil((scene.t60 + far / kSoundSpeed) * sample_rate)) +
         kSincHalfTaps + 1;
}

dsp::AudioClip convolve(const dsp::AudioClip& clip, const dsp::AudioClip& rir) {
  require(!clip.samples.empty() && !rir.samples.empty(), ErrorCode::kInvalidInput,
          "convolution of an empty signal");
  require(clip.sample_rate == rir.sample_rate, ErrorCode::kInvalidInput,
          "convolution operands have different sample rates");
  const std::size_t n = clip.samples.size();
  const std::size_t m = std::min(rir.samples.size(), n);  // later taps never reach the kept span
  const std::size_t len = dsp::next_pow2(n + m - 1);
  auto& fft = dsp::real_fft(len);

  std::vector<double> a(len, 0.0), b(len, 0.0);
  std::copy(clip.samples.begin(), clip.samples.end(), a.begin());
  std::copy(rir.samples.begin(), rir.samples.begin() + static_cast<long>(m), b.begin());
  std::vector<std::complex<double>> fa(fft.bins()), fb(fft.bins());
  fft.forward(a, fa);
  fft.forward(b, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.inverse(fa, a);

  dsp::AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(a.begin(), a.begin() + static_cast<long>(n));
  return out;
}

}  // namespace picknet::sim
