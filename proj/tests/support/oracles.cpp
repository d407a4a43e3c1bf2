#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include "picknet/sim/rir.hpp"

namespace oracle {

std::vector<double> naive_conv3x3(const std::vector<double>& in, std::size_t c_in, std::size_t h,
                                  std::size_t w, const std::vector<double>& kernels,
                                  const std::vector<double>& bias, std::size_t c_out) {
  std::vector<double> out(c_out * h * w);
  for (std::size_t co = 0; co < c_out; ++co)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double s = bias[co];
        for (std::size_t ci = 0; ci < c_in; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const long sy = static_cast<long>(y) + ky - 1, sx = static_cast<long>(x) + kx - 1;
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
              s += kernels[((co * c_in + ci) * 3 + ky) * 3 + kx] * in[(ci * h + sy) * w + sx];
            }
        out[(co * h + y) * w + x] = s;
      }
  return out;
}

std::vector<double> direct_convolution(const std::vector<double>& x, const std::vector<double>& h,
                                       std::size_t out_len) {
  std::vector<double> y(out_len, 0.0);
  for (std::size_t n = 0; n < out_len; ++n)
    for (std::size_t k = 0; k < x.size() && k <= n; ++k)
      if (n - k < h.size()) y[n] += x[k] * h[n - k];
  return y;
}

std::complex<double> direct_dft(const std::vector<double>& x, std::size_t k) {
  std::complex<double> s = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k * i % x.size()) / n;
    s += x[i] * std::complex<double>(std::cos(a), std::sin(a));
  }
  return s;
}

std::vector<double> sqrt_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n));
  return w;
}

std::vector<double> brute_force_rir(const picknet::sim::RoomScene& scene, const picknet::sim::Vec3& src,
                                    const picknet::sim::Vec3& mic, std::size_t length, int max_order,
                                    double c, int fs) {
  std::vector<double> h(length, 0.0);
  const double L[3] = {scene.depth, scene.width, scene.height};
  const double s[3] = {src.x, src.y, src.z};
  const double r[3] = {mic.x, mic.y, mic.z};
  const int N = max_order + 1;
  for (int nx = -N; nx <= N; ++nx)
    for (int ny = -N; ny <= N; ++ny)
      for (int nz = -N; nz <= N; ++nz)
        for (int qx = 0; qx <= 1; ++qx)
          for (int qy = 0; qy <= 1; ++qy)
            for (int qz = 0; qz <= 1; ++qz) {
              const int n[3] = {nx, ny, nz}, q[3] = {qx, qy, qz};
              int order = 0;
              double d2 = 0.0;
              for (int a = 0; a < 3; ++a) {
                order += std::abs(n[a] - q[a]) + std::abs(n[a]);
                const double img = (1 - 2 * q[a]) * s[a] + 2.0 * n[a] * L[a];
                d2 += (img - r[a]) * (img - r[a]);
              }
              if (order > max_order) continue;
              const double d = std::sqrt(d2);
              const double amp = std::pow(scene.reflection, order) / (4.0 * std::numbers::pi * d);
              picknet::sim::add_fractional_impulse(h, d / c * fs, amp);
            }
  return h;
}

double schroeder_t60(const std::vector<double>& rir, int fs) {
  std::vector<double> edc(rir.size());
  double acc = 0.0;
  for (std::size_t i = rir.size(); i-- > 0;) {
    acc += rir[i] * rir[i];
    edc[i] = acc;
  }
  const double total = edc[0];
  // Least-squares line through the -5..-25 dB portion of the decay curve.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double db = 10.0 * std::log10(edc[i] / total);
    if (db > -5.0) continue;
    if (db < -25.0) break;
    const double t = static_cast<double>(i) / fs;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++n;
  }
  if (n < 2) throw std::runtime_error("decay curve too short for a T60 estimate");
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -60.0 / slope;
}

double welch_band_power(const std::vector<double>& x, int fs, double f_lo, double f_hi, std::size_t segment) {
  std::vector<double> win(segment);
  for (std::size_t i = 0; i < segment; ++i)
    win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / segment);
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k <= segment / 2; ++k) {
    const double f = static_cast<double>(k) * fs / segment;
    if (f >= f_lo && f < f_hi) bins.push_back(k);
  }
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> seg(segment);
  for (std::size_t start = 0; start + segment <= x.size(); start += segment / 2, ++count) {
    for (std::size_t i = 0; i < segment; ++i) seg[i] = x[start + i] * win[i];
    for (std::size_t k : bins) total += std::norm(direct_dft(seg, k));
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double frame_loss(const std::vector<double>& p, const std::vector<std::vector<double>>& amps,
                  const std::vector<double>& target) {
  double loss = 0.0;
  for (std::size_t f = 0; f < target.size(); ++f) {
    double mix = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) mix += p[m] * amps[m][f];
    loss += (mix - target[f]) * (mix - target[f]);
  }
  return loss;
}

namespace {

struct Map {
  std::size_t c, h, w;
  std::vector<double> v;
  double& at(std::size_t ci, std::size_t y, std::size_t x) { return v[(ci * h + y) * w + x]; }
};

}  // namespace

std::vector<double> reference_forward(const picknet::nn::ModelConfig& cfg,
                                      const std::vector<picknet::nn::NamedTensor<double>>& params,
                                      const std::vector<std::vector<double>>& patches) {
  using picknet::nn::LayerKind;
  std::map<std::string, const std::vector<double>*> P;
  for (const auto& p : params) P[p.name] = &p.tensor.data;
  auto get = [&](std::size_t layer, const char* what) -> const std::vector<double>& {
    return *P.at("layers." + std::to_string(layer) + "." + what);
  };

  const std::size_t M = patches.size();
  std::vector<Map> maps(M);
  for (std::size_t m = 0; m < M; ++m) maps[m] = {1, cfg.input_frames, cfg.input_dim, patches[m]};
  std::size_t pending_shared = 0;

  auto share_trailing = [&](std::size_t k) {
    const std::size_t c = maps[0].c, hw = maps[0].h * maps[0].w;
    for (std::size_t e = (c - k) * hw; e < c * hw; ++e) {
      double s = 0.0;
      for (std::size_t m = 0; m < M; ++m) s += maps[m].v[e];
      for (std::size_t m = 0; m < M; ++m) maps[m].v[e] = s / static_cast<double>(M);
    }
  };

  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& l = cfg.layers[i];
    switch (l.kind) {
      case LayerKind::kConv3x3:
        for (auto& mp : maps) {
          mp.v = naive_conv3x3(mp.v, mp.c, mp.h, mp.w, get(i, "weight"), get(i, "bias"), l.units);
          mp.c = l.units;
        }
        if (l.cross_channel) {
          const std::size_t k = l.units * l.xc_fraction.num / l.xc_fraction.den;
          if (cfg.pool_point == picknet::nn::PoolPoint::kBeforeBatchNorm) share_trailing(k);
          else pending_shared = k;
        }
        break;
      case LayerKind::kBatchNorm: {
        const auto &g = get(i, "gamma"), &b = get(i, "beta"), &rm = get(i, "running_mean"),
                   &rv = get(i, "running_var");
        for (auto& mp : maps)
          for (std::size_t c = 0; c < mp.c; ++c)
            for (std::size_t y = 0; y < mp.h; ++y)
              for (std::size_t x = 0; x < mp.w; ++x)
                mp.at(c, y, x) = g[c] * (mp.at(c, y, x) - rm[c]) / std::sqrt(rv[c] + 1e-5) + b[c];
        if (pending_shared) {
          share_trailing(pending_shared);
          pending_shared = 0;
        }
        break;
      }
      case LayerKind::kRelu:
        for (auto& mp : maps)
          for (auto& v : mp.v) v = std::max(v, 0.0);
        break;
      case LayerKind::kMaxPool2x2:
        for (auto& mp : maps) {
          Map o{mp.c, mp.h / 2, mp.w / 2, std::vector<double>(mp.c * (mp.h / 2) * (mp.w / 2))};
          for (std::size_t c = 0; c < o.c; ++c)
            for (std::size_t y = 0; y < o.h; ++y)
              for (std::size_t x = 0; x < o.w; ++x)
                o.at(c, y, x) = std::max(std::max(mp.at(c, 2 * y, 2 * x), mp.at(c, 2 * y, 2 * x + 1)),
                                         std::max(mp.at(c, 2 * y + 1, 2 * x), mp.at(c, 2 * y + 1, 2 * x + 1)));
          mp = std::move(o);
        }
        break;
      case LayerKind::kFlatten:
        for (auto& mp : maps) mp = {mp.v.size(), 1, 1, mp.v};
        break;
      case LayerKind::kDense: {
        const auto &w = get(i, "weight"), &b = get(i, "bias");
        for (auto& mp : maps) {
          std::vector<double> y(l.units);
          for (std::size_t o = 0; o < l.units; ++o) {
            double s = b[o];
            for (std::size_t k = 0; k < mp.c; ++k) s += w[o * mp.c + k] * mp.v[k];
            y[o] = s;
          }
          mp = {l.units, 1, 1, y};
        }
        break;
      }
    }
  }
  double mx = -1e300;
  for (const auto& mp : maps) mx = std::max(mx, mp.v[0]);
  std::vector<double> p(M);
  double total = 0.0;
  for (std::size_t m = 0; m < M; ++m) total += p[m] = std::exp(maps[m].v[0] - mx);
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace oracle
