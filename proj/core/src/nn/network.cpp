#include "picknet/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "picknet/error.hpp"
#include "picknet/nn/gemm.hpp"

namespace picknet::nn {
namespace {

// Kernel taps of a 3x3 convolution.
constexpr std::size_t kTaps = 9;

// Row (ci*9 + ky*3 + kx) of `col` holds the input shifted by (ky-1, kx-1),
// zero outside the map.
template <typename T>
void im2col(const T* x, const MapShape& s, T* col) {
  const std::size_t hw = s.h * s.w;
  for (std::size_t ci = 0; ci < s.c; ++ci) {
    const T* plane = x + ci * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* row = col + (ci * kTaps + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < s.h; ++y) {
          T* dst = row + y * s.w;
          const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(s.h)) {
            std::fill(dst, dst + s.w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * s.w;
          if (kx == 0) {
            dst[0] = T(0);
            std::copy(src, src + s.w - 1, dst + 1);
          } else if (kx == 1) {
            std::copy(src, src + s.w, dst);
          } else {
            std::copy(src + 1, src + s.w, dst);
            dst[s.w - 1] = T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back onto the input map.
template <typename T>
void col2im(const T* col, const MapShape& s, T* dx) {
  const std::size_t hw = s.h * s.w;
  for (std::size_t ci = 0; ci < s.c; ++ci) {
    T* plane = dx + ci * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* row = col + (ci * kTaps + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < s.h; ++y) {
          const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(s.h)) continue;
          T* dst = plane + static_cast<std::size_t>(sy) * s.w;
          const T* src = row + y * s.w;
          if (kx == 0) {
            for (std::size_t x = 1; x < s.w; ++x) dst[x - 1] += src[x];
          } else if (kx == 1) {
            for (std::size_t x = 0; x < s.w; ++x) dst[x] += src[x];
          } else {
            for (std::size_t x = 0; x + 1 < s.w; ++x) dst[x + 1] += src[x];
          }
        }
      }
    }
  }
}

// Sums split over fixed lanes so they vectorise; the result depends only on
// the data, not on the caller. Accumulation is at least double precision.
constexpr std::size_t kLanes = 8;

template <typename T>
using Acc = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>;

template <typename T, typename F>
Acc<T> lane_sum(const T* p, std::size_t n, F f) {
  Acc<T> lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += f(p[i + l]);
  for (std::size_t l = 0; i + l < n; ++l) lanes[l] += f(p[i + l]);
  Acc<T> s = 0.0;
  for (std::size_t l = 0; l < kLanes; ++l) s += lanes[l];
  return s;
}

template <typename T>
Acc<T> lane_dot(const T* a, const T* b, std::size_t n) {
  using A = Acc<T>;
  A lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += A(a[i + l]) * A(b[i + l]);
  for (std::size_t l = 0; i + l < n; ++l) lanes[l] += A(a[i + l]) * A(b[i + l]);
  A s = 0.0;
  for (std::size_t l = 0; l < kLanes; ++l) s += lanes[l];
  return s;
}

// Sum that does not depend on the order of `v` (sorted before adding), so a
// permutation of channels yields bitwise-identical results.
template <typename T>
T order_free_sum(T* v, std::size_t n) {
  if (n == 1) return v[0];
  if (n == 2) return v[0] + v[1];
  std::sort(v, v + n);
  T s = v[0];
  for (std::size_t i = 1; i < n; ++i) s += v[i];
  return s;
}

// Sums the channel values of one group; v holds `channels` entries spaced
// `stride` apart. Scratch is clobbered.
template <typename U>
U group_sum(const U* v, std::size_t channels, std::size_t stride, std::vector<U>& scratch) {
  if (channels == 1) return v[0];
  if (channels == 2) return v[0] + v[stride];
  scratch.resize(channels);
  for (std::size_t m = 0; m < channels; ++m) scratch[m] = v[m * stride];
  return order_free_sum(scratch.data(), channels);
}

// out[e] += sum over instances of per[n * len + e], channel order within a
// group never affecting the result.
template <typename U, typename V>
void reduce_instances(const std::vector<U>& per, std::size_t groups, std::size_t channels,
                      std::size_t len, V* out) {
  std::vector<U> scratch;
  for (std::size_t g = 0; g < groups; ++g) {
    const U* base = per.data() + g * channels * len;
    for (std::size_t e = 0; e < len; ++e) out[e] += static_cast<V>(group_sum(base + e, channels, len, scratch));
  }
}

std::string param_name(std::size_t layer, const char* what) {
  return "layers." + std::to_string(layer) + "." + what;
}

}  // namespace

template <typename T>
PickNet<T>::PickNet(ModelConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  MapShape shape{1, cfg_.input_frames, cfg_.input_dim};
  std::size_t pending_xc = 0;

  auto add_param = [&](std::size_t layer, const char* what, std::vector<std::size_t> dims,
                       bool trainable, T fill) {
    params_.push_back({param_name(layer, what), Tensor<T>(std::move(dims), fill)});
    trainable_.push_back(trainable);
  };

  for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
    const LayerSpec& l = cfg_.layers[i];
    Op op{};
    op.layer = i;
    op.in = shape;
    op.first_param = params_.size();
    switch (l.kind) {
      case LayerKind::kConv3x3: {
        op.kind = OpKind::kConv;
        op.out = {l.units, shape.h, shape.w};
        add_param(i, "weight", {l.units, shape.c, 3, 3}, true, T(0));
        add_param(i, "bias", {l.units}, true, T(0));
        ops_.push_back(op);
        shape = op.out;
        if (l.cross_channel) {
          if (cfg_.pool_point == PoolPoint::kBeforeBatchNorm) {
            ops_.push_back({OpKind::kCrossChannelPool, shape, shape, i, params_.size(),
                            l.cross_channel_kernels()});
          } else {
            pending_xc = l.cross_channel_kernels();
          }
        }
        continue;
      }
      case LayerKind::kBatchNorm:
        op.kind = OpKind::kBatchNorm;
        op.out = shape;
        add_param(i, "gamma", {shape.c}, true, T(1));
        add_param(i, "beta", {shape.c}, true, T(0));
        add_param(i, "running_mean", {shape.c}, false, T(0));
        add_param(i, "running_var", {shape.c}, false, T(1));
        ops_.push_back(op);
        if (pending_xc > 0) {
          ops_.push_back({OpKind::kCrossChannelPool, shape, shape, i, params_.size(), pending_xc});
          pending_xc = 0;
        }
        continue;
      case LayerKind::kRelu:
        op.kind = OpKind::kRelu;
        op.out = shape;
        break;
      case LayerKind::kMaxPool2x2:
        op.kind = OpKind::kMaxPool;
        op.out = {shape.c, shape.h / 2, shape.w / 2};
        break;
      case LayerKind::kFlatten:
        op.kind = OpKind::kFlatten;
        op.out = {shape.size(), 1, 1};
        break;
      case LayerKind::kDense:
        op.kind = OpKind::kDense;
        op.out = {l.units, 1, 1};
        add_param(i, "weight", {l.units, shape.size()}, true, T(0));
        add_param(i, "bias", {l.units}, true, T(0));
        break;
    }
    ops_.push_back(op);
    shape = op.out;
  }
}

template <typename T>
std::vector<NamedTensor<T>>& PickNet<T>::mutable_parameters() {
  ++version_;
  return params_;
}

template <typename T>
void PickNet<T>::initialize(std::uint64_t seed) {
  ++version_;
  std::mt19937_64 rng(seed);
  for (const Op& op : ops_) {
    if (op.kind != OpKind::kConv && op.kind != OpKind::kDense) continue;
    auto& w = params_[op.first_param].tensor;
    const std::size_t fan_in = w.size() / w.shape[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : w.data) v = static_cast<T>(dist(rng));
    std::fill(params_[op.first_param + 1].tensor.data.begin(),
              params_[op.first_param + 1].tensor.data.end(), T(0));
  }
  for (const Op& op : ops_) {
    if (op.kind != OpKind::kBatchNorm) continue;
    auto reset = [&](std::size_t k, T v) {
      auto& d = params_[op.first_param + k].tensor.data;
      std::fill(d.begin(), d.end(), v);
    };
    reset(0, T(1));
    reset(1, T(0));
    reset(2, T(0));
    reset(3, T(1));
  }
}

template <typename T>
ForwardResult<T> PickNet<T>::forward(std::span<const T> input, std::size_t groups,
                                     std::size_t channels, Mode mode,
                                     ForwardCache<T>* cache) const {
  require(groups >= 1 && channels >= 1, ErrorCode::kInvalidInput,
          "forward needs at least one example with one channel");
  const std::size_t n_inst = groups * channels;
  require(input.size() == n_inst * input_size(), ErrorCode::kInvalidConfig,
          "input size does not match the model's (frames x dim) patch shape");

  ForwardResult<T> result;
  // Buffers outlive the call (in the cache or per thread), which avoids
  // large reallocations on every frame or step.
  thread_local std::vector<std::vector<T>> scratch_outputs;
  auto& outputs = cache ? cache->outputs : scratch_outputs;
  outputs.resize(ops_.size());
  if (cache) {
    cache->valid = false;
    cache->mode = mode;
    cache->groups = groups;
    cache->channels = channels;
    cache->input.assign(input.begin(), input.end());
    cache->xhat.resize(ops_.size());
    cache->inv_std.resize(ops_.size());
    cache->batch_mean.assign(ops_.size(), {});
    cache->batch_var.assign(ops_.size(), {});
    cache->argmax.resize(ops_.size());
  }

  thread_local std::vector<T> col;
  const T* x = input.data();
  for (std::size_t oi = 0; oi < ops_.size(); ++oi) {
    const Op& op = ops_[oi];
    const std::size_t in_size = op.in.size(), out_size = op.out.size();
    auto& y = outputs[oi];
    y.resize(n_inst * out_size);

    switch (op.kind) {
      case OpKind::kConv: {
        const auto& w = params_[op.first_param].tensor.data;
        const auto& b = params_[op.first_param + 1].tensor.data;
        const std::size_t hw = op.in.h * op.in.w, k = op.in.c * kTaps;
        col.resize(k * hw);
        for (std::size_t n = 0; n < n_inst; ++n) {
          T* yn = y.data() + n * out_size;
          for (std::size_t co = 0; co < op.out.c; ++co) std::fill(yn + co * hw, yn + (co + 1) * hw, b[co]);
          im2col(x + n * in_size, op.in, col.data());
          gemm_nn<T>(op.out.c, hw, k, w.data(), k, col.data(), hw, yn, hw);
        }
        result.macs += static_cast<std::uint64_t>(n_inst) * op.out.c * k * hw;
        break;
      }
      case OpKind::kCrossChannelPool: {
        std::copy(x, x + n_inst * in_size, y.begin());
        const std::size_t hw = op.in.h * op.in.w;
        const std::size_t first = (op.in.c - op.shared_maps) * hw;
        std::vector<T> vals(channels);
        const T inv = T(1) / static_cast<T>(channels);
        for (std::size_t g = 0; g < groups; ++g) {
          const std::size_t base = g * channels * in_size;
          for (std::size_t e = first; e < in_size; ++e) {
            for (std::size_t m = 0; m < channels; ++m) vals[m] = x[base + m * in_size + e];
            const T mean = channels == 1 ? vals[0] : order_free_sum(vals.data(), channels) * inv;
            for (std::size_t m = 0; m < channels; ++m) y[base + m * in_size + e] = mean;
          }
        }
        // channels accumulations plus one scaling per shared element.
        result.macs += static_cast<std::uint64_t>(groups) * (in_size - first) * (channels + 1);
        break;
      }
      case OpKind::kBatchNorm: {
        const auto& gamma = params_[op.first_param].tensor.data;
        const auto& beta = params_[op.first_param + 1].tensor.data;
        const auto& rmean = params_[op.first_param + 2].tensor.data;
        const auto& rvar = params_[op.first_param + 3].tensor.data;
        const std::size_t hw = op.in.h * op.in.w;
        using A = Acc<T>;
        std::vector<A> mean(op.in.c), var(op.in.c), inv_std(op.in.c);
        if (mode == Mode::kTrain) {
          const A count = static_cast<A>(n_inst * hw);
          std::vector<A> part(n_inst * op.in.c), sum(op.in.c, 0.0);
          for (std::size_t n = 0; n < n_inst; ++n)
            for (std::size_t c = 0; c < op.in.c; ++c)
              part[n * op.in.c + c] = lane_sum(x + n * in_size + c * hw, hw, [](T v) { return A(v); });
          reduce_instances(part, groups, channels, op.in.c, sum.data());
          for (std::size_t c = 0; c < op.in.c; ++c) mean[c] = sum[c] / count;
          std::fill(sum.begin(), sum.end(), 0.0);
          for (std::size_t n = 0; n < n_inst; ++n)
            for (std::size_t c = 0; c < op.in.c; ++c) {
              const A mc = mean[c];
              part[n * op.in.c + c] = lane_sum(x + n * in_size + c * hw, hw, [mc](T v) {
                const A d = v - mc;
                return d * d;
              });
            }
          reduce_instances(part, groups, channels, op.in.c, sum.data());
          for (std::size_t c = 0; c < op.in.c; ++c) var[c] = sum[c] / count;
        } else {
          for (std::size_t c = 0; c < op.in.c; ++c) {
            mean[c] = rmean[c];
            var[c] = rvar[c];
          }
        }
        for (std::size_t c = 0; c < op.in.c; ++c) inv_std[c] = A(1) / std::sqrt(var[c] + A(kBatchNormEps));
        std::vector<T> unused;
        auto& xh = cache ? cache->xhat[oi] : unused;
        if (cache) xh.resize(n_inst * in_size);
        for (std::size_t n = 0; n < n_inst; ++n) {
          for (std::size_t c = 0; c < op.in.c; ++c) {
            const T m = static_cast<T>(mean[c]);
            const T is = static_cast<T>(inv_std[c]);
            const std::size_t off = n * in_size + c * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              const T v = (x[off + i] - m) * is;
              if (cache) xh[off + i] = v;
              y[off + i] = gamma[c] * v + beta[c];
            }
          }
        }
        if (cache) {
          cache->inv_std[oi].assign(inv_std.begin(), inv_std.end());
          if (mode == Mode::kTrain) {
            cache->batch_mean[oi].assign(mean.begin(), mean.end());
            cache->batch_var[oi].assign(var.begin(), var.end());
          }
        }
        break;
      }
      case OpKind::kRelu:
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        break;
      case OpKind::kMaxPool: {
        std::vector<std::uint32_t> unused;
        auto& am = cache ? cache->argmax[oi] : unused;
        if (cache) am.resize(y.size());
        const std::size_t ihw = op.in.h * op.in.w, ohw = op.out.h * op.out.w;
        for (std::size_t n = 0; n < n_inst; ++n) {
          for (std::size_t c = 0; c < op.in.c; ++c) {
            const T* src = x + n * in_size + c * ihw;
            const std::size_t ob = n * out_size + c * ohw;
            for (std::size_t oy = 0; oy < op.out.h; ++oy) {
              for (std::size_t ox = 0; ox < op.out.w; ++ox) {
                std::size_t best = (2 * oy) * op.in.w + 2 * ox;
                for (std::size_t idx : {best + 1, best + op.in.w, best + op.in.w + 1})
                  if (src[idx] > src[best]) best = idx;
                y[ob + oy * op.out.w + ox] = src[best];
                if (cache) am[ob + oy * op.out.w + ox] = static_cast<std::uint32_t>(c * ihw + best);
              }
            }
          }
        }
        break;
      }
      case OpKind::kFlatten:
        std::copy(x, x + n_inst * in_size, y.begin());
        break;
      case OpKind::kDense: {
        const auto& w = params_[op.first_param].tensor.data;
        const auto& b = params_[op.first_param + 1].tensor.data;
        for (std::size_t n = 0; n < n_inst; ++n) {
          const T* xn = x + n * in_size;
          T* yn = y.data() + n * out_size;
          for (std::size_t o = 0; o < out_size; ++o) yn[o] = b[o] + dot(w.data() + o * in_size, xn, in_size);
        }
        result.macs += static_cast<std::uint64_t>(n_inst) * in_size * out_size;
        break;
      }
    }
    x = y.data();
  }

  result.logits.assign(x, x + n_inst);
  result.posteriors.resize(n_inst);
  std::vector<T> e(channels), scratch(channels);
  for (std::size_t g = 0; g < groups; ++g) {
    const T* z = result.logits.data() + g * channels;
    const T mx = *std::max_element(z, z + channels);
    for (std::size_t m = 0; m < channels; ++m) e[m] = std::exp(z[m] - mx);
    scratch = e;
    const T total = order_free_sum(scratch.data(), channels);
    for (std::size_t m = 0; m < channels; ++m) result.posteriors[g * channels + m] = e[m] / total;
  }

  if (cache) {
    cache->posteriors = result.posteriors;
    cache->version = version_;
    cache->valid = true;
  }
  return result;
}

template <typename T>
std::vector<Tensor<T>> PickNet<T>::backward(const ForwardCache<T>& cache,
                                            std::span<const T> d_posteriors) const {
  require(cache.valid, ErrorCode::kInvalidState, "backward called without a forward cache");
  require(cache.version == version_, ErrorCode::kInvalidState,
          "forward cache is stale: parameters changed since the forward pass");
  const std::size_t n_inst = cache.groups * cache.channels;
  require(d_posteriors.size() == n_inst, ErrorCode::kInvalidInput,
          "d_posteriors size does not match the cached forward pass");

  std::vector<Tensor<T>> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.emplace_back(p.tensor.shape, T(0));

  // Softmax: dz_m = p_m (dp_m - sum_k p_k dp_k).
  // The per-op gradient buffers are large; keeping them between calls saves
  // the page faults of fresh allocations on every training step.
  thread_local std::vector<T> d, dx, col, dcol, wt;
  d.resize(n_inst);
  std::vector<T> prod(cache.channels), scratch;
  for (std::size_t g = 0; g < cache.groups; ++g) {
    const T* p = cache.posteriors.data() + g * cache.channels;
    const T* dp = d_posteriors.data() + g * cache.channels;
    for (std::size_t m = 0; m < cache.channels; ++m) prod[m] = p[m] * dp[m];
    const T s = group_sum(prod.data(), cache.channels, 1, scratch);
    for (std::size_t m = 0; m < cache.channels; ++m) d[g * cache.channels + m] = p[m] * (dp[m] - s);
  }

  for (std::size_t oi = ops_.size(); oi-- > 0;) {
    const Op& op = ops_[oi];
    const std::size_t in_size = op.in.size(), out_size = op.out.size();
    const T* x = oi == 0 ? cache.input.data() : cache.outputs[oi - 1].data();
    const auto& y = cache.outputs[oi];
    const bool need_dx = oi > 0;
    dx.assign(need_dx ? n_inst * in_size : 0, T(0));

    switch (op.kind) {
      case OpKind::kConv: {
        const auto& w = params_[op.first_param].tensor.data;
        auto& gw = grads[op.first_param].data;
        auto& gb = grads[op.first_param + 1].data;
        const std::size_t hw = op.in.h * op.in.w, k = op.in.c * kTaps;
        col.resize(k * hw);
        if (need_dx) {
          wt.resize(k * op.out.c);
          for (std::size_t co = 0; co < op.out.c; ++co)
            for (std::size_t kk = 0; kk < k; ++kk) wt[kk * op.out.c + co] = w[co * k + kk];
          dcol.resize(k * hw);
        }
        // Per-instance weight gradients of one group, combined order-free.
        // With many input maps dW^T = col * dY^T runs faster as a plain
        // product; the single-map first layer keeps the dot-product form.
        const bool transposed = op.in.c > 1;
        const std::size_t wlen = op.out.c * k;
        std::vector<T> gw_inst(cache.channels * wlen), gb_inst(cache.channels * op.out.c);
        std::vector<T> gw_group(transposed ? wlen : 0), dt(transposed ? hw * op.out.c : 0);
        for (std::size_t n = 0; n < n_inst; ++n) {
          const std::size_t m = n % cache.channels;
          if (m == 0) {
            std::fill(gw_inst.begin(), gw_inst.end(), T(0));
            std::fill(gb_inst.begin(), gb_inst.end(), T(0));
          }
          const T* dn = d.data() + n * out_size;
          im2col(x + n * in_size, op.in, col.data());
          if (transposed) {
            for (std::size_t co = 0; co < op.out.c; ++co)
              for (std::size_t i = 0; i < hw; ++i) dt[i * op.out.c + co] = dn[co * hw + i];
            gemm_nn<T>(k, op.out.c, hw, col.data(), hw, dt.data(), op.out.c, gw_inst.data() + m * wlen, op.out.c);
          } else {
            gemm_nt<T>(op.out.c, k, hw, dn, hw, col.data(), hw, gw_inst.data() + m * wlen, k);
          }
          for (std::size_t co = 0; co < op.out.c; ++co) {
            T s = 0;
            for (std::size_t i = 0; i < hw; ++i) s += dn[co * hw + i];
            gb_inst[m * op.out.c + co] = s;
          }
          if (m + 1 == cache.channels) {
            if (transposed) {
              std::fill(gw_group.begin(), gw_group.end(), T(0));
              reduce_instances(gw_inst, 1, cache.channels, wlen, gw_group.data());
              for (std::size_t kk = 0; kk < k; ++kk)
                for (std::size_t co = 0; co < op.out.c; ++co) gw[co * k + kk] += gw_group[kk * op.out.c + co];
            } else {
              reduce_instances(gw_inst, 1, cache.channels, wlen, gw.data());
            }
            reduce_instances(gb_inst, 1, cache.channels, op.out.c, gb.data());
          }
          if (need_dx) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            gemm_nn<T>(k, hw, op.out.c, wt.data(), op.out.c, dn, hw, dcol.data(), hw);
            col2im(dcol.data(), op.in, dx.data() + n * in_size);
          }
        }
        break;
      }
      case OpKind::kCrossChannelPool: {
        if (!need_dx) break;
        std::copy(d.begin(), d.end(), dx.begin());
        const std::size_t hw = op.in.h * op.in.w;
        const std::size_t first = (op.in.c - op.shared_maps) * hw;
        const T inv = T(1) / static_cast<T>(cache.channels);
        for (std::size_t g = 0; g < cache.groups; ++g) {
          const std::size_t base = g * cache.channels * in_size;
          for (std::size_t e = first; e < in_size; ++e) {
            const T s = group_sum(d.data() + base + e, cache.channels, in_size, scratch);
            const T share = cache.channels == 1 ? s : s * inv;
            for (std::size_t m = 0; m < cache.channels; ++m) dx[base + m * in_size + e] = share;
          }
        }
        break;
      }
      case OpKind::kBatchNorm: {
        const auto& gamma = params_[op.first_param].tensor.data;
        auto& gg = grads[op.first_param].data;
        auto& gbeta = grads[op.first_param + 1].data;
        const auto& xh = cache.xhat[oi];
        const auto& inv_std = cache.inv_std[oi];
        const std::size_t hw = op.in.h * op.in.w;
        const double count = static_cast<double>(n_inst * hw);
        std::vector<double> part_d(n_inst * op.in.c), part_dx(n_inst * op.in.c);
        std::vector<double> sums_d(op.in.c, 0.0), sums_dx(op.in.c, 0.0);
        for (std::size_t n = 0; n < n_inst; ++n)
          for (std::size_t c = 0; c < op.in.c; ++c) {
            const std::size_t off = n * in_size + c * hw;
            const T* dp = d.data() + off;
            const T* xp = xh.data() + off;
            part_d[n * op.in.c + c] = lane_sum(dp, hw, [](T v) { return double(v); });
            part_dx[n * op.in.c + c] = lane_dot(dp, xp, hw);
          }
        reduce_instances(part_d, cache.groups, cache.channels, op.in.c, sums_d.data());
        reduce_instances(part_dx, cache.groups, cache.channels, op.in.c, sums_dx.data());
        for (std::size_t c = 0; c < op.in.c; ++c) {
          const double sum_d = sums_d[c], sum_dx = sums_dx[c];
          gg[c] += static_cast<T>(sum_dx);
          gbeta[c] += static_cast<T>(sum_d);
          if (!need_dx) continue;
          if (cache.mode == Mode::kTrain) {
            const double scale = gamma[c] * inv_std[c] / count;
            for (std::size_t n = 0; n < n_inst; ++n) {
              const std::size_t off = n * in_size + c * hw;
              for (std::size_t i = 0; i < hw; ++i)
                dx[off + i] = static_cast<T>(scale * (count * d[off + i] - sum_d - xh[off + i] * sum_dx));
            }
          } else {
            const T scale = static_cast<T>(gamma[c] * inv_std[c]);
            for (std::size_t n = 0; n < n_inst; ++n) {
              const std::size_t off = n * in_size + c * hw;
              for (std::size_t i = 0; i < hw; ++i) dx[off + i] = d[off + i] * scale;
            }
          }
        }
        break;
      }
      case OpKind::kRelu:
        if (need_dx)
          for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = y[i] > T(0) ? d[i] : T(0);
        break;
      case OpKind::kMaxPool: {
        if (!need_dx) break;
        const auto& am = cache.argmax[oi];
        for (std::size_t n = 0; n < n_inst; ++n)
          for (std::size_t j = 0; j < out_size; ++j)
            dx[n * in_size + am[n * out_size + j]] += d[n * out_size + j];
        break;
      }
      case OpKind::kFlatten:
        if (need_dx) std::copy(d.begin(), d.end(), dx.begin());
        break;
      case OpKind::kDense: {
        const auto& w = params_[op.first_param].tensor.data;
        auto& gw = grads[op.first_param].data;
        auto& gb = grads[op.first_param + 1].data;
        const std::size_t mc = cache.channels;
        std::vector<T> vals(mc);
        for (std::size_t grp = 0; grp < cache.groups; ++grp) {
          const std::size_t n0 = grp * mc;
          const T* xg = x + n0 * in_size;
          const T* dg = d.data() + n0 * out_size;
          for (std::size_t o = 0; o < out_size; ++o) {
            gb[o] += group_sum(dg + o, mc, out_size, scratch);
            T* gwo = gw.data() + o * in_size;
            if (mc == 1) {
              const T g0 = dg[o];
              for (std::size_t i = 0; i < in_size; ++i) gwo[i] += g0 * xg[i];
            } else if (mc == 2) {
              const T g0 = dg[o], g1 = dg[out_size + o];
              const T* x1 = xg + in_size;
              for (std::size_t i = 0; i < in_size; ++i) gwo[i] += g0 * xg[i] + g1 * x1[i];
            } else {
              for (std::size_t i = 0; i < in_size; ++i) {
                for (std::size_t m = 0; m < mc; ++m) vals[m] = dg[m * out_size + o] * xg[m * in_size + i];
                gwo[i] += order_free_sum(vals.data(), mc);
              }
            }
          }
        }
        if (need_dx) {
          for (std::size_t n = 0; n < n_inst; ++n) {
            const T* dn = d.data() + n * out_size;
            T* dxn = dx.data() + n * in_size;
            for (std::size_t o = 0; o < out_size; ++o) {
              const T g = dn[o];
              const T* wo = w.data() + o * in_size;
              for (std::size_t i = 0; i < in_size; ++i) dxn[i] += wo[i] * g;
            }
          }
        }
        break;
      }
    }
    d.swap(dx);
  }
  return grads;
}

template <typename T>
void PickNet<T>::update_running_stats(const ForwardCache<T>& cache, double momentum) {
  require(cache.valid && cache.mode == Mode::kTrain, ErrorCode::kInvalidState,
          "running statistics need a train-mode forward cache");
  ++version_;
  const std::size_t n_inst = cache.groups * cache.channels;
  for (std::size_t oi = 0; oi < ops_.size(); ++oi) {
    const Op& op = ops_[oi];
    if (op.kind != OpKind::kBatchNorm) continue;
    const double count = static_cast<double>(n_inst * op.in.h * op.in.w);
    const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
    auto& rm = params_[op.first_param + 2].tensor.data;
    auto& rv = params_[op.first_param + 3].tensor.data;
    for (std::size_t c = 0; c < op.in.c; ++c) {
      rm[c] = static_cast<T>(momentum * rm[c] + (1.0 - momentum) * cache.batch_mean[oi][c]);
      rv[c] = static_cast<T>(momentum * rv[c] + (1.0 - momentum) * cache.batch_var[oi][c] * unbias);
    }
  }
}

template <typename T>
std::uint64_t PickNet<T>::mac_count(std::size_t channels) const {
  std::uint64_t total = 0;
  for (const Op& op : ops_) {
    switch (op.kind) {
      case OpKind::kConv:
        total += static_cast<std::uint64_t>(channels) * op.out.c * op.in.c * kTaps * op.in.h * op.in.w;
        break;
      case OpKind::kDense:
        total += static_cast<std::uint64_t>(channels) * op.in.size() * op.out.size();
        break;
      case OpKind::kCrossChannelPool:
        total += static_cast<std::uint64_t>(op.shared_maps) * op.in.h * op.in.w * (channels + 1);
        break;
      default:
        break;
    }
  }
  return total;
}

template <typename T>
ChannelPosteriors picknet_forward(const PickNet<T>& net, std::span<const dsp::FeaturePatch> patches,
                                  Mode mode, ForwardCache<T>* cache) {
  require(!patches.empty(), ErrorCode::kInvalidInput, "need at least one channel");
  const std::size_t per = net.input_size();
  std::vector<T> input(patches.size() * per);
  for (std::size_t m = 0; m < patches.size(); ++m) {
    require(patches[m].dim == net.config().input_dim &&
                patches[m].values.size() == per,
            ErrorCode::kInvalidConfig, "patch feature dimension does not match the model");
    std::transform(patches[m].values.begin(), patches[m].values.end(),
                   input.begin() + static_cast<std::ptrdiff_t>(m * per),
                   [](double v) { return static_cast<T>(v); });
  }
  const auto r = net.forward(input, 1, patches.size(), mode, cache);
  ChannelPosteriors out;
  out.frame = patches.front().center_index;
  out.p.assign(r.posteriors.begin(), r.posteriors.end());
  return out;
}

template class PickNet<float>;
template class PickNet<double>;
template class PickNet<long double>;
template ChannelPosteriors picknet_forward<float>(const PickNet<float>&,
                                                  std::span<const dsp::FeaturePatch>, Mode,
                                                  ForwardCache<float>*);
template ChannelPosteriors picknet_forward<double>(const PickNet<double>&,
                                                   std::span<const dsp::FeaturePatch>, Mode,
                                                   ForwardCache<double>*);

}  // namespace picknet::nn
