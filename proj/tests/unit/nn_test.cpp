#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "oracles.hpp"
#include "picknet/error.hpp"
#include "picknet/nn/checkpoint.hpp"
#include "picknet/nn/gemm.hpp"
#include "picknet/nn/network.hpp"
#include "picknet/train/dataset.hpp"
#include "picknet/train/trainer.hpp"

using namespace picknet::nn;
using picknet::dsp::FeaturePatch;

namespace {

std::vector<double> posteriors(const PickNet<double>& net, const std::vector<FeaturePatch>& in) {
  return picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kEval).p;
}

std::vector<std::size_t> permutation_of(std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> q(m);
  std::iota(q.begin(), q.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(q.begin(), q.end(), rng);
  return q;
}

ModelConfig single_layer(std::size_t frames, std::size_t dim, LayerSpec conv) {
  ModelConfig cfg;
  cfg.input_frames = frames;
  cfg.input_dim = dim;
  cfg.layers = {conv, flatten(), dense(1)};
  return cfg;
}

}  // namespace

TEST_CASE("gemm kernels match naive products") {
  for (auto [m, n, k] : {std::tuple{1ul, 1ul, 1ul}, {5ul, 37ul, 9ul}, {8ul, 64ul, 33ul}, {13ul, 50ul, 200ul}}) {
    const auto a = testing::gaussian(m * k, m + n), b = testing::gaussian(k * n, k), bt = testing::gaussian(n * k, 3);
    std::vector<double> c(m * n, 0.5), ct(m * n, 0.5);
    gemm_nn<double>(m, n, k, a.data(), k, b.data(), n, c.data(), n);
    gemm_nt<double>(m, n, k, a.data(), k, bt.data(), k, ct.data(), n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.5, st = 0.5;
        for (std::size_t p = 0; p < k; ++p) {
          s += a[i * k + p] * b[p * n + j];
          st += a[i * k + p] * bt[j * k + p];
        }
        CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-12));
        CHECK(ct[i * n + j] == doctest::Approx(st).epsilon(1e-12));
      }
  }
}

TEST_CASE("conv3x3 forward") {
  SUBCASE("identity kernel reproduces the input") {
    PickNet<double> net(single_layer(5, 6, conv3x3(1)));
    net.mutable_parameters()[0].tensor.data[4] = 1.0;
    const auto in = testing::random_patches(net.config(), 1, 1);
    ForwardCache<double> cache;
    picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kEval, &cache);
    CHECK(cache.outputs[0] == in[0].values);
  }
  SUBCASE("all-ones kernel sums the window") {
    PickNet<double> net(single_layer(5, 6, conv3x3(1)));
    std::fill(net.mutable_parameters()[0].tensor.data.begin(), net.mutable_parameters()[0].tensor.data.end(), 1.0);
    std::vector<FeaturePatch> in(1);
    in[0].dim = 6;
    in[0].values.assign(30, 0.25);
    ForwardCache<double> cache;
    picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kEval, &cache);
    for (std::size_t y = 1; y < 4; ++y)
      for (std::size_t x = 1; x < 5; ++x) CHECK(cache.outputs[0][y * 6 + x] == doctest::Approx(9 * 0.25));
    CHECK(cache.outputs[0][0] == doctest::Approx(4 * 0.25));
  }
  SUBCASE("random multi-map input matches the naive loop") {
    ModelConfig cfg;
    cfg.input_frames = 4;
    cfg.input_dim = 4;
    cfg.layers = {conv3x3(2), conv3x3(3), flatten(), dense(1)};
    PickNet<double> net(cfg);
    net.initialize(5);
    auto& ps = net.mutable_parameters();
    ps[1].tensor.data = testing::gaussian(2, 77);
    ps[3].tensor.data = testing::gaussian(3, 78);
    const auto in = testing::random_patches(cfg, 1, 2);
    ForwardCache<double> cache;
    picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kEval, &cache);
    const auto& first = cache.outputs[0];
    const auto ref = oracle::naive_conv3x3(first, 2, 4, 4, ps[2].tensor.data, ps[3].tensor.data, 3);
    REQUIRE(ref.size() == cache.outputs[1].size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(cache.outputs[1][i] == doctest::Approx(ref[i]).epsilon(1e-10));
  }
}

TEST_CASE("batch norm") {
  ModelConfig cfg;
  cfg.input_frames = 6;
  cfg.input_dim = 5;
  cfg.layers = {conv3x3(3), batch_norm(), flatten(), dense(1)};
  PickNet<double> net(cfg);
  net.initialize(9);
  const auto in = testing::random_patches(cfg, 3, 4);
  SUBCASE("eval mode with unit statistics is the identity") {
    ForwardCache<double> cache;
    picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kEval, &cache);
    for (std::size_t i = 0; i < cache.outputs[0].size(); ++i)
      CHECK(cache.outputs[1][i] == doctest::Approx(cache.outputs[0][i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
  }
  SUBCASE("train mode normalises every map over the batch") {
    auto& ps = net.mutable_parameters();
    ps[2].tensor.data = {1.5, 0.5, 2.0};
    ps[3].tensor.data = {0.1, -0.2, 0.3};
    ForwardCache<double> cache;
    picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kTrain, &cache);
    const auto& x = cache.outputs[0];
    const auto& y = cache.outputs[1];
    const auto& xh = cache.xhat[1];
    const std::size_t hw = 30, per = 90;
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0, var = 0, xm = 0, xv = 0;
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t i = 0; i < hw; ++i) {
          mean += x[n * per + c * hw + i];
          xm += xh[n * per + c * hw + i];
        }
      mean /= 90.0;
      xm /= 90.0;
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t i = 0; i < hw; ++i) {
          const double v = x[n * per + c * hw + i];
          var += (v - mean) * (v - mean);
          xv += (xh[n * per + c * hw + i] - xm) * (xh[n * per + c * hw + i] - xm);
        }
      var /= 90.0;
      xv /= 90.0;
      CHECK(std::abs(xm) < 1e-5);
      CHECK(std::abs(xv - var / (var + 1e-5)) < 1e-5);
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t e = n * per + c * hw + i;
          const double ref = ps[2].tensor.data[c] * (x[e] - mean) / std::sqrt(var + 1e-5) + ps[3].tensor.data[c];
          CHECK(y[e] == doctest::Approx(ref).epsilon(1e-10));
        }
    }
  }
}

TEST_CASE("cross-channel layer") {
  SUBCASE("shared map is the channel mean, by hand") {
    ModelConfig cfg = single_layer(2, 2, conv3x3(2, true, {1, 2}));
    PickNet<double> net(cfg);
    auto& w = net.mutable_parameters()[0].tensor.data;
    w[4] = 1.0;      // map 0: identity
    w[9 + 4] = 1.0;  // map 1: identity, then averaged across channels
    std::vector<FeaturePatch> in(2);
    in[0].dim = in[1].dim = 2;
    in[0].values = {1.0, 2.0, 3.0, 4.0};
    in[1].values = {5.0, -2.0, 0.0, 8.0};
    ForwardCache<double> cache;
    picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kEval, &cache);
    const auto& y = cache.outputs[1];
    const std::vector<double> a_own{1, 2, 3, 4}, b_own{5, -2, 0, 8}, shared{3, 0, 1.5, 6};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(y[i] == a_own[i]);
      CHECK(y[4 + i] == shared[i]);
      CHECK(y[8 + i] == b_own[i]);
      CHECK(y[12 + i] == shared[i]);
    }
  }
  SUBCASE("one channel reduces to a plain convolution") {
    const auto cfg = testing::tiny_config(true);
    PickNet<double> xc(cfg), plain(testing::tiny_config(false));
    xc.initialize(3);
    plain.mutable_parameters() = xc.parameters();
    const auto in = testing::random_patches(cfg, 1, 6);
    ForwardCache<double> a, b;
    picknet_forward(xc, std::span<const FeaturePatch>(in), Mode::kTrain, &a);
    picknet_forward(plain, std::span<const FeaturePatch>(in), Mode::kTrain, &b);
    CHECK(a.posteriors == b.posteriors);
    CHECK(a.outputs.back() == b.outputs.back());
  }
  SUBCASE("swapping inputs swaps outputs bitwise") {
    const auto cfg = testing::tiny_config(true);
    PickNet<float> net(cfg);
    net.initialize(12);
    const auto in = testing::random_patches(cfg, 3, 8);
    std::vector<FeaturePatch> sw{in[2], in[1], in[0]};
    ForwardCache<float> a, b;
    picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kEval, &a);
    picknet_forward(net, std::span<const FeaturePatch>(sw), Mode::kEval, &b);
    const std::size_t per = a.outputs[4].size() / 3;
    for (std::size_t oi : {4ul, 5ul}) {
      for (std::size_t i = 0; i < per; ++i) {
        CHECK(a.outputs[oi][i] == b.outputs[oi][2 * per + i]);
        CHECK(a.outputs[oi][per + i] == b.outputs[oi][per + i]);
      }
    }
  }
}

TEST_CASE("forward against an independent reference") {
  SUBCASE("tiny model, loud channel 0") {
    const auto cfg = testing::tiny_config(true);
    PickNet<double> net(cfg);
    net.initialize(2024);
    testing::randomise_batch_norm(net, 7);
    auto in = testing::random_patches(cfg, 2, 5);
    for (std::size_t i = 0; i < in[0].values.size(); ++i) in[0].values[i] = 10.0 * in[1].values[i];
    const auto p = posteriors(net, in);
    const auto ref = oracle::reference_forward(cfg, net.parameters(), {in[0].values, in[1].values});
    for (std::size_t m = 0; m < 2; ++m) CHECK(p[m] == doctest::Approx(ref[m]).epsilon(1e-8));
  }
  SUBCASE("pooling after batch norm") {
    auto cfg = testing::tiny_config(true);
    cfg.pool_point = PoolPoint::kAfterBatchNorm;
    PickNet<double> net(cfg);
    net.initialize(99);
    testing::randomise_batch_norm(net, 9);
    const auto in = testing::random_patches(cfg, 3, 10);
    const auto p = posteriors(net, in);
    const auto ref = oracle::reference_forward(cfg, net.parameters(), {in[0].values, in[1].values, in[2].values});
    for (std::size_t m = 0; m < 3; ++m) CHECK(p[m] == doctest::Approx(ref[m]).epsilon(1e-8));
  }
}

TEST_CASE("softmax output properties") {
  PickNet<double> net(testing::tiny_config());
  net.initialize(4);
  testing::randomise_batch_norm(net, 4);
  for (std::size_t m = 1; m <= 6; ++m) {
    const auto p = posteriors(net, testing::random_patches(net.config(), m, m));
    double s = 0;
    for (double v : p) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  auto same = testing::random_patches(net.config(), 1, 3);
  same = {same[0], same[0], same[0], same[0]};
  for (double v : posteriors(net, same)) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("property: permutation equivariance in both precisions") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::size_t m = 2 + seed % 5;
    PickNet<double> net(testing::tiny_config());
    net.initialize(seed);
    testing::randomise_batch_norm(net, seed);
    const PickNet<float> netf = net.cast<float>();
    const auto in = testing::random_patches(net.config(), m, seed + 50);
    const auto q = permutation_of(m, seed);
    std::vector<FeaturePatch> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = in[q[i]];
    const auto p = posteriors(net, in), pp = posteriors(net, perm);
    const auto pf = picknet_forward(netf, std::span<const FeaturePatch>(in), Mode::kEval).p;
    const auto ppf = picknet_forward(netf, std::span<const FeaturePatch>(perm), Mode::kEval).p;
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(std::abs(pp[i] - p[q[i]]) <= 1e-10);
      CHECK(std::abs(ppf[i] - pf[q[i]]) <= 1e-5);
    }
  }
}

TEST_CASE("property: a two-channel model runs for any channel count") {
  PickNet<float> net(default_model_config());
  net.initialize(1);
  for (std::size_t m : {1ul, 3ul, 7ul, 16ul}) {
    const auto p = picknet_forward(net, std::span<const FeaturePatch>(testing::random_patches(net.config(), m, m)), Mode::kEval).p;
    CHECK(p.size() == m);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("without cross-channel layers each channel is scored independently") {
  const auto cfg = without_cross_channel(testing::tiny_config());
  PickNet<double> net(cfg);
  net.initialize(31);
  testing::randomise_batch_norm(net, 31);
  const auto in = testing::random_patches(cfg, 4, 2);
  std::vector<double> joint_input, logits_alone;
  for (const auto& p : in) joint_input.insert(joint_input.end(), p.values.begin(), p.values.end());
  const auto joint = net.forward(joint_input, 1, 4, Mode::kEval);
  for (const auto& p : in) logits_alone.push_back(net.forward(p.values, 1, 1, Mode::kEval).logits[0]);
  CHECK(joint.logits == logits_alone);
}

TEST_CASE("MAC counter is affine in the channel count") {
  PickNet<float> net(default_model_config());
  const auto c1 = net.mac_count(1), c2 = net.mac_count(2), c4 = net.mac_count(4), c8 = net.mac_count(8);
  const auto b = c2 - c1, a = c1 - b;
  CHECK(c4 == a + 4 * b);
  CHECK(c8 == a + 8 * b);
  std::vector<float> in(3 * net.input_size(), 0.1f);
  CHECK(net.forward(in, 1, 3, Mode::kEval).macs == net.mac_count(3));
}

TEST_CASE("backward") {
  const auto cfg = testing::tiny_config();
  PickNet<double> net(cfg);
  net.initialize(8);
  const auto in = testing::random_patches(cfg, 2, 17);
  ForwardCache<double> cache;
  picknet_forward(net, std::span<const FeaturePatch>(in), Mode::kTrain, &cache);
  SUBCASE("zero upstream gradient gives zero gradients") {
    const std::vector<double> zero(2, 0.0);
    for (const auto& g : net.backward(cache, zero))
      for (double v : g.data) CHECK(v == 0.0);
  }
  SUBCASE("identical channels contribute symmetrically") {
    const std::vector<FeaturePatch> same{in[0], in[0]};
    ForwardCache<double> c2;
    picknet_forward(net, std::span<const FeaturePatch>(same), Mode::kTrain, &c2);
    const std::vector<double> d1{0.3, -0.7}, d2{-0.7, 0.3};
    const auto g1 = net.backward(c2, d1), g2 = net.backward(c2, d2);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i].data == g2[i].data);
  }
  SUBCASE("stale cache is rejected") {
    net.mutable_parameters();
    CHECK_THROWS_AS(net.backward(cache, std::vector<double>(2, 0.1)), picknet::Error);
  }
}

TEST_CASE("finite-difference gradient check on a tiny model") {
  using picknet::train::FrameExample;
  for (bool xc : {true, false}) {
    for (std::size_t m : {1ul, 2ul, 3ul}) {
      CAPTURE(xc);
      CAPTURE(m);
      const auto cfg = testing::tiny_config(xc);
      PickNet<double> net(cfg);
      net.initialize(40 + m);
      FrameExample ex;
      ex.patches = testing::random_patches(cfg, m, 60 + m);
      ex.target_amp = testing::uniform(12, 70 + m, 0.0, 1.0);
      ex.channel_amps = testing::uniform(12 * m, 80 + m, 0.0, 1.5);
      for (auto mode : {Mode::kTrain, Mode::kEval}) {
        picknet::train::GradientCheckOptions opt;
        opt.mode = mode;
        const auto rep = picknet::train::gradient_check(net, ex, opt);
        CAPTURE(rep.worst);
        CHECK(rep.max_rel_error < 1e-4);
        CHECK(rep.entries > 100);
      }
    }
  }
}

TEST_CASE("gradient check on a zero patch") {
  using picknet::train::FrameExample;
  const auto cfg = testing::tiny_config();
  PickNet<double> net(cfg);
  net.initialize(3);
  FrameExample ex;
  ex.patches = testing::random_patches(cfg, 2, 1);
  for (auto& p : ex.patches) std::fill(p.values.begin(), p.values.end(), 0.0);
  ex.target_amp = testing::uniform(12, 2, 0.0, 1.0);
  ex.channel_amps = testing::uniform(24, 3, 0.0, 1.0);
  picknet::train::GradientCheckOptions opt;
  opt.mode = Mode::kEval;
  CHECK(picknet::train::gradient_check(net, ex, opt).max_abs_error < 1e-6);
}

TEST_CASE("checkpoints") {
  testing::TempDir dir("ckpt");
  PickNet<float> net(default_model_config());
  net.initialize(77);
  testing::randomise_batch_norm(net, 77);
  const auto ck = make_checkpoint(net, R"({"note":"x"})");
  save_checkpoint(ck, dir / "a.pknt");
  SUBCASE("round trip is bitwise and forward is unchanged") {
    const auto back = load_checkpoint(dir / "a.pknt");
    CHECK(back == ck);
    const auto net2 = network_from_checkpoint<float>(back);
    std::vector<float> in(2 * net.input_size());
    const auto g = testing::gaussian(in.size(), 5);
    std::copy(g.begin(), g.end(), in.begin());
    CHECK(net.forward(in, 1, 2, Mode::kEval).logits == net2.forward(in, 1, 2, Mode::kEval).logits);
  }
  auto bytes = serialize(ck);
  SUBCASE("corrupted magic") {
    bytes[0] = 'X';
    try {
      deserialize(bytes);
      FAIL("expected an error");
    } catch (const picknet::Error& e) {
      CHECK(e.code() == picknet::ErrorCode::kMagicMismatch);
    }
  }
  SUBCASE("flipped payload byte") {
    bytes[bytes.size() / 2] ^= 0x40;
    try {
      deserialize(bytes);
      FAIL("expected an error");
    } catch (const picknet::Error& e) {
      CHECK(e.code() == picknet::ErrorCode::kChecksumMismatch);
    }
  }
  SUBCASE("truncated file") {
    bytes.resize(bytes.size() - 7);
    try {
      deserialize(bytes);
      FAIL("expected an error");
    } catch (const picknet::Error& e) {
      CHECK(e.code() == picknet::ErrorCode::kTruncated);
    }
  }
  SUBCASE("unsupported version") {
    bytes[4] = 9;
    try {
      deserialize(bytes);
      FAIL("expected an error");
    } catch (const picknet::Error& e) {
      CHECK(e.code() == picknet::ErrorCode::kUnsupportedVersion);
    }
  }
}

TEST_CASE("model config json and validation") {
  auto cfg = default_model_config();
  CHECK(model_config_from_json(to_json(cfg)) == cfg);
  cfg.pool_point = PoolPoint::kAfterBatchNorm;
  CHECK(model_config_from_json(to_json(cfg)) == cfg);
  ModelConfig bad = cfg;
  bad.layers.pop_back();
  CHECK_THROWS_AS(validate(bad), picknet::Error);
  bad = cfg;
  bad.layers[4].xc_fraction = {1, 3};
  CHECK_THROWS_AS(validate(bad), picknet::Error);
  bad = cfg;
  bad.layers.insert(bad.layers.begin(), dense(4));
  CHECK_THROWS_AS(validate(bad), picknet::Error);
  CHECK(without_cross_channel(cfg).layers[4].cross_channel == false);
}
