#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "oracles.hpp"
#include "picknet/error.hpp"
#include "picknet/sim/noise.hpp"
#include "picknet/sim/rir.hpp"
#include "picknet/sim/room.hpp"
#include "picknet/sim/simulate.hpp"
#include "picknet/sim/speech_synth.hpp"

using namespace picknet::sim;
using testing::clip_of;

namespace {

double power(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

RoomScene small_scene(std::uint64_t seed) {
  const auto u = testing::uniform(12, seed);
  RoomScene s;
  s.depth = 2.0 + 2.0 * u[0];
  s.width = 2.0 + 2.0 * u[1];
  s.height = 2.0 + 1.0 * u[2];
  s.reflection = 0.3 + 0.6 * u[3];
  s.speaker = {0.2 + (s.depth - 0.4) * u[4], 0.2 + (s.width - 0.4) * u[5], 0.2 + (s.height - 0.4) * u[6]};
  s.mics = {{0.2 + (s.depth - 0.4) * u[7], 0.2 + (s.width - 0.4) * u[8], 0.2 + (s.height - 0.4) * u[9]}};
  return s;
}

}  // namespace

TEST_CASE("property: sampled rooms satisfy every range constraint") {
  const SceneLimits lim;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto s = sample_room(seed);
    REQUIRE(s.mics.size() == 2);
    CHECK(s.depth >= 5.0);
    CHECK(s.depth <= 16.0);
    CHECK(s.width >= 5.0);
    CHECK(s.width <= 16.0);
    CHECK(s.height >= 2.5);
    CHECK(s.height <= 4.5);
    CHECK(s.t60 >= 0.2);
    CHECK(s.t60 <= 0.6);
    const double h = horizontal_distance(s.speaker, s.mics[0]);
    CHECK(h >= 0.30);
    CHECK(h <= 0.70);
    const double dz = std::abs(s.speaker.z - s.mics[0].z);
    CHECK(dz >= lim.near_vert_min);
    CHECK(dz <= lim.near_vert_max);
    const double pair = distance(s.mics[0], s.mics[1]);
    CHECK(pair >= 1.0);
    CHECK(pair <= 4.0);
    CHECK_NOTHROW(validate_scene(s));
    CHECK(eyring_t60(s.reflection, s.depth, s.width, s.height) == doctest::Approx(s.t60).epsilon(1e-9));
  }
  CHECK(sample_room(42) == sample_room(42));
  CHECK_FALSE(sample_room(42) == sample_room(43));
}

TEST_CASE("scene validation names the violated constraint") {
  auto s = sample_room(3);
  s.depth = 20.0;
  try {
    validate_scene(s);
    FAIL("expected an error");
  } catch (const picknet::Error& e) {
    CHECK(e.code() == picknet::ErrorCode::kOutOfRange);
  }
}

TEST_CASE("Eyring inversion") {
  const double beta = t60_to_reflection(0.5, 6, 6, 3);
  CHECK(eyring_t60(beta, 6, 6, 3) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(t60_to_reflection(0.2, 6, 6, 3) < t60_to_reflection(0.6, 6, 6, 3));
  // Asking for (nearly) the shortest possible decay leaves (nearly) no reflection.
  CHECK(t60_to_reflection(1e-3, 6, 6, 3) < 1e-6);
  CHECK_THROWS_AS(t60_to_reflection(0.0, 6, 6, 3), picknet::Error);
}

TEST_CASE("free-field RIR is one impulse with 1/(4 pi d) gain") {
  RoomScene s;
  s.depth = 8;
  s.width = 8;
  s.height = 4;
  s.reflection = 0.0;
  const double d = 70.0 * 343.0 / 16000.0;  // an integer delay of 70 samples
  const Vec3 src{2.0, 4.0, 2.0}, mic{2.0 + d, 4.0, 2.0};
  const auto h = image_method_rir(s, src, mic, 400);
  CHECK(h.samples[70] == doctest::Approx(1.0 / (4.0 * std::numbers::pi * d)).epsilon(1e-9));
  for (std::size_t i = 0; i < h.size(); ++i)
    if (i != 70) CHECK(std::abs(h.samples[i]) < 1e-15);
}

TEST_CASE("property: truncated-order RIR equals brute-force image enumeration") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = small_scene(seed);
    RirOptions opt;
    opt.max_order = 2;
    const auto h = image_method_rir(s, s.speaker, s.mics[0], 2048, opt);
    const auto ref = oracle::brute_force_rir(s, s.speaker, s.mics[0], 2048, 2);
    double worst = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(h.samples[i] - ref[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("Schroeder decay of generated RIRs matches the requested T60") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = sample_room(1000 + seed);
    const auto h = image_method_rir(s, s.speaker, s.mics[1], rir_length(s));
    const double est = oracle::schroeder_t60(h.samples, 16000);
    INFO("seed ", 1000 + seed, ": target ", s.t60, " s, Schroeder ", est, " s");
    CHECK(std::abs(est - s.t60) <= 0.25 * s.t60);
  }
}

TEST_CASE("property: the near mic's direct path dominates a mic over 1 m away") {
  std::size_t tested = 0;
  for (std::uint64_t seed = 0; tested < 100; ++seed) {
    auto s = sample_room(5000 + seed);
    const double d1 = distance(s.speaker, s.mics[1]);
    if (d1 <= 1.0) continue;
    ++tested;
    s.t60 = 0.2;
    s.reflection = t60_to_reflection(0.2, s.depth, s.width, s.height);
    const auto h0 = image_method_rir(s, s.speaker, s.mics[0], 1200);
    double peak = 0;
    for (double v : h0.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak > 1.0 / (4.0 * std::numbers::pi * d1));
  }
}

TEST_CASE("convolution") {
  const auto x = testing::gaussian(1000, 1);
  SUBCASE("unit impulse is the identity") {
    std::vector<double> h(30, 0.0);
    h[0] = 1.0;
    const auto y = convolve(clip_of(x), clip_of(h));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.samples[i] == doctest::Approx(x[i]).epsilon(1e-12));
  }
  SUBCASE("delayed impulse shifts") {
    std::vector<double> h(30, 0.0);
    h[17] = 1.0;
    const auto y = convolve(clip_of(x), clip_of(h));
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(std::abs(y.samples[i] - (i >= 17 ? x[i - 17] : 0.0)) < 1e-12);
  }
  SUBCASE("random pair matches the direct sum") {
    const auto h = testing::gaussian(1000, 2);
    const auto y = convolve(clip_of(x), clip_of(h));
    const auto ref = oracle::direct_convolution(x, h, x.size());
    REQUIRE(y.size() == x.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.samples[i] - ref[i]) < 1e-10);
  }
}

TEST_CASE("Hoth noise") {
  const auto n = hoth_noise(160000, 5);
  CHECK(std::sqrt(power(n.samples)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(hoth_noise(4000, 9).samples == hoth_noise(4000, 9).samples);
  // One-third-octave bands around 250 Hz and 2 kHz.
  const double r = std::pow(2.0, 1.0 / 6.0);
  const double low = oracle::welch_band_power(n.samples, 16000, 250.0 / r, 250.0 * r);
  const double high = oracle::welch_band_power(n.samples, 16000, 2000.0 / r, 2000.0 * r);
  CHECK(high < low);
}

TEST_CASE("mixing at an SNR") {
  SUBCASE("unit powers at 10 dB") {
    std::vector<double> ones(1000, 1.0), alt(1000);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 1.0 : -1.0;
    CHECK(snr_gain(clip_of(ones), clip_of(alt), 10.0) == doctest::Approx(std::pow(10.0, -0.5)).epsilon(1e-12));
    CHECK(snr_gain(clip_of(ones), clip_of(alt), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("property: re-measured SNR equals the request") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = testing::gaussian(3000, seed, 0.2), n = testing::gaussian(3000, seed + 99, 1.3);
      const double want = testing::uniform(1, seed, -5.0, 30.0)[0];
      const auto y = mix_at_snr(clip_of(s), clip_of(n), want);
      std::vector<double> diff(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) diff[i] = y.samples[i] - s[i];
      CHECK(std::abs(10.0 * std::log10(power(s) / power(diff)) - want) < 0.01);
    }
  }
  SUBCASE("silent noise is rejected") {
    CHECK_THROWS_AS(snr_gain(clip_of(std::vector<double>(10, 1.0)), clip_of(std::vector<double>(10, 0.0)), 10.0),
                    picknet::Error);
  }
}

TEST_CASE("property: transient injection touches one channel inside its interval") {
  const auto transients = synthetic_transients();
  REQUIRE(transients.size() == 10);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t m = 2 + seed % 3;
    std::vector<picknet::dsp::AudioClip> clips;
    for (std::size_t c = 0; c < m; ++c) clips.push_back(clip_of(testing::gaussian(32000, seed * 7 + c, 0.05)));
    TransientEvent ev;
    const auto out = inject_transient(clips, transients[seed % 10], seed, &ev);
    CHECK(ev.length >= 1600);
    CHECK(ev.length <= 4800);
    CHECK(std::abs(ev.level_db) <= 5.0);
    std::size_t unchanged = 0;
    for (std::size_t c = 0; c < m; ++c) {
      if (out[c].samples == clips[c].samples) {
        ++unchanged;
        continue;
      }
      CHECK(c == ev.channel);
      for (std::size_t i = 0; i < clips[c].size(); ++i)
        if (i < ev.onset || i >= ev.onset + ev.length) REQUIRE(out[c].samples[i] == clips[c].samples[i]);
    }
    CHECK(unchanged == m - 1);
  }
}

TEST_CASE("training samples") {
  const auto clean = synthesize_speech(4, 3.0);
  SimulationOptions opt;
  opt.inject_transient = false;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto s = make_training_sample(clean, seed, {}, opt);
    CHECK(s.near_index == 0);
    REQUIRE(s.noisy.size() == 2);
    CHECK_NOTHROW(validate_scene(s.scene));
    for (std::size_t m = 0; m < 2; ++m) {
      CHECK(convolve(clean, s.rirs[m]).samples == s.clean_reverb[m].samples);
      std::vector<double> noise(clean.size());
      for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = s.noisy[m].samples[i] - s.clean_reverb[m].samples[i];
      const double snr = 10.0 * std::log10(power(s.clean_reverb[m].samples) / power(noise));
      CHECK(snr >= 10.0 - 1e-6);
      CHECK(snr <= 20.0 + 1e-6);
      CHECK(snr == doctest::Approx(s.snr_db[m]).epsilon(1e-6));
      const double level = 10.0 * std::log10(power(s.clean_reverb[m].samples));
      CHECK(level >= -30.0 - 1e-6);
      CHECK(level <= -20.0 + 1e-6);
    }
  }
  const auto a = make_training_sample(clean, 9, synthetic_transients());
  const auto b = make_training_sample(clean, 9, synthetic_transients());
  CHECK(a.noisy[0].samples == b.noisy[0].samples);
  CHECK(a.noisy[1].samples == b.noisy[1].samples);
  CHECK(a.transient.has_value());
}

TEST_CASE("synthetic speech") {
  const auto s = synthesize_speech(1, 2.5);
  CHECK(s.size() == 40000);
  CHECK(std::sqrt(power(s.samples)) == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(synthesize_speech(1, 2.5).samples == s.samples);
  CHECK_FALSE(synthesize_speech(2, 2.5).samples == s.samples);
}

TEST_CASE("long clips are split") {
  const auto parts = split_clip(clip_of(std::vector<double>(25 * 16000, 0.1)));
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].size() == 160000);
  CHECK(parts[2].size() == 80000);
}

TEST_CASE("dataset simulation and manifest") {
  testing::TempDir dir("sim");
  std::vector<std::pair<std::string, picknet::dsp::AudioClip>> clean{{"a.wav", synthesize_speech(1, 2.0)},
                                                                   {"b.wav", synthesize_speech(2, 2.0)}};
  DatasetSpec spec;
  spec.n_samples = 4;
  spec.seed = 17;
  const auto recs = simulate_dataset(clean, synthetic_transients(), dir.path(), spec);
  REQUIRE(recs.size() == 4);
  const auto back = read_manifest(dir / "manifest.jsonl");
  REQUIRE(back.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back[i].id == recs[i].id);
    CHECK(back[i].scene == recs[i].scene);
    CHECK(back[i].snr_db == recs[i].snr_db);
    CHECK(manifest_record_from_json(to_json_line(recs[i])).seed == recs[i].seed);
    const auto loaded = load_sample(dir.path(), back[i]);
    CHECK(loaded.noisy.size() == 2);
    CHECK(loaded.clean.size() == 2);
  }
  SUBCASE("a record with an out-of-range scene is rejected on load") {
    auto bad = recs;
    bad[1].scene.height = 9.0;
    write_manifest(dir / "bad.jsonl", bad);
    CHECK_THROWS_AS(read_manifest(dir / "bad.jsonl"), picknet::Error);
  }
}
