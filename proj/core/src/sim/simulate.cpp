#include "picknet/sim/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "picknet/dsp/wav.hpp"
#include "picknet/error.hpp"
#include "picknet/seed.hpp"
#include "picknet/sim/rir.hpp"

namespace picknet::sim {

using nlohmann::json;
namespace fs = std::filesystem;

TrainingSample make_training_sample(const dsp::AudioClip& clean, std::uint64_t seed,
                                    const std::vector<dsp::AudioClip>& transients,
                                    const SimulationOptions& opt) {
  dsp::validate(clean);
  require(!clean.samples.empty(), ErrorCode::kInvalidInput, "clean clip is empty");
  require(dsp::mean_square(clean.samples) > 0.0, ErrorCode::kInvalidInput, "clean clip is silent");
  require(opt.snr_min_db <= opt.snr_max_db && opt.level_min_dbfs <= opt.level_max_dbfs,
          ErrorCode::kInvalidConfig, "inverted simulation range");

  std::mt19937_64 rng(derive_seed(seed, 0));
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  TrainingSample out;
  out.scene = sample_room(derive_seed(seed, 1), opt.n_mics, opt.limits);
  out.near_index = 0;
  const std::size_t len = rir_length(out.scene, clean.sample_rate);
  RirOptions ro;
  ro.sample_rate = clean.sample_rate;

  for (std::size_t m = 0; m < opt.n_mics; ++m) {
    dsp::AudioClip h = image_method_rir(out.scene, out.scene.speaker, out.scene.mics[m], len, ro);
    double gain_db = 0.0;
    if (opt.device_level_normalization) {
      const dsp::AudioClip raw = convolve(clean, h);
      const double target = uni(opt.level_min_dbfs, opt.level_max_dbfs);
      gain_db = target - 20.0 * std::log10(dsp::rms(raw.samples));
      const double g = std::pow(10.0, gain_db / 20.0);
      for (auto& v : h.samples) v *= g;
    }
    out.device_gain_db.push_back(gain_db);
    out.clean_reverb.push_back(convolve(clean, h));
    out.rirs.push_back(std::move(h));
  }

  for (std::size_t m = 0; m < opt.n_mics; ++m) {
    const double snr = uni(opt.snr_min_db, opt.snr_max_db);
    const dsp::AudioClip noise = hoth_noise(clean.size(), derive_seed(seed, 100 + m), clean.sample_rate);
    out.snr_db.push_back(snr);
    out.noisy.push_back(mix_at_snr(out.clean_reverb[m], noise, snr));
  }

  if (opt.inject_transient && !transients.empty()) {
    std::mt19937_64 pick_rng(derive_seed(seed, 2));
    const std::size_t which = std::uniform_int_distribution<std::size_t>(0, transients.size() - 1)(pick_rng);
    TransientEvent ev;
    out.noisy = inject_transient(out.noisy, transients[which], derive_seed(seed, 3), &ev);
    ev.clip_index = which;
    out.transient = ev;
  }
  return out;
}

std::vector<dsp::AudioClip> split_clip(const dsp::AudioClip& clip, double max_seconds) {
  require(max_seconds > 0.0, ErrorCode::kInvalidConfig, "split length must be positive");
  const auto chunk = static_cast<std::size_t>(std::floor(max_seconds * clip.sample_rate));
  std::vector<dsp::AudioClip> out;
  if (clip.size() <= chunk) {
    out.push_back(clip);
    return out;
  }
  for (std::size_t at = 0; at < clip.size(); at += chunk) {
    dsp::AudioClip piece;
    piece.sample_rate = clip.sample_rate;
    const std::size_t end = std::min(clip.size(), at + chunk);
    piece.samples.assign(clip.samples.begin() + static_cast<long>(at), clip.samples.begin() + static_cast<long>(end));
    out.push_back(std::move(piece));
  }
  return out;
}

namespace {

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j) {
  require(j.is_array() && j.size() == 3, ErrorCode::kInvalidInput, "position must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string to_json_line(const ManifestRecord& r) {
  json scene = {{"depth", r.scene.depth},   {"width", r.scene.width},
                {"height", r.scene.height}, {"t60", r.scene.t60},
                {"reflection", r.scene.reflection}, {"speaker", vec_json(r.scene.speaker)}};
  scene["mics"] = json::array();
  for (const auto& m : r.scene.mics) scene["mics"].push_back(vec_json(m));
  json j = {{"id", r.id},
            {"seed", r.seed},
            {"clean_source", r.clean_source},
            {"scene", scene},
            {"snr_db", r.snr_db},
            {"device_gain_db", r.device_gain_db},
            {"near_index", r.near_index},
            {"sample_rate", r.sample_rate},
            {"noisy", r.noisy},
            {"clean", r.clean}};
  if (r.transient) {
    const auto& t = *r.transient;
    j["transient"] = {{"channel", t.channel},
                      {"onset_s", static_cast<double>(t.onset) / r.sample_rate},
                      {"dur_s", static_cast<double>(t.length) / r.sample_rate},
                      {"onset", t.onset},
                      {"length", t.length},
                      {"level_db", t.level_db},
                      {"clip_index", t.clip_index}};
  } else {
    j["transient"] = nullptr;
  }
  return j.dump();
}

ManifestRecord manifest_record_from_json(const std::string& line) {
  ManifestRecord r;
  try {
    const json j = json::parse(line);
    r.id = j.at("id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.clean_source = j.value("clean_source", std::string{});
    const json& s = j.at("scene");
    r.scene.depth = s.at("depth").get<double>();
    r.scene.width = s.at("width").get<double>();
    r.scene.height = s.at("height").get<double>();
    r.scene.t60 = s.at("t60").get<double>();
    r.scene.reflection = s.at("reflection").get<double>();
    r.scene.speaker = vec_from(s.at("speaker"));
    for (const auto& m : s.at("mics")) r.scene.mics.push_back(vec_from(m));
    r.snr_db = j.at("snr_db").get<std::vector<double>>();
    r.device_gain_db = j.value("device_gain_db", std::vector<double>{});
    r.near_index = j.at("near_index").get<std::size_t>();
    r.sample_rate = j.value("sample_rate", 16000);
    r.noisy = j.at("noisy").get<std::vector<std::string>>();
    r.clean = j.at("clean").get<std::vector<std::string>>();
    if (j.contains("transient") && !j["transient"].is_null()) {
      const json& t = j["transient"];
      TransientEvent ev;
      ev.channel = t.at("channel").get<std::size_t>();
      ev.onset = t.at("onset").get<std::size_t>();
      ev.length = t.at("length").get<std::size_t>();
      ev.level_db = t.value("level_db", 0.0);
      ev.clip_index = t.value("clip_index", std::size_t{0});
      r.transient = ev;
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed manifest record: ") + e.what());
  }
  require(!r.noisy.empty() && r.noisy.size() == r.clean.size() && r.noisy.size() == r.scene.mics.size(),
          ErrorCode::kInvalidInput, "manifest record " + r.id + " has inconsistent channel lists");
  require(r.near_index < r.noisy.size(), ErrorCode::kInvalidInput,
          "manifest record " + r.id + " has near_index out of range");
  return r;
}

std::vector<ManifestRecord> read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open manifest " + manifest.string());
  std::vector<ManifestRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRecord r = manifest_record_from_json(line);
    validate_scene(r.scene);
    out.push_back(std::move(r));
  }
  require(!out.empty(), ErrorCode::kInvalidInput, "manifest " + manifest.string() + " has no records");
  return out;
}

void write_manifest(const fs::path& manifest, const std::vector<ManifestRecord>& records) {
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write manifest " + manifest.string());
  for (const auto& r : records) out << to_json_line(r) << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing manifest " + manifest.string());
}

LoadedSample load_sample(const fs::path& dir, const ManifestRecord& r) {
  LoadedSample s;
  s.near_index = r.near_index;
  for (const auto& p : r.noisy) s.noisy.push_back(dsp::read_wav(dir / p, r.sample_rate));
  for (const auto& p : r.clean) s.clean.push_back(dsp::read_wav(dir / p, r.sample_rate));
  for (const auto& c : s.noisy)
    require(c.size() == s.noisy.front().size(), ErrorCode::kInvalidInput,
            "channels of " + r.id + " differ in length");
  for (const auto& c : s.clean)
    require(c.size() == s.noisy.front().size(), ErrorCode::kInvalidInput,
            "clean channels of " + r.id + " differ in length");
  return s;
}

std::vector<std::pair<std::string, dsp::AudioClip>> load_clip_dir(const fs::path& dir, double max_seconds) {
  require(fs::is_directory(dir), ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, dsp::AudioClip>> out;
  for (const auto& f : files) {
    const auto pieces = split_clip(dsp::read_wav(f), max_seconds);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      std::string name = f.filename().string();
      if (pieces.size() > 1) name += "#" + std::to_string(i);
      out.emplace_back(std::move(name), pieces[i]);
    }
  }
  return out;
}

std::vector<ManifestRecord> simulate_dataset(const std::vector<std::pair<std::string, dsp::AudioClip>>& clean,
                                             const std::vector<dsp::AudioClip>& transients,
                                             const fs::path& out_dir, const DatasetSpec& spec) {
  require(!clean.empty(), ErrorCode::kInvalidInput, "no clean speech clips");
  std::error_code ec;
  fs::create_directories(out_dir / "wav", ec);
  require(!ec, ErrorCode::kIo, "cannot create " + (out_dir / "wav").string() + ": " + ec.message());

  std::vector<ManifestRecord> records;
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const std::uint64_t seed = derive_seed(spec.seed, i);
    const std::size_t which = static_cast<std::size_t>(derive_seed(seed, 7) % clean.size());
    const auto& [name, clip] = clean[which];
    TrainingSample s = make_training_sample(clip, seed, transients, spec.options);

    ManifestRecord r;
    char id[64];
    std::snprintf(id, sizeof(id), "%s%05zu", spec.id_prefix.c_str(), i);
    r.id = id;
    r.seed = seed;
    r.clean_source = name;
    r.scene = s.scene;
    r.snr_db = s.snr_db;
    r.device_gain_db = s.device_gain_db;
    r.transient = s.transient;
    r.near_index = s.near_index;
    r.sample_rate = clip.sample_rate;
    for (std::size_t m = 0; m < s.noisy.size(); ++m) {
      const std::string noisy = "wav/" + r.id + "_noisy" + std::to_string(m) + ".wav";
      const std::string cl = "wav/" + r.id + "_clean" + std::to_string(m) + ".wav";
      dsp::write_wav(out_dir / noisy, s.noisy[m]);
      dsp::write_wav(out_dir / cl, s.clean_reverb[m]);
      r.noisy.push_back(noisy);
      r.clean.push_back(cl);
    }
    records.push_back(std::move(r));
  }
  write_manifest(out_dir / "manifest.jsonl", records);
  return records;
}

}  // namespace picknet::sim
