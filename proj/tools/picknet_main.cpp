// picknet: simulate, train, enhance, eval and bench from the command line.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "picknet/dsp/wav.hpp"
#include "picknet/error.hpp"
#include "picknet/nn/checkpoint.hpp"
#include "picknet/nn/model_config.hpp"
#include "picknet/sim/noise.hpp"
#include "picknet/sim/simulate.hpp"
#include "picknet/stream/diarize.hpp"
#include "picknet/stream/evaluate.hpp"
#include "picknet/stream/pipeline.hpp"
#include "picknet/train/config_file.hpp"
#include "picknet/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using picknet::ErrorCode;
using picknet::require;
using picknet::train::ConfigTable;
using picknet::train::ConfigValue;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class JsonLog {
 public:
  void open(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::trunc);
    require(static_cast<bool>(out_), ErrorCode::kInvalidConfig, "cannot open log file " + path);
  }
  void write(const json& j) {
    if (out_.is_open()) out_ << j.dump() << '\n' << std::flush;
  }

 private:
  std::ofstream out_;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string log_path;
};

json value_json(const ConfigValue& v) {
  return std::visit(
      [](auto&& x) -> json {
        using X = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<X, ConfigValue::Array>) {
          json arr = json::array();
          for (const auto& e : x) std::visit([&](auto&& y) { arr.push_back(y); }, e);
          return arr;
        } else {
          return x;
        }
      },
      v.value);
}

json table_json(const ConfigTable& t) {
  json j = json::object();
  for (const auto& [k, v] : t) j[k] = value_json(v);
  return j;
}

const std::set<std::string> kSections = {"simulate", "train", "enhance", "eval", "bench"};

// defaults < config file < --set overrides < explicit flags; unknown keys rejected.
ConfigTable effective_config(const std::string& section, const Common& common, const ConfigTable& flags,
                             const std::set<std::string>& known) {
  ConfigTable out;
  if (!common.config_path.empty()) {
    for (const auto& [k, v] : picknet::train::load_config(common.config_path)) {
      std::string key = k;
      const auto dot = key.find('.');
      if (dot != std::string::npos) {
        const std::string owner = key.substr(0, dot);
        // one file may configure several subcommands
        if (owner != section && kSections.count(owner)) continue;
        if (owner == section) key = key.substr(dot + 1);
      }
      out[key] = v;
    }
  }
  picknet::train::merge_config(out, picknet::train::parse_overrides(common.overrides));
  picknet::train::merge_config(out, flags);
  for (const auto& [k, v] : out)
    require(known.count(k) > 0, ErrorCode::kInvalidConfig, "unknown configuration key '" + k + "' for " + section);
  return out;
}

template <typename T>
void put(ConfigTable& t, const std::string& key, const T& value) {
  ConfigValue v;
  if constexpr (std::is_same_v<T, bool>) v.value = value;
  else if constexpr (std::is_integral_v<T>) v.value = static_cast<std::int64_t>(value);
  else if constexpr (std::is_floating_point_v<T>) v.value = static_cast<double>(value);
  else v.value = std::string(value);
  t[key] = v;
}

std::string get_str(const ConfigTable& t, const std::string& k, const std::string& def) {
  auto it = t.find(k);
  return it == t.end() ? def : it->second.as_string(k);
}
double get_num(const ConfigTable& t, const std::string& k, double def) {
  auto it = t.find(k);
  return it == t.end() ? def : it->second.as_double(k);
}
std::uint64_t get_uint(const ConfigTable& t, const std::string& k, std::uint64_t def) {
  auto it = t.find(k);
  return it == t.end() ? def : it->second.as_uint(k);
}
bool get_bool(const ConfigTable& t, const std::string& k, bool def) {
  auto it = t.find(k);
  return it == t.end() ? def : it->second.as_bool(k);
}

picknet::nn::ModelCheckpoint load_checkpoint_checked(const std::string& path) {
  require(!path.empty(), ErrorCode::kInvalidConfig, "--checkpoint is required");
  require(fs::is_regular_file(path), ErrorCode::kInvalidConfig, "checkpoint not found: " + path);
  return picknet::nn::load_checkpoint(path);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string clean_dir, out_dir;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

int cmd_simulate(const Common& common, const SimulateArgs& a, CLI::App& sub, JsonLog& log) {
  ConfigTable flags;
  if (sub.count("--clean-dir")) put(flags, "clean_dir", a.clean_dir);
  if (sub.count("--out-dir")) put(flags, "out_dir", a.out_dir);
  if (sub.count("--n-samples")) put(flags, "n_samples", a.n_samples);
  if (sub.count("--seed")) put(flags, "seed", a.seed);
  const auto cfg = effective_config("simulate", common, flags,
                                    {"clean_dir", "out_dir", "n_samples", "seed", "snr_min_db", "snr_max_db",
                                     "level_min_dbfs", "level_max_dbfs", "device_level_normalization",
                                     "transients", "transient_dir", "max_clip_s", "id_prefix", "n_mics"});
  log.write({{"event", "config"}, {"command", "simulate"}, {"config", table_json(cfg)}});

  const std::string clean_dir = get_str(cfg, "clean_dir", "");
  const std::string out_dir = get_str(cfg, "out_dir", "");
  require(!clean_dir.empty() && !out_dir.empty(), ErrorCode::kInvalidConfig, "clean_dir and out_dir are required");
  picknet::sim::DatasetSpec spec;
  spec.n_samples = get_uint(cfg, "n_samples", 0);
  require(spec.n_samples > 0, ErrorCode::kInvalidConfig, "n_samples must be positive");
  spec.seed = get_uint(cfg, "seed", 0);
  spec.id_prefix = get_str(cfg, "id_prefix", "s");
  auto& o = spec.options;
  o.n_mics = get_uint(cfg, "n_mics", 2);
  o.snr_min_db = get_num(cfg, "snr_min_db", o.snr_min_db);
  o.snr_max_db = get_num(cfg, "snr_max_db", o.snr_max_db);
  o.level_min_dbfs = get_num(cfg, "level_min_dbfs", o.level_min_dbfs);
  o.level_max_dbfs = get_num(cfg, "level_max_dbfs", o.level_max_dbfs);
  o.device_level_normalization = get_bool(cfg, "device_level_normalization", true);
  o.inject_transient = get_bool(cfg, "transients", true);

  require(fs::is_directory(clean_dir), ErrorCode::kInvalidConfig, "clean_dir is not a directory: " + clean_dir);
  const auto clean = picknet::sim::load_clip_dir(clean_dir, get_num(cfg, "max_clip_s", 10.0));
  require(!clean.empty(), ErrorCode::kInvalidInput, "no .wav files in " + clean_dir);
  std::vector<picknet::dsp::AudioClip> transients;
  const std::string tdir = get_str(cfg, "transient_dir", "");
  if (tdir.empty()) {
    transients = picknet::sim::synthetic_transients();
  } else {
    for (auto& [name, clip] : picknet::sim::load_clip_dir(tdir)) transients.push_back(std::move(clip));
    require(!transients.empty(), ErrorCode::kInvalidInput, "no .wav files in " + tdir);
  }
  const auto records = picknet::sim::simulate_dataset(clean, transients, out_dir, spec);
  for (const auto& r : records) log.write({{"event", "sample"}, {"id", r.id}, {"seed", r.seed}});
  std::cout << "simulated " << records.size() << " samples into " << out_dir << " (manifest "
            << (fs::path(out_dir) / "manifest.jsonl").string() << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string manifest, out, resume;
  double learning_rate = 0;
  std::size_t batch_frames = 0, epochs = 0;
  std::string optimizer, feature_kind;
  std::uint64_t seed = 0;
};

int cmd_train(const Common& common, const TrainArgs& a, CLI::App& sub, JsonLog& log) {
  ConfigTable flags;
  if (sub.count("--manifest")) put(flags, "data_manifest", a.manifest);
  if (sub.count("--learning-rate")) put(flags, "learning_rate", a.learning_rate);
  if (sub.count("--batch-frames")) put(flags, "batch_frames", a.batch_frames);
  if (sub.count("--epochs")) put(flags, "epochs", a.epochs);
  if (sub.count("--optimizer")) put(flags, "optimizer", a.optimizer);
  if (sub.count("--feature-kind")) put(flags, "feature_kind", a.feature_kind);
  if (sub.count("--seed")) put(flags, "seed", a.seed);
  const auto cfg = effective_config("train", common, flags,
                                    {"learning_rate", "batch_frames", "epochs", "optimizer", "seed", "feature_kind",
                                     "data_manifest", "pool_point", "cross_channel"});
  picknet::train::TrainConfig tc;
  tc.learning_rate = get_num(cfg, "learning_rate", tc.learning_rate);
  tc.batch_frames = get_uint(cfg, "batch_frames", tc.batch_frames);
  tc.epochs = get_uint(cfg, "epochs", tc.epochs);
  tc.optimizer = picknet::train::optimizer_kind_from_string(get_str(cfg, "optimizer", "adam"));
  tc.seed = get_uint(cfg, "seed", 0);
  tc.feature_kind = picknet::dsp::feature_kind_from_string(get_str(cfg, "feature_kind", "logmel"));
  tc.data_manifest = get_str(cfg, "data_manifest", "");
  tc.validate();
  require(!tc.data_manifest.empty(), ErrorCode::kInvalidConfig, "a training manifest is required");
  require(!a.out.empty(), ErrorCode::kInvalidConfig, "--out is required");
  require(fs::is_regular_file(tc.data_manifest), ErrorCode::kInvalidConfig,
          "manifest not found: " + tc.data_manifest);

  auto model = picknet::nn::default_model_config(tc.feature_kind);
  const std::string pool = get_str(cfg, "pool_point", "before_bn");
  require(pool == "before_bn" || pool == "after_bn", ErrorCode::kInvalidConfig,
          "pool_point must be before_bn or after_bn");
  model.pool_point = pool == "after_bn" ? picknet::nn::PoolPoint::kAfterBatchNorm
                                        : picknet::nn::PoolPoint::kBeforeBatchNorm;
  if (!get_bool(cfg, "cross_channel", true)) model = picknet::nn::without_cross_channel(model);

  std::cout << "effective config: " << table_json(cfg).dump() << "\n";
  std::optional<picknet::train::Trainer> trainer;
  if (!a.resume.empty()) {
    require(fs::is_regular_file(a.resume), ErrorCode::kInvalidConfig, "resume checkpoint not found: " + a.resume);
    trainer.emplace(picknet::train::Trainer::resume(tc, a.resume));
  } else {
    trainer.emplace(tc, model);
  }
  const auto data = picknet::train::load_dataset(tc.data_manifest, tc.feature_kind);
  std::cout << "training on " << data.size() << " frames from " << data.sample_count() << " samples\n";
  double last = 0.0;
  trainer->run(
      data,
      [&](const picknet::train::StepLog& s) {
        last = s.mean_loss;
        log.write(json::parse(picknet::train::to_json_line(s)));
      },
      [&](std::size_t epoch) {
        trainer->save(a.out);
        std::cout << "epoch " << epoch << " done, step " << trainer->steps_done() << ", last loss " << last << "\n";
      });
  trainer->save(a.out);
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- enhance / eval shared

struct StreamArgs {
  std::size_t subsample_n = 3;
  bool no_smoothing = false;
  double ema = 0.0;
  bool no_sync = false;
};

picknet::stream::StreamConfig stream_config(const ConfigTable& cfg, const picknet::nn::ModelConfig& model) {
  picknet::stream::StreamConfig sc;
  sc.feature_kind = model.feature_kind;
  sc.subsample_n = get_uint(cfg, "subsample_n", sc.subsample_n);
  const std::string smoothing = get_str(cfg, "smoothing", "none");
  require(smoothing == "none" || smoothing == "ema", ErrorCode::kInvalidConfig, "smoothing must be none or ema");
  sc.smoothing = smoothing == "ema" ? picknet::stream::Smoothing::kEma : picknet::stream::Smoothing::kNone;
  sc.ema_alpha = get_num(cfg, "ema_alpha", sc.ema_alpha);
  sc.resync_interval = get_num(cfg, "resync_interval", sc.resync_interval);
  sc.sync_search = get_num(cfg, "sync_search", sc.sync_search);
  sc.sync_window = get_num(cfg, "sync_window", sc.sync_window);
  sc.synchronize = get_bool(cfg, "synchronize", true);
  sc.validate();
  return sc;
}

void stream_flags(ConfigTable& flags, const StreamArgs& a, CLI::App& sub) {
  if (sub.count("--subsample-n")) put(flags, "subsample_n", a.subsample_n);
  if (sub.count("--ema")) {
    put(flags, "smoothing", std::string("ema"));
    put(flags, "ema_alpha", a.ema);
  }
  if (sub.count("--no-smoothing")) put(flags, "smoothing", std::string("none"));
  if (sub.count("--no-sync")) put(flags, "synchronize", false);
}

const std::set<std::string> kStreamKeys = {"subsample_n",     "smoothing",   "ema_alpha", "resync_interval",
                                           "sync_search",     "sync_window", "synchronize"};

struct EnhanceArgs {
  std::vector<std::string> inputs;
  std::string checkpoint, out_prefix;
  bool timeline = false, rttm = false;
  double min_dur = 0.2;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  out << text;
}

int cmd_enhance(const Common& common, const EnhanceArgs& a, const StreamArgs& sa, CLI::App& sub, JsonLog& log) {
  ConfigTable flags;
  stream_flags(flags, sa, sub);
  if (sub.count("--min-dur")) put(flags, "min_dur", a.min_dur);
  auto keys = kStreamKeys;
  keys.insert("min_dur");
  const auto cfg = effective_config("enhance", common, flags, keys);
  require(!a.inputs.empty(), ErrorCode::kInvalidConfig, "at least one input WAV is required");
  require(!a.out_prefix.empty(), ErrorCode::kInvalidConfig, "--out-prefix is required");
  const auto ck = load_checkpoint_checked(a.checkpoint);
  const auto sc = stream_config(cfg, ck.config);
  log.write({{"event", "config"}, {"command", "enhance"}, {"config", table_json(cfg)}});

  std::vector<picknet::dsp::AudioClip> inputs;
  for (const auto& p : a.inputs) {
    require(fs::is_regular_file(p), ErrorCode::kInvalidConfig, "input not found: " + p);
    inputs.push_back(picknet::dsp::read_wav(p));
    require(inputs.back().sample_rate == inputs.front().sample_rate, ErrorCode::kInvalidInput,
            "sample-rate mismatch: " + p + " is at " + std::to_string(inputs.back().sample_rate) + " Hz");
  }
  auto model = std::make_shared<const picknet::nn::PickNet<float>>(picknet::nn::network_from_checkpoint<float>(ck));
  const auto res = picknet::stream::process_stream(inputs, model, sc);
  for (const auto& e : res.sync_events)
    log.write({{"event", e.failed ? "sync_warning" : "resync"},
               {"at_sample", e.at_sample},
               {"channel", e.channel},
               {"old_offset", e.old_offset},
               {"new_offset", e.new_offset},
               {"message", e.message}});

  const fs::path prefix(a.out_prefix);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  picknet::dsp::write_wav(fs::path(a.out_prefix + ".wav"), res.enhanced);
  if (a.timeline) write_text(a.out_prefix + ".timeline.jsonl", picknet::stream::to_jsonl(res.timeline));
  if (a.rttm && !res.timeline.entries.empty()) {
    const auto segs = picknet::stream::diarize(res.timeline, get_num(cfg, "min_dur", 0.2));
    write_text(a.out_prefix + ".rttm", picknet::stream::to_rttm(segs, prefix.filename().string()));
  }
  log.write({{"event", "enhance"},
             {"frames", res.stats.frames},
             {"model_evaluations", res.stats.model_evaluations},
             {"selection_seconds", res.stats.selection_seconds}});
  std::cout << "enhanced " << inputs.size() << " channel(s), " << res.stats.frames << " frames, "
            << res.stats.model_evaluations << " model evaluations -> " << a.out_prefix << ".wav\n";
  return kExitOk;
}

struct EvalArgs {
  std::string manifest, checkpoint, json_out;
};

int cmd_eval(const Common& common, const EvalArgs& a, const StreamArgs& sa, CLI::App& sub, JsonLog& log) {
  ConfigTable flags;
  stream_flags(flags, sa, sub);
  if (sub.count("--manifest")) put(flags, "data_manifest", a.manifest);
  auto keys = kStreamKeys;
  keys.insert("data_manifest");
  const auto cfg = effective_config("eval", common, flags, keys);
  const std::string manifest = get_str(cfg, "data_manifest", "");
  require(!manifest.empty() && fs::is_regular_file(manifest), ErrorCode::kInvalidConfig,
          "manifest not found: " + manifest);
  const auto ck = load_checkpoint_checked(a.checkpoint);
  const auto sc = stream_config(cfg, ck.config);
  log.write({{"event", "config"}, {"command", "eval"}, {"config", table_json(cfg)}});
  auto model = std::make_shared<const picknet::nn::PickNet<float>>(picknet::nn::network_from_checkpoint<float>(ck));
  const auto rep = picknet::stream::evaluate_manifest(manifest, model, sc);
  const json j = json::parse(picknet::stream::to_json(rep));
  log.write({{"event", "eval"}, {"report", j}});
  if (!a.json_out.empty()) write_text(a.json_out, j.dump(2) + "\n");
  std::printf("samples            %zu\n", rep.samples);
  std::printf("gated frames       %zu of %zu\n", rep.gated_frames, rep.frames);
  std::printf("model accuracy     %.2f %%\n", 100.0 * rep.accuracy);
  std::printf("max-energy acc.    %.2f %%\n", 100.0 * rep.baseline_accuracy);
  std::printf("output SNR         %.2f dB\n", rep.output_snr_db);
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string checkpoint;
  std::vector<std::size_t> m_list{2, 4, 8};
  std::size_t n_frames = 10000;
  std::size_t subsample_n = 3;
};

int cmd_bench(const Common& common, const BenchArgs& a, CLI::App& sub, JsonLog& log) {
  ConfigTable flags;
  if (sub.count("--n-frames")) put(flags, "n_frames", a.n_frames);
  if (sub.count("--subsample-n")) put(flags, "subsample_n", a.subsample_n);
  const auto cfg = effective_config("bench", common, flags, {"n_frames", "subsample_n"});
  const auto ck = load_checkpoint_checked(a.checkpoint);
  const std::size_t n_frames = get_uint(cfg, "n_frames", a.n_frames);
  const std::size_t n = get_uint(cfg, "subsample_n", a.subsample_n);
  require(n_frames > 0 && n >= 1, ErrorCode::kInvalidConfig, "n_frames and subsample_n must be positive");
  log.write({{"event", "config"}, {"command", "bench"}, {"config", table_json(cfg)}});
  const auto net = picknet::nn::network_from_checkpoint<float>(ck);

  std::printf("%4s %14s %12s %12s %8s %10s\n", "M", "MACs/forward", "ms/frame N=1", "ms/frame N=" , "ratio", "evals");
  for (std::size_t m : a.m_list) {
    require(m >= 1, ErrorCode::kInvalidConfig, "channel counts must be positive");
    std::mt19937 rng(static_cast<unsigned>(m));
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> input(m * net.input_size());
    for (auto& v : input) v = g(rng);
    std::vector<double> held(m);
    auto run = [&](std::size_t every, std::size_t& evals) {
      evals = 0;
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t t = 0; t < n_frames; ++t) {
        if (t % every == 0) {
          const auto r = net.forward(input, 1, m, picknet::nn::Mode::kEval);
          for (std::size_t k = 0; k < m; ++k) held[k] = r.posteriors[k];
          ++evals;
        }
      }
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    std::size_t evals1 = 0, evalsn = 0;
    const double s1 = run(1, evals1);
    const double sn = run(n, evalsn);
    const auto macs = net.mac_count(m);
    std::printf("%4zu %14llu %12.4f %12.4f %8.2f %10zu\n", m, static_cast<unsigned long long>(macs),
                1e3 * s1 / n_frames, 1e3 * sn / n_frames, s1 / sn, evalsn);
    log.write({{"event", "bench"},
               {"channels", m},
               {"macs", macs},
               {"n_frames", n_frames},
               {"subsample_n", n},
               {"ms_per_frame_n1", 1e3 * s1 / n_frames},
               {"ms_per_frame_subsampled", 1e3 * sn / n_frames},
               {"evaluations_subsampled", evalsn},
               {"ratio", s1 / sn}});
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"picknet: closest-microphone selection for ad hoc microphone arrays"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "TOML-style config file");
  app.add_option("--set", common.overrides, "key=value override (repeatable)");
  app.add_option("--log", common.log_path, "JSON Lines log file");

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "generate a simulated two-device dataset");
  s_sim->add_option("--clean-dir", sim.clean_dir, "directory of 16 kHz clean speech WAVs");
  s_sim->add_option("--out-dir", sim.out_dir, "output directory");
  s_sim->add_option("--n-samples", sim.n_samples, "number of samples");
  s_sim->add_option("--seed", sim.seed, "random seed");

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "train a model on a simulated dataset");
  s_train->add_option("--manifest", tr.manifest, "dataset manifest (manifest.jsonl)");
  s_train->add_option("--out", tr.out, "output checkpoint path");
  s_train->add_option("--resume", tr.resume, "checkpoint to continue from");
  s_train->add_option("--learning-rate", tr.learning_rate, "optimizer step size");
  s_train->add_option("--batch-frames", tr.batch_frames, "frames per batch");
  s_train->add_option("--epochs", tr.epochs, "total epochs, counting resumed ones");
  s_train->add_option("--optimizer", tr.optimizer, "adam or sgd");
  s_train->add_option("--feature-kind", tr.feature_kind, "logmel or amplitude");
  s_train->add_option("--seed", tr.seed, "random seed");

  EnhanceArgs en;
  StreamArgs en_stream;
  auto* s_enh = app.add_subcommand("enhance", "select and mix channels of device recordings");
  s_enh->add_option("inputs", en.inputs, "one WAV per device")->required();
  s_enh->add_option("--checkpoint", en.checkpoint, "model checkpoint");
  s_enh->add_option("--out-prefix", en.out_prefix, "output path prefix");
  s_enh->add_option("--subsample-n", en_stream.subsample_n, "evaluate the model every N frames");
  s_enh->add_flag("--no-smoothing", en_stream.no_smoothing, "use raw posteriors");
  s_enh->add_option("--ema", en_stream.ema, "smooth posteriors with an EMA of this weight");
  s_enh->add_flag("--no-sync", en_stream.no_sync, "inputs are already synchronised");
  s_enh->add_flag("--timeline", en.timeline, "write <prefix>.timeline.jsonl");
  s_enh->add_flag("--rttm", en.rttm, "write <prefix>.rttm");
  s_enh->add_option("--min-dur", en.min_dur, "minimum diarization segment length, s");

  EvalArgs ev;
  StreamArgs ev_stream;
  auto* s_eval = app.add_subcommand("eval", "score closest-mic accuracy on a simulated dataset");
  s_eval->add_option("--manifest", ev.manifest, "dataset manifest");
  s_eval->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
  s_eval->add_option("--json", ev.json_out, "also write the report as JSON");
  s_eval->add_option("--subsample-n", ev_stream.subsample_n, "evaluate the model every N frames");
  s_eval->add_flag("--no-smoothing", ev_stream.no_smoothing, "use raw posteriors");
  s_eval->add_option("--ema", ev_stream.ema, "smooth posteriors with an EMA of this weight");
  s_eval->add_flag("--no-sync", ev_stream.no_sync, "channels are already synchronised");

  BenchArgs be;
  auto* s_bench = app.add_subcommand("bench", "time model evaluation per frame");
  s_bench->add_option("--checkpoint", be.checkpoint, "model checkpoint");
  s_bench->add_option("--m-list", be.m_list, "channel counts")->delimiter(',');
  s_bench->add_option("--n-frames", be.n_frames, "frames timed per channel count");
  s_bench->add_option("--subsample-n", be.subsample_n, "evaluate the model every N frames");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    JsonLog log;
    log.open(common.log_path);
    if (*s_sim) return cmd_simulate(common, sim, *s_sim, log);
    if (*s_train) return cmd_train(common, tr, *s_train, log);
    if (*s_enh) return cmd_enhance(common, en, en_stream, *s_enh, log);
    if (*s_eval) return cmd_eval(common, ev, ev_stream, *s_eval, log);
    if (*s_bench) return cmd_bench(common, be, *s_bench, log);
  } catch (const picknet::Error& e) {
    std::cerr << "picknet: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidConfig ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "picknet: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
