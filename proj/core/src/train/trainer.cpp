#include "picknet/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "picknet/error.hpp"
#include "picknet/seed.hpp"
#include "picknet/train/loss.hpp"

namespace picknet::train {

using nlohmann::json;

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kInvalidConfig,
          "learning_rate must be positive");
  require(batch_frames >= 1, ErrorCode::kInvalidConfig, "batch_frames must be at least 1");
}

std::string to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"batch_frames", c.batch_frames},
              {"epochs", c.epochs},
              {"optimizer", std::string(to_string(c.optimizer))},
              {"seed", c.seed},
              {"feature_kind", std::string(dsp::to_string(c.feature_kind))},
              {"data_manifest", c.data_manifest}}
      .dump();
}

std::string to_json_line(const StepLog& e) {
  return json{{"step", e.step}, {"mean_loss", e.mean_loss}, {"lr", e.learning_rate}, {"wall_ms", e.wall_ms}}
      .dump();
}

namespace {

template <typename T>
std::vector<std::size_t> trainable_indices(const nn::PickNet<T>& net) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < net.parameters().size(); ++i)
    if (net.trainable(i)) out.push_back(i);
  return out;
}

// Loss, gradient and parameter update shared by both train_step overloads.
// `amps(b, m)` and `target(b)` give the spectra of batch entry b.
template <typename T, typename AmpFn, typename TargetFn>
double step_on_input(nn::PickNet<T>& net, Optimizer<T>& opt, std::span<const T> input, std::size_t groups,
                     std::size_t channels, AmpFn amps, TargetFn target) {
  // Reused across steps so the large activation buffers are not reallocated.
  thread_local nn::ForwardCache<T> cache;
  const auto fw = net.forward(input, groups, channels, nn::Mode::kTrain, &cache);

  std::vector<T> d_post(groups * channels);
  std::vector<double> p(channels), ca;
  double total = 0.0;
  for (std::size_t b = 0; b < groups; ++b) {
    for (std::size_t m = 0; m < channels; ++m) p[m] = fw.posteriors[b * channels + m];
    ca.clear();
    for (std::size_t m = 0; m < channels; ++m) {
      const auto a = amps(b, m);
      ca.insert(ca.end(), a.begin(), a.end());
    }
    const FrameLoss fl = frame_loss(p, ca, target(b));
    total += fl.loss;
    for (std::size_t m = 0; m < channels; ++m)
      d_post[b * channels + m] = static_cast<T>(fl.d_p[m] / static_cast<double>(groups));
  }
  const double mean = total / static_cast<double>(groups);
  if (!std::isfinite(mean)) {
    std::ostringstream msg;
    msg << "non-finite mean loss " << mean << " at optimizer step " << opt.steps() + 1 << " (batch of "
        << groups << " frames)";
    fail(ErrorCode::kTrainingDiverged, msg.str());
  }

  const auto grads = net.backward(cache, d_post);
  net.update_running_stats(cache);
  auto& params = net.mutable_parameters();
  std::vector<std::span<T>> ps;
  std::vector<std::span<const T>> gs;
  for (std::size_t i : trainable_indices(net)) {
    ps.emplace_back(params[i].tensor.data);
    gs.emplace_back(grads[i].data);
  }
  opt.step(ps, gs);
  return mean;
}

}  // namespace

template <typename T>
double train_step(nn::PickNet<T>& net, Optimizer<T>& opt, const FrameDataset& data,
                  std::span<const std::size_t> batch) {
  require(!batch.empty(), ErrorCode::kInvalidInput, "empty batch");
  require(data.feature_dim() == net.config().input_dim, ErrorCode::kInvalidConfig,
          "dataset feature dimension does not match the model");
  const std::size_t m = data.channels();
  std::vector<T> input(batch.size() * m * net.input_size());
  data.gather_input<T>(batch, input);
  return step_on_input<T>(
      net, opt, input, batch.size(), m, [&](std::size_t b, std::size_t c) { return data.channel_amp(batch[b], c); },
      [&](std::size_t b) { return data.target_amp(batch[b]); });
}

template <typename T>
double train_step(nn::PickNet<T>& net, Optimizer<T>& opt, std::span<const FrameExample> batch) {
  require(!batch.empty(), ErrorCode::kInvalidInput, "empty batch");
  const std::size_t m = batch.front().patches.size();
  const std::size_t per = net.input_size();
  const std::size_t bins = batch.front().target_amp.size();
  std::vector<T> input(batch.size() * m * per);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require(batch[b].patches.size() == m && batch[b].channel_amps.size() == m * bins &&
                batch[b].target_amp.size() == bins,
            ErrorCode::kInvalidInput, "batch examples differ in shape");
    for (std::size_t c = 0; c < m; ++c) {
      const auto& v = batch[b].patches[c].values;
      require(v.size() == per, ErrorCode::kInvalidConfig, "patch size does not match the model");
      std::transform(v.begin(), v.end(), input.begin() + static_cast<std::ptrdiff_t>((b * m + c) * per),
                     [](double x) { return static_cast<T>(x); });
    }
  }
  return step_on_input<T>(
      net, opt, input, batch.size(), m,
      [&](std::size_t b, std::size_t c) {
        return std::span<const double>(batch[b].channel_amps).subspan(c * bins, bins);
      },
      [&](std::size_t b) { return std::span<const double>(batch[b].target_amp); });
}

template double train_step<float>(nn::PickNet<float>&, Optimizer<float>&, const FrameDataset&,
                                  std::span<const std::size_t>);
template double train_step<double>(nn::PickNet<double>&, Optimizer<double>&, const FrameDataset&,
                                   std::span<const std::size_t>);
template double train_step<float>(nn::PickNet<float>&, Optimizer<float>&, std::span<const FrameExample>);
template double train_step<double>(nn::PickNet<double>&, Optimizer<double>&, std::span<const FrameExample>);

Trainer::Trainer(TrainConfig config, nn::ModelConfig model)
    : config_(std::move(config)), net_((config_.validate(), std::move(model))),
      opt_(config_.optimizer, config_.learning_rate) {
  require(net_.config().feature_kind == config_.feature_kind, ErrorCode::kInvalidConfig,
          "model and training config disagree on feature_kind");
  net_.initialize(derive_seed(config_.seed, 0xa11ce));
}

std::filesystem::path optimizer_state_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".opt";
  return p;
}

Trainer Trainer::resume(TrainConfig config, const std::filesystem::path& path) {
  const nn::ModelCheckpoint ck = nn::load_checkpoint(path);
  Trainer t(std::move(config), ck.config);
  t.net_ = nn::network_from_checkpoint<float>(ck);
  json extra;
  try {
    extra = json::parse(ck.extra_json);
  } catch (const json::exception&) {
    fail(ErrorCode::kInvalidInput, "checkpoint has malformed training state");
  }
  require(extra.contains("epochs_done") && extra.contains("steps"), ErrorCode::kInvalidInput,
          "checkpoint carries no training state to resume from");
  t.epochs_done_ = extra["epochs_done"].get<std::size_t>();
  t.steps_ = extra["steps"].get<std::uint64_t>();

  std::string header;
  auto tensors = nn::load_tensors(optimizer_state_path(path), &header);
  json h = json::parse(header);
  require(h.value("optimizer", std::string{}) == std::string(to_string(t.config_.optimizer)),
          ErrorCode::kInvalidConfig, "optimizer differs from the one the checkpoint was trained with");
  std::vector<std::vector<float>> m, v;
  for (auto& nt : tensors) {
    if (nt.name.starts_with("m.")) m.push_back(std::move(nt.tensor.data));
    else if (nt.name.starts_with("v.")) v.push_back(std::move(nt.tensor.data));
  }
  t.opt_.restore(h.at("adam_steps").get<std::uint64_t>(), std::move(m), std::move(v));
  return t;
}

void Trainer::run(const FrameDataset& data, const std::function<void(const StepLog&)>& on_step,
                  const std::function<void(std::size_t)>& on_epoch) {
  require(data.size() > 0, ErrorCode::kInvalidInput, "training set has no frames");
  require(data.feature_kind() == config_.feature_kind, ErrorCode::kInvalidConfig,
          "dataset features differ from the training config");
  std::vector<std::size_t> order(data.size());
  for (; epochs_done_ < config_.epochs; ++epochs_done_) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(config_.seed, 1000 + epochs_done_));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < order.size(); at += config_.batch_frames) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::size_t n = std::min(config_.batch_frames, order.size() - at);
      const double loss = train_step<float>(net_, opt_, data, std::span(order).subspan(at, n));
      ++steps_;
      if (on_step) {
        const auto t1 = std::chrono::steady_clock::now();
        on_step({steps_, loss, config_.learning_rate,
                 std::chrono::duration<double, std::milli>(t1 - t0).count()});
      }
    }
    if (on_epoch) on_epoch(epochs_done_ + 1);
  }
}

nn::ModelCheckpoint Trainer::checkpoint() const {
  json extra = {{"epochs_done", epochs_done_}, {"steps", steps_}, {"train_config", json::parse(to_json(config_))}};
  return nn::make_checkpoint(net_, extra.dump());
}

void Trainer::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(checkpoint(), path);
  std::vector<nn::NamedTensor<float>> state;
  for (std::size_t i = 0; i < opt_.first_moments().size(); ++i) {
    const auto& m = opt_.first_moments()[i];
    const auto& v = opt_.second_moments()[i];
    state.push_back({"m." + std::to_string(i), nn::Tensor<float>({m.size()}, 0.0f)});
    state.back().tensor.data = m;
    state.push_back({"v." + std::to_string(i), nn::Tensor<float>({v.size()}, 0.0f)});
    state.back().tensor.data = v;
  }
  const json header = {{"optimizer", std::string(to_string(opt_.kind()))}, {"adam_steps", opt_.steps()}};
  nn::save_tensors(state, header.dump(), optimizer_state_path(path));
}

GradientCheckReport gradient_check(const nn::PickNet<double>& net_in, const FrameExample& ex,
                                   const GradientCheckOptions& opt) {
  require(opt.h > 0.0, ErrorCode::kInvalidConfig, "finite-difference step must be positive");
  const nn::PickNet<double>& net = net_in;

  nn::ForwardCache<double> cache;
  const auto post = nn::picknet_forward(net, ex.patches, opt.mode, &cache);
  const FrameLoss base = frame_loss(post.p, ex.channel_amps, ex.target_amp);
  const auto grads = net.backward(cache, base.d_p);

  // The difference quotient is formed in extended precision: in double, one
  // rounding step of the loss divided by 2h is ~1e-11 L, far above the 1e-8
  // floor of the relative error, so near-zero gradients could not be judged.
  using Hi = long double;
  nn::PickNet<Hi> hi = net.cast<Hi>();
  const std::size_t m_ch = ex.patches.size();
  std::vector<Hi> input;
  for (const auto& p : ex.patches) input.insert(input.end(), p.values.begin(), p.values.end());
  const std::size_t bins = ex.target_amp.size();
  // The activation pattern: exact zeros of every op output (ReLU) and the
  // max-pool winners. Within one pattern the loss is smooth in the weights.
  struct Eval {
    Hi loss = 0;
    std::vector<std::vector<bool>> zeros;
    std::vector<std::vector<std::uint32_t>> argmax;
  };
  nn::ForwardCache<Hi> cache_hi;
  auto hi_eval = [&]() {
    const auto fw = hi.forward(std::span<const Hi>(input), 1, m_ch, opt.mode, &cache_hi);
    Eval ev;
    for (std::size_t f = 0; f < bins; ++f) {
      Hi y = 0;
      for (std::size_t m = 0; m < m_ch; ++m) y += fw.posteriors[m] * Hi(ex.channel_amps[m * bins + f]);
      const Hi d = y - Hi(ex.target_amp[f]);
      ev.loss += d * d;
    }
    ev.zeros.resize(cache_hi.outputs.size());
    for (std::size_t k = 0; k < cache_hi.outputs.size(); ++k) {
      ev.zeros[k].resize(cache_hi.outputs[k].size());
      for (std::size_t i = 0; i < cache_hi.outputs[k].size(); ++i) ev.zeros[k][i] = cache_hi.outputs[k][i] == 0;
    }
    ev.argmax = cache_hi.argmax;
    return ev;
  };
  auto same_pattern = [](const Eval& a, const Eval& b) { return a.zeros == b.zeros && a.argmax == b.argmax; };
  const Eval centre = hi_eval();

  GradientCheckReport rep;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t pi = 0; pi < net.parameters().size(); ++pi) {
    if (!net.trainable(pi)) continue;
    const std::size_t n = net.parameters()[pi].tensor.size();
    std::vector<std::size_t> entries(n);
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (opt.max_entries_per_tensor > 0 && n > opt.max_entries_per_tensor) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(opt.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t e : entries) {
      Hi& w = hi.mutable_parameters()[pi].tensor.data[e];
      const Hi keep = w;
      auto quotient = [&](Hi step, bool& smooth) {
        hi.mutable_parameters()[pi].tensor.data[e] = keep + step;
        const Eval up = hi_eval();
        hi.mutable_parameters()[pi].tensor.data[e] = keep - step;
        const Eval down = hi_eval();
        hi.mutable_parameters()[pi].tensor.data[e] = keep;
        smooth = same_pattern(up, centre) && same_pattern(down, centre);
        return (up.loss - down.loss) / (2 * step);
      };
      bool smooth = false;
      Hi step = Hi(opt.h);
      Hi q = quotient(step, smooth);
      if (!smooth) {
        ++rep.kinked;
        // the long-double quotient stays accurate down to ~1e-4 h
        for (int shrink = 0; shrink < 4 && !smooth; ++shrink) {
          step /= 10;
          q = quotient(step, smooth);
        }
        if (!smooth) {
          ++rep.skipped;
          continue;
        }
      }

      const double numeric = static_cast<double>(q);
      const double analytic = grads[pi].data[e];
      const double abs_err = std::abs(numeric - analytic);
      const double rel = abs_err / std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      ++rep.entries;
      rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = net.parameters()[pi].name + "[" + std::to_string(e) + "]";
      }
    }
  }
  return rep;
}

}  // namespace picknet::train
