#include "picknet/stream/sync.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "picknet/dsp/fft.hpp"
#include "picknet/error.hpp"

namespace picknet::stream {

long estimate_offset(std::span<const double> ref, std::span<const double> other, long max_lag) {
  require(max_lag >= 0, ErrorCode::kInvalidInput, "search range must be non-negative");
  const std::size_t na = ref.size(), nb = other.size();
  require(na >= 2 * static_cast<std::size_t>(max_lag) && nb >= 2 * static_cast<std::size_t>(max_lag) && na > 0 &&
              nb > 0,
          ErrorCode::kInvalidInput, "signals must be at least twice the search range");

  auto centred = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> out(x.begin(), x.end());
    double energy = 0.0;
    for (auto& v : out) {
      v -= mean;
      energy += v * v;
    }
    return std::make_pair(out, energy);
  };
  auto [a, ea] = centred(ref);
  auto [b, eb] = centred(other);
  require(ea > 0.0 && eb > 0.0, ErrorCode::kSyncFailure, "zero-variance signal, cannot correlate");

  // r(l) = sum_n a[n] b[n + l] via FFT
  const std::size_t len = dsp::next_pow2(na + nb);
  auto& fft = dsp::real_fft(len);
  std::vector<double> pa(len, 0.0), pb(len, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  std::vector<std::complex<double>> fa(fft.bins()), fb(fft.bins());
  fft.forward(pa, fa);
  fft.forward(pb, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] = std::conj(fa[k]) * fb[k];
  std::vector<double> r(len);
  fft.inverse(fa, r);

  std::vector<double> ca(na + 1, 0.0), cb(nb + 1, 0.0);
  for (std::size_t i = 0; i < na; ++i) ca[i + 1] = ca[i] + a[i] * a[i];
  for (std::size_t i = 0; i < nb; ++i) cb[i + 1] = cb[i] + b[i] * b[i];

  long best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  const double floor = 1e-12 * std::sqrt(ea * eb);
  for (long l = -max_lag; l <= max_lag; ++l) {
    // overlap: n in [max(0, -l), min(na, nb - l))
    const long lo = std::max(0L, -l);
    const long hi = std::min(static_cast<long>(na), static_cast<long>(nb) - l);
    if (hi <= lo) continue;
    const double e1 = ca[static_cast<std::size_t>(hi)] - ca[static_cast<std::size_t>(lo)];
    const double e2 = cb[static_cast<std::size_t>(hi + l)] - cb[static_cast<std::size_t>(lo + l)];
    const double denom = std::sqrt(std::max(e1, 0.0) * std::max(e2, 0.0));
    if (denom <= floor) continue;
    const double corr = r[static_cast<std::size_t>((l + static_cast<long>(len)) % static_cast<long>(len))];
    const double score = corr / denom;
    if (score > best_score || (score == best_score && std::abs(l) < std::abs(best))) {
      best_score = score;
      best = l;
    }
  }
  require(std::isfinite(best_score), ErrorCode::kSyncFailure, "no overlap with usable energy");
  return best;
}

long estimate_offset(const dsp::AudioClip& reference, const dsp::AudioClip& other, double search_s) {
  require(reference.sample_rate == other.sample_rate, ErrorCode::kInvalidInput, "sample rates differ");
  return estimate_offset(reference.samples, other.samples,
                         static_cast<long>(std::lround(search_s * reference.sample_rate)));
}

Synchronizer::Synchronizer(std::size_t channels, SyncConfig config)
    : cfg_(config), raw_(channels), offsets_(channels, 0), previous_(channels, 0), pending_(channels) {
  require(channels >= 1, ErrorCode::kInvalidConfig, "need at least one channel");
  require(cfg_.resync_interval > 0.0 && cfg_.window > 0.0 && cfg_.search >= 0.0 && cfg_.sample_rate > 0,
          ErrorCode::kInvalidConfig, "invalid synchronisation settings");
  next_sync_ = static_cast<std::size_t>(std::llround(cfg_.window * cfg_.sample_rate));
}

double Synchronizer::raw_at(std::size_t m, long index) const {
  if (index < 0) return 0.0;
  const auto i = static_cast<std::size_t>(index);
  const Raw& r = raw_[m];
  if (i >= r.end()) return 0.0;
  require(i >= r.base, ErrorCode::kInvalidState, "synchroniser history trimmed too far");
  return r.data[i - r.base];
}

void Synchronizer::push(const std::vector<std::span<const double>>& blocks) {
  require(!finished_, ErrorCode::kInvalidState, "push after finish");
  require(blocks.size() == raw_.size(), ErrorCode::kInvalidInput, "block count differs from channel count");
  for (std::size_t m = 0; m < blocks.size(); ++m)
    raw_[m].data.insert(raw_[m].data.end(), blocks[m].begin(), blocks[m].end());
  maybe_resync();
  emit();
  trim();
}

void Synchronizer::finish() {
  finished_ = true;
  maybe_resync();
  emit();
}

void Synchronizer::maybe_resync() {
  if (raw_.size() == 1) return;
  const auto window = static_cast<std::size_t>(std::llround(cfg_.window * cfg_.sample_rate));
  const auto interval = static_cast<std::size_t>(std::llround(cfg_.resync_interval * cfg_.sample_rate));
  const long search = std::lround(cfg_.search * cfg_.sample_rate);
  while (true) {
    std::size_t have = raw_[0].end();
    for (const auto& r : raw_) have = std::min(have, r.end());
    // Output before next_sync_ must already be final.
    if (have < next_sync_) return;
    const std::size_t p = next_sync_;
    const std::size_t start = p - window;
    std::vector<double> ref(window), other(window);
    for (std::size_t i = 0; i < window; ++i) ref[i] = raw_at(0, static_cast<long>(start + i));
    previous_ = offsets_;
    for (std::size_t m = 1; m < raw_.size(); ++m) {
      for (std::size_t i = 0; i < window; ++i) other[i] = raw_at(m, static_cast<long>(start + i));
      SyncEvent ev;
      ev.at_sample = p;
      ev.channel = m;
      ev.old_offset = offsets_[m];
      try {
        ev.new_offset = estimate_offset(ref, other, search);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kSyncFailure) throw;
        ev.new_offset = offsets_[m];
        ev.failed = true;
        ev.message = e.what();
      }
      offsets_[m] = ev.new_offset;
      events_.push_back(std::move(ev));
    }
    change_at_ = p;
    changed_ = true;
    ++resyncs_;
    next_sync_ = p + interval;
  }
}

void Synchronizer::emit() {
  // Aligned sample n needs raw_m[n + offset] for every channel, and must not
  // precede a pending resync point.
  std::size_t limit = std::numeric_limits<std::size_t>::max();
  if (!finished_) {
    for (std::size_t m = 0; m < raw_.size(); ++m) {
      const long need = std::max(offsets_[m], previous_[m]);
      const long avail = static_cast<long>(raw_[m].end()) - need;
      limit = std::min<std::size_t>(limit, static_cast<std::size_t>(std::max(0L, avail)));
    }
    if (raw_.size() > 1) limit = std::min(limit, next_sync_);
  } else {
    limit = raw_[0].end();
  }
  if (limit <= emitted_) return;
  for (std::size_t m = 0; m < raw_.size(); ++m) {
    auto& out = pending_[m];
    for (std::size_t n = emitted_; n < limit; ++n) {
      const long cur = static_cast<long>(n) + offsets_[m];
      if (changed_ && n >= change_at_ && n < change_at_ + cfg_.crossfade && previous_[m] != offsets_[m]) {
        const double a = static_cast<double>(n - change_at_) / static_cast<double>(cfg_.crossfade);
        const long old = static_cast<long>(n) + previous_[m];
        out.push_back((1.0 - a) * raw_at(m, old) + a * raw_at(m, cur));
      } else {
        out.push_back(raw_at(m, cur));
      }
    }
  }
  emitted_ = limit;
}

void Synchronizer::trim() {
  const auto window = static_cast<std::size_t>(std::llround(cfg_.window * cfg_.sample_rate));
  const auto search = static_cast<std::size_t>(std::llround(cfg_.search * cfg_.sample_rate));
  // keep what the next estimate and the next emitted samples may read
  std::size_t keep_from = emitted_ > search + cfg_.crossfade ? emitted_ - search - cfg_.crossfade : 0;
  if (raw_.size() > 1) keep_from = std::min(keep_from, next_sync_ > window ? next_sync_ - window : 0);
  for (auto& r : raw_) {
    if (keep_from > r.base + (1u << 16) && keep_from <= r.end()) {
      const std::size_t drop = keep_from - r.base;
      r.data.erase(r.data.begin(), r.data.begin() + static_cast<long>(drop));
      r.base = keep_from;
    }
  }
}

std::vector<std::vector<double>> Synchronizer::pull() {
  std::vector<std::vector<double>> out(raw_.size());
  out.swap(pending_);
  pending_.resize(raw_.size());
  return out;
}

}  // namespace picknet::stream
