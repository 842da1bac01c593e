#include "normlab/sketch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "normlab/errors.hpp"

namespace normlab {

namespace {

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

std::uint64_t hash_chain(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (std::uint64_t w : words) h = mix64(h ^ w);
  return h;
}

}  // namespace

void DtepConfig::validate() const {
  if (!std::isfinite(r) || r <= 0.0) throw input_error("dtep threshold r must be positive and finite");
  if (!std::isfinite(approx) || approx <= 1.0)
    throw input_error("dtep approximation factor must exceed 1");
  if (!(success_target > 0.5) || !(success_target < 1.0))
    throw input_error("dtep success target must lie in (1/2, 1)");
}

double DtepConfig::cut() const { return r * std::sqrt(approx); }

void StableSketchConfig::validate() const {
  dtep.validate();
  if (!(p > 0.0) || p > 2.0 || !std::isfinite(p))
    throw input_error("stable index p must lie in (0, 2]");
  if (m < 1 || m % 2 == 0) throw input_error("measurement count m must be odd and at least 1");
}

std::uint64_t config_fingerprint(const StableSketchConfig& cfg) {
  return hash_chain({bits(cfg.p), static_cast<std::uint64_t>(cfg.m), cfg.seed, bits(cfg.dtep.r),
                     bits(cfg.dtep.approx)});
}

void BoostConfig::validate() const {
  if (k < 1) throw input_error("boost arity k must be at least 1");
  if (repetitions < 1) throw input_error("boost repetitions must be at least 1");
  if (!(far_fraction > 0.0) || !(far_fraction < 0.5))
    throw input_error("boost far fraction must lie in (0, 1/2)");
}

double stable_median_abs(double p) {
  if (!(p > 0.0) || p > 2.0 || !std::isfinite(p))
    throw input_error("stable index p must lie in (0, 2]");
  if (p == 1.0) return 1.0;                 // median of |Cauchy|: tan(pi/4)
  if (p == 2.0) return 0.6744897501960817;  // third quartile of the standard normal

  static std::mutex mu;
  static std::map<double, double> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(p);
  if (it != cache.end()) return it->second;

  // One-off calibration: empirical median of |S_p| from a fixed-seed run.
  constexpr long kSamples = 400001;
  SplitRng rng(hash_chain({0x57ab1e5eedull, bits(p)}));
  std::vector<double> v(kSamples);
  for (long i = 0; i < kSamples; ++i) v[i] = std::abs(rng.next_stable(p));
  auto mid = v.begin() + kSamples / 2;
  std::nth_element(v.begin(), mid, v.end());
  cache[p] = *mid;
  return *mid;
}

SketchVector stable_measurements(const Vector& x, const StableSketchConfig& cfg) {
  cfg.validate();
  require_finite(x, "sketch input");
  if (x.size() == 0) throw input_error("sketch input must be non-empty");

  SketchVector out;
  out.fingerprint = config_fingerprint(cfg);
  out.values.resize(cfg.m);
  const Eigen::Index dim = x.size();
  for (int i = 0; i < cfg.m; ++i) {
    SplitRng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) acc += x[j] * rng.next_stable(cfg.p);
    out.values[i] = acc;
  }
  return out;
}

double estimate_norm(const SketchVector& sx, const SketchVector& sy,
                     const StableSketchConfig& cfg) {
  cfg.validate();
  const std::uint64_t want = config_fingerprint(cfg);
  if (sx.fingerprint != want || sy.fingerprint != want)
    throw protocol_error("sketch fingerprints do not match the decoding configuration");
  if (sx.values.size() != cfg.m || sy.values.size() != cfg.m)
    throw protocol_error("sketch length does not match the configured measurement count");

  std::vector<double> dev(static_cast<std::size_t>(cfg.m));
  for (int i = 0; i < cfg.m; ++i) dev[static_cast<std::size_t>(i)] = std::abs(sx.values[i] - sy.values[i]);
  auto mid = dev.begin() + cfg.m / 2;
  std::nth_element(dev.begin(), mid, dev.end());
  return *mid / stable_median_abs(cfg.p);
}

DtepAnswer dtep_decide(const SketchVector& sx, const SketchVector& sy,
                       const StableSketchConfig& cfg) {
  return estimate_norm(sx, sy, cfg) <= cfg.dtep.cut() ? DtepAnswer::Close : DtepAnswer::Far;
}

StableSketchScheme::StableSketchScheme(StableSketchConfig cfg, int dim)
    : cfg_(std::move(cfg)), dim_(dim) {
  cfg_.validate();
  if (dim_ < 1) throw input_error("sketch dimension must be at least 1");
}

SketchVector StableSketchScheme::sketch(const Vector& x) const {
  if (x.size() != dim_) {
    std::ostringstream os;
    os << "sketch input has dimension " << x.size() << ", scheme is bound to " << dim_;
    throw input_error(os.str());
  }
  return stable_measurements(x, cfg_);
}

DtepAnswer StableSketchScheme::decide(const SketchVector& a, const SketchVector& b) const {
  return dtep_decide(a, b, cfg_);
}

ExactNormScheme::ExactNormScheme(double p, DtepConfig dtep) : p_(p), dtep_(dtep) {
  dtep_.validate();
  if (!(p_ > 0.0) || !std::isfinite(p_)) throw input_error("norm index p must be positive");
  fingerprint_ = hash_chain({0xe8ac7ull, bits(p_), bits(dtep_.r), bits(dtep_.approx)});
}

SketchVector ExactNormScheme::sketch(const Vector& x) const {
  require_finite(x, "sketch input");
  return SketchVector{x, fingerprint_};
}

DtepAnswer ExactNormScheme::decide(const SketchVector& a, const SketchVector& b) const {
  if (a.fingerprint != fingerprint_ || b.fingerprint != fingerprint_)
    throw protocol_error("sketch fingerprints do not match the decoding configuration");
  if (a.values.size() != b.values.size())
    throw protocol_error("sketched vectors have different dimensions");
  return lp_norm(a.values - b.values, p_) <= dtep_.cut() ? DtepAnswer::Close : DtepAnswer::Far;
}

BoostedScheme::BoostedScheme(std::shared_ptr<const SketchScheme> base_at_kt, BoostConfig bc)
    : base_(std::move(base_at_kt)), bc_(std::move(bc)) {
  if (!base_) throw input_error("boosted scheme needs a base scheme");
  bc_.validate();
}

ProductSketch BoostedScheme::sketch(const ProductPoint& x) const {
  if (x.arity() != bc_.k) {
    std::ostringstream os;
    os << "product point has " << x.arity() << " parts, booster is configured for " << bc_.k;
    throw input_error(os.str());
  }
  ProductSketch out;
  out.fingerprint = hash_chain({0xb005ull, static_cast<std::uint64_t>(bc_.k),
                                static_cast<std::uint64_t>(bc_.repetitions),
                                bits(bc_.far_fraction), bc_.seed});
  out.repetitions.reserve(static_cast<std::size_t>(bc_.repetitions));
  for (int rep = 0; rep < bc_.repetitions; ++rep) {
    SplitRng rng(derive_seed(bc_.seed, static_cast<std::uint64_t>(rep)));
    Vector z = Vector::Zero(x.dim());
    for (int i = 0; i < bc_.k; ++i)
      z += (rng.next_sign() ? 1.0 : -1.0) * x.parts[static_cast<std::size_t>(i)];
    out.repetitions.push_back(base_->sketch(z));
  }
  return out;
}

DtepAnswer BoostedScheme::decide(const ProductSketch& a, const ProductSketch& b) const {
  if (a.fingerprint != b.fingerprint)
    throw protocol_error("product sketches come from different boost configurations");
  if (static_cast<int>(a.repetitions.size()) != bc_.repetitions ||
      static_cast<int>(b.repetitions.size()) != bc_.repetitions)
    throw protocol_error("product sketch repetition count does not match the configuration");
  int far = 0;
  for (int rep = 0; rep < bc_.repetitions; ++rep)
    if (base_->decide(a.repetitions[static_cast<std::size_t>(rep)],
                      b.repetitions[static_cast<std::size_t>(rep)]) == DtepAnswer::Far)
      ++far;
  return far >= far_vote_threshold(bc_.repetitions, bc_.far_fraction) ? DtepAnswer::Far
                                                                      : DtepAnswer::Close;
}

AmplifiedScheme::AmplifiedScheme(const SchemeFactory& make, int repetitions, double frac,
                                 std::uint64_t seed)
    : frac_(frac) {
  if (repetitions < 1) throw input_error("amplification repetitions must be at least 1");
  if (!(frac > 0.0) || !(frac < 0.5)) throw input_error("amplification fraction must lie in (0, 1/2)");
  copies_.reserve(static_cast<std::size_t>(repetitions));
  for (int i = 0; i < repetitions; ++i) {
    auto copy = make(derive_seed(seed, static_cast<std::uint64_t>(i)));
    if (!copy) throw input_error("scheme factory returned a null scheme");
    copies_.push_back(std::move(copy));
  }
  fingerprint_ = hash_chain({0xa3b1ull, static_cast<std::uint64_t>(repetitions), bits(frac), seed});
}

SketchVector AmplifiedScheme::sketch(const Vector& x) const {
  SketchVector out;
  out.fingerprint = fingerprint_;
  Eigen::Index total = 0;
  std::vector<SketchVector> parts;
  parts.reserve(copies_.size());
  for (const auto& c : copies_) {
    parts.push_back(c->sketch(x));
    total += parts.back().values.size();
  }
  out.values.resize(total);
  Eigen::Index at = 0;
  for (const auto& part : parts) {
    out.values.segment(at, part.values.size()) = part.values;
    at += part.values.size();
  }
  return out;
}

DtepAnswer AmplifiedScheme::decide(const SketchVector& a, const SketchVector& b) const {
  if (a.fingerprint != fingerprint_ || b.fingerprint != fingerprint_)
    throw protocol_error("sketch fingerprints do not match the decoding configuration");
  if (a.values.size() != b.values.size())
    throw protocol_error("sketched vectors have different lengths");
  const int reps = static_cast<int>(copies_.size());

  // Copy sketches are laid out back to back. Fixed-size copies know their
  // segment lengths; variable-size copies (oracles) all emit the input
  // vector itself, so the segments split evenly.
  std::vector<Eigen::Index> lens;
  lens.reserve(copies_.size());
  bool fixed = true;
  for (const auto& c : copies_) {
    const int mc = c->measurement_count();
    if (mc < 0) {
      fixed = false;
      break;
    }
    lens.push_back(mc);
  }
  if (!fixed) {
    if (a.values.size() % reps != 0)
      throw protocol_error("sketch length does not split across the amplified copies");
    lens.assign(copies_.size(), a.values.size() / reps);
  } else {
    Eigen::Index total = 0;
    for (Eigen::Index len : lens) total += len;
    if (a.values.size() != total)
      throw protocol_error("sketch length does not match the amplified configuration");
  }

  int far = 0;
  Eigen::Index at = 0;
  for (int i = 0; i < reps; ++i) {
    const auto& copy = copies_[static_cast<std::size_t>(i)];
    const Eigen::Index len = lens[static_cast<std::size_t>(i)];
    // Restore the per-copy fingerprint so the copy accepts its own slice.
    SketchVector sa{a.values.segment(at, len), copy->fingerprint()};
    SketchVector sb{b.values.segment(at, len), copy->fingerprint()};
    if (copy->decide(sa, sb) == DtepAnswer::Far) ++far;
    at += len;
  }
  return far >= far_vote_threshold(reps, frac_) ? DtepAnswer::Far : DtepAnswer::Close;
}

int AmplifiedScheme::measurement_count() const {
  int total = 0;
  for (const auto& c : copies_) {
    if (c->measurement_count() < 0) return -1;
    total += c->measurement_count();
  }
  return total;
}

int far_vote_threshold(int reps, double frac) {
  if (reps < 1) throw input_error("vote threshold needs at least one repetition");
  if (!(frac > 0.0) || !(frac < 1.0)) throw input_error("vote fraction must lie in (0, 1)");
  // Smallest count c with c >= frac * reps; the epsilon keeps integral
  // products from rounding up through floating-point noise.
  int c = static_cast<int>(std::ceil(frac * reps - 1e-9));
  if (c < 1) c = 1;
  return c;
}

double binomial_tail_ge(int n, int k, double p) {
  if (n < 0) throw input_error("binomial tail needs n >= 0");
  if (!(p >= 0.0) || !(p <= 1.0)) throw input_error("binomial tail needs p in [0, 1]");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  double tail = 0.0;
  for (int j = k; j <= n; ++j) {
    double logterm = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
                     j * std::log(p) + (n - j) * std::log1p(-p);
    tail += std::exp(logterm);
  }
  return std::min(tail, 1.0);
}

double amplified_far_rate(int reps, double frac, double base_far_rate) {
  return binomial_tail_ge(reps, far_vote_threshold(reps, frac), base_far_rate);
}

double amplified_close_error(int reps, double frac, double base_close_error) {
  return binomial_tail_ge(reps, far_vote_threshold(reps, frac), base_close_error);
}

std::vector<std::pair<double, double>> tail_profile(const StableSketchConfig& cfg, const Vector& x,
                                                    const std::vector<double>& t_grid,
                                                    long trials) {
  cfg.validate();
  require_finite(x, "tail profile input");
  if (trials < 1000) throw input_error("tail profile needs at least 1000 trials");
  const double scale = lp_norm(x, cfg.p);
  if (scale <= 0.0) throw input_error("tail profile input must be non-zero");
  for (double t : t_grid)
    if (!std::isfinite(t) || t < 0.0) throw input_error("tail profile thresholds must be non-negative");

  std::vector<long> hits(t_grid.size(), 0);
  const Eigen::Index dim = x.size();
  const std::uint64_t stream = mix64(cfg.seed ^ 0x7a11f00dd00full);
  for (long trial = 0; trial < trials; ++trial) {
    SplitRng rng(derive_seed(stream, static_cast<std::uint64_t>(trial)));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) acc += x[j] * rng.next_stable(cfg.p);
    const double z = std::abs(acc) / scale;
    for (std::size_t i = 0; i < t_grid.size(); ++i)
      if (z >= t_grid[i]) ++hits[i];
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    out.emplace_back(t_grid[i], static_cast<double>(hits[i]) / static_cast<double>(trials));
  return out;
}

}  // namespace normlab
