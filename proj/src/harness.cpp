#include "normlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "normlab/errors.hpp"
#include "normlab/rng.hpp"

namespace normlab {

double wilson_half_width(long successes, long trials) {
  if (trials < 1) throw input_error("interval needs at least one trial");
  if (successes < 0 || successes > trials) throw input_error("successes out of range");
  constexpr double z = 1.959963984540054;  // 97.5% normal quantile
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  return z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
}

LpPairGenerator::LpPairGenerator(double p, int dim, DtepConfig dtep, double close_dist,
                                 double far_dist, std::uint64_t seed)
    : p_(p), dim_(dim), dtep_(dtep), close_dist_(close_dist), far_dist_(far_dist), seed_(seed) {
  dtep_.validate();
  if (!(p_ > 0.0) || !std::isfinite(p_)) throw input_error("norm index p must be positive");
  if (dim_ < 1) throw input_error("pair generator dimension must be at least 1");
  if (!(close_dist_ > 0.0) || close_dist_ > dtep_.r)
    throw input_error("close margin must lie in (0, r]");
  if (!(far_dist_ > dtep_.r * dtep_.approx))
    throw input_error("far margin must exceed approx * r");
}

std::pair<Vector, Vector> LpPairGenerator::make_pair(long trial, double dist,
                                                     bool want_close) const {
  SplitRng rng(derive_seed(seed_, static_cast<std::uint64_t>(2 * trial + (want_close ? 0 : 1))));
  Vector x(dim_);
  for (int i = 0; i < dim_; ++i) x[i] = dtep_.r * rng.next_gaussian();
  Vector u(dim_);
  double norm = 0.0;
  do {
    for (int i = 0; i < dim_; ++i) u[i] = rng.next_gaussian();
    norm = lp_norm(u, p_);
  } while (norm == 0.0);
  // Nudge the target distance into the interior of the promise region
  // so rounding cannot push the pair across a threshold.
  const double target = want_close ? dist * (1.0 - 1e-12) : dist * (1.0 + 1e-12);
  Vector y = x + (target / norm) * u;

  const double actual = lp_norm(x - y, p_);
  const double cut_lo = dtep_.r;
  const double cut_hi = dtep_.r * dtep_.approx;
  if (actual > cut_lo && actual <= cut_hi) {
    std::ostringstream os;
    os << "generated pair landed in the excluded band: distance " << actual;
    throw generator_error(os.str());
  }
  if (want_close && actual > cut_lo) throw generator_error("close pair exceeds the threshold");
  if (!want_close && actual <= cut_hi) throw generator_error("far pair misses the threshold");
  return {x, y};
}

std::pair<Vector, Vector> LpPairGenerator::close_pair(long trial) const {
  return make_pair(trial, close_dist_, true);
}

std::pair<Vector, Vector> LpPairGenerator::far_pair(long trial) const {
  return make_pair(trial, far_dist_, false);
}

EmdPairGenerator::EmdPairGenerator(int n, DtepConfig dtep, double close_dist, double far_dist,
                                   std::uint64_t seed)
    : n_(n), dtep_(dtep), close_dist_(close_dist), far_dist_(far_dist), seed_(seed) {
  dtep_.validate();
  if (n_ < 4) throw input_error("measure pair generator needs a grid side of at least 4");
  if (!(close_dist_ > 0.0) || close_dist_ > dtep_.r)
    throw input_error("close margin must lie in (0, r]");
  if (!(far_dist_ > dtep_.r * dtep_.approx))
    throw input_error("far margin must exceed approx * r");
  for (double d : {close_dist_, far_dist_}) {
    const long long units = std::llround(d * kMassScale);
    if (units < 1 || static_cast<double>(units) / kMassScale != d)
      throw input_error("margins must be positive multiples of the mass quantization step");
  }
}

namespace {

// A dipole at exact l1 separation `sep` whose mass is an exact multiple
// of the quantization step.
void place_dipole(SplitRng& rng, int n, int sep, double mass, std::vector<GridCell>& cells) {
  for (;;) {
    const int x1 = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
    const int y1 = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
    const int dx = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(sep + 1));
    const int dy = sep - dx;
    const int sx = rng.next_sign() > 0 ? 1 : -1;
    const int sy = rng.next_sign() > 0 ? 1 : -1;
    const int x2 = x1 + sx * dx;
    const int y2 = y1 + sy * dy;
    if (x2 < 0 || x2 >= n || y2 < 0 || y2 >= n) continue;
    if (x1 == x2 && y1 == y2) continue;
    cells.push_back({x1, y1, mass});
    cells.push_back({x2, y2, -mass});
    return;
  }
}

}  // namespace

std::pair<SignedGridMeasure, SignedGridMeasure> EmdPairGenerator::make_pair(long trial, double dist,
                                                                            bool want_close) const {
  SplitRng rng(derive_seed(seed_, static_cast<std::uint64_t>(2 * trial + (want_close ? 0 : 1))));

  // Shared base content: a few dipoles with quantized masses.
  std::vector<GridCell> base;
  const int extras = 1 + static_cast<int>(rng.next_u64() % 3);
  for (int i = 0; i < extras; ++i) {
    const double mass = static_cast<double>(1 + rng.next_u64() % 2000) / kMassScale * 100.0;
    place_dipole(rng, n_, 1 + static_cast<int>(rng.next_u64() % 3), mass, base);
  }

  // The difference x - y is exactly one dipole, so the transport gap
  // between x and y is mass * separation with no rounding.
  const long long units = std::llround(dist * kMassScale);
  static constexpr int kSeps[] = {1, 2, 4, 5, 8, 10};
  std::vector<int> usable;
  for (int s : kSeps)
    if (s < 2 * (n_ - 1) && units % s == 0) usable.push_back(s);
  if (usable.empty()) throw generator_error("no dipole separation divides the requested margin");
  const int sep = usable[rng.next_u64() % usable.size()];
  const double mass = static_cast<double>(units / sep) / kMassScale;

  std::vector<GridCell> diff;
  place_dipole(rng, n_, sep, mass, diff);

  std::vector<GridCell> ycells = base;
  ycells.push_back({diff[0].x, diff[0].y, -diff[0].w});
  ycells.push_back({diff[1].x, diff[1].y, -diff[1].w});

  SignedGridMeasure x(n_, base);
  SignedGridMeasure y(n_, ycells);

  const double actual = emd_norm(subtract(x, y));
  const double cut_lo = dtep_.r;
  const double cut_hi = dtep_.r * dtep_.approx;
  if (actual > cut_lo && actual <= cut_hi) {
    std::ostringstream os;
    os << "generated measure pair landed in the excluded band: distance " << actual;
    throw generator_error(os.str());
  }
  if (want_close && actual > cut_lo) throw generator_error("close measure pair exceeds the threshold");
  if (!want_close && actual <= cut_hi) throw generator_error("far measure pair misses the threshold");
  return {x, y};
}

std::pair<SignedGridMeasure, SignedGridMeasure> EmdPairGenerator::close_pair(long trial) const {
  return make_pair(trial, close_dist_, true);
}

std::pair<SignedGridMeasure, SignedGridMeasure> EmdPairGenerator::far_pair(long trial) const {
  return make_pair(trial, far_dist_, false);
}

ProductPairGenerator::ProductPairGenerator(double base_p, int k, int dim, DtepConfig dtep,
                                           double close_dist, double far_dist, std::uint64_t seed)
    : p_(base_p), k_(k), dim_(dim), dtep_(dtep), close_dist_(close_dist), far_dist_(far_dist),
      seed_(seed) {
  dtep_.validate();
  if (!(p_ > 0.0) || !std::isfinite(p_)) throw input_error("norm index p must be positive");
  if (k_ < 1) throw input_error("product arity must be at least 1");
  if (dim_ < 1) throw input_error("pair generator dimension must be at least 1");
  if (!(close_dist_ > 0.0) || close_dist_ > dtep_.r)
    throw input_error("close margin must lie in (0, r]");
  if (!(far_dist_ > dtep_.r * dtep_.approx))
    throw input_error("far margin must exceed approx * r");
}

std::pair<ProductPoint, ProductPoint> ProductPairGenerator::make_pair(long trial,
                                                                      bool want_close) const {
  SplitRng rng(derive_seed(seed_, static_cast<std::uint64_t>(2 * trial + (want_close ? 0 : 1))));
  std::vector<Vector> xs(static_cast<std::size_t>(k_));
  std::vector<Vector> ys(static_cast<std::size_t>(k_));
  std::vector<Vector> diff(static_cast<std::size_t>(k_));
  const int hot = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(k_));
  for (int part = 0; part < k_; ++part) {
    Vector base(dim_);
    for (int i = 0; i < dim_; ++i) base[i] = dtep_.r * rng.next_gaussian();
    Vector u(dim_);
    double norm = 0.0;
    do {
      for (int i = 0; i < dim_; ++i) u[i] = rng.next_gaussian();
      norm = lp_norm(u, p_);
    } while (norm == 0.0);
    // The hot component carries the full margin; the rest stay strictly
    // inside the close radius so the max-distance is the hot one.
    double target;
    if (part == hot) {
      target = want_close ? close_dist_ * (1.0 - 1e-12) : far_dist_ * (1.0 + 1e-12);
    } else {
      target = close_dist_ * (0.25 + 0.5 * rng.next_unit());
    }
    const std::size_t idx = static_cast<std::size_t>(part);
    xs[idx] = base;
    ys[idx] = base + (target / norm) * u;
    diff[idx] = xs[idx] - ys[idx];
  }
  ProductPoint x(std::move(xs));
  ProductPoint y(std::move(ys));

  const double actual = linf_product_norm(ProductPoint(std::move(diff)), p_);
  const double cut_lo = dtep_.r;
  const double cut_hi = dtep_.r * dtep_.approx;
  if (actual > cut_lo && actual <= cut_hi) {
    std::ostringstream os;
    os << "generated product pair landed in the excluded band: distance " << actual;
    throw generator_error(os.str());
  }
  if (want_close && actual > cut_lo)
    throw generator_error("close product pair exceeds the threshold");
  if (!want_close && actual <= cut_hi)
    throw generator_error("far product pair misses the threshold");
  return {x, y};
}

std::pair<ProductPoint, ProductPoint> ProductPairGenerator::close_pair(long trial) const {
  return make_pair(trial, true);
}

std::pair<ProductPoint, ProductPoint> ProductPairGenerator::far_pair(long trial) const {
  return make_pair(trial, false);
}

namespace {

template <typename Body>
void run_trials(long trials, int jobs, const Body& body) {
  if (jobs <= 1) {
    long close = 0, far = 0;
    for (long t = 0; t < trials; ++t) body(t, close, far);
    body.close_total += close;
    body.far_total += far;
    return;
  }
  std::vector<std::thread> workers;
  std::vector<long> close(static_cast<std::size_t>(jobs), 0);
  std::vector<long> far(static_cast<std::size_t>(jobs), 0);
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      long c = 0, f = 0;
      for (long t = w; t < trials; t += jobs) body(t, c, f);
      close[static_cast<std::size_t>(w)] = c;
      far[static_cast<std::size_t>(w)] = f;
    });
  }
  for (auto& th : workers) th.join();
  for (int w = 0; w < jobs; ++w) {
    body.close_total += close[static_cast<std::size_t>(w)];
    body.far_total += far[static_cast<std::size_t>(w)];
  }
}

}  // namespace

ExperimentReport run_dtep_experiment(const SchemeFactory& make, const LpPairGenerator& gen,
                                     long trials, std::uint64_t seed, int jobs) {
  if (trials < 100) throw input_error("experiment needs at least 100 trials");
  if (jobs < 1) throw input_error("job count must be at least 1");

  struct Body {
    const SchemeFactory& make;
    const LpPairGenerator& gen;
    std::uint64_t seed;
    mutable long close_total = 0;
    mutable long far_total = 0;

    void operator()(long t, long& close, long& far) const {
      auto scheme = make(derive_seed(seed, static_cast<std::uint64_t>(t)));
      if (!scheme) throw input_error("scheme factory returned a null scheme");
      {
        auto [x, y] = gen.close_pair(t);
        if (scheme->decide(scheme->sketch(x), scheme->sketch(y)) == DtepAnswer::Close) ++close;
      }
      {
        auto [x, y] = gen.far_pair(t);
        if (scheme->decide(scheme->sketch(x), scheme->sketch(y)) == DtepAnswer::Far) ++far;
      }
    }
  } body{make, gen, seed};

  run_trials(trials, jobs, body);

  ExperimentReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.close_successes = body.close_total;
  rep.far_successes = body.far_total;
  rep.close_rate = static_cast<double>(rep.close_successes) / static_cast<double>(trials);
  rep.far_rate = static_cast<double>(rep.far_successes) / static_cast<double>(trials);
  rep.close_half_width = wilson_half_width(rep.close_successes, trials);
  rep.far_half_width = wilson_half_width(rep.far_successes, trials);
  return rep;
}

ExperimentReport run_boost_experiment(const SchemeFactory& make_base, const BoostConfig& bc,
                                      const ProductPairGenerator& gen, long trials,
                                      std::uint64_t seed, int jobs) {
  if (trials < 100) throw input_error("experiment needs at least 100 trials");
  if (jobs < 1) throw input_error("job count must be at least 1");
  bc.validate();

  struct Body {
    const SchemeFactory& make_base;
    const BoostConfig& bc;
    const ProductPairGenerator& gen;
    std::uint64_t seed;
    mutable long close_total = 0;
    mutable long far_total = 0;

    void operator()(long t, long& close, long& far) const {
      const std::uint64_t trial_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
      auto base = make_base(derive_seed(trial_seed, 0));
      if (!base) throw input_error("scheme factory returned a null scheme");
      BoostConfig bct = bc;
      bct.seed = derive_seed(trial_seed, 1);
      BoostedScheme scheme(std::move(base), bct);
      {
        auto [x, y] = gen.close_pair(t);
        if (scheme.decide(scheme.sketch(x), scheme.sketch(y)) == DtepAnswer::Close) ++close;
      }
      {
        auto [x, y] = gen.far_pair(t);
        if (scheme.decide(scheme.sketch(x), scheme.sketch(y)) == DtepAnswer::Far) ++far;
      }
    }
  } body{make_base, bc, gen, seed};

  run_trials(trials, jobs, body);

  ExperimentReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.close_successes = body.close_total;
  rep.far_successes = body.far_total;
  rep.close_rate = static_cast<double>(rep.close_successes) / static_cast<double>(trials);
  rep.far_rate = static_cast<double>(rep.far_successes) / static_cast<double>(trials);
  rep.close_half_width = wilson_half_width(rep.close_successes, trials);
  rep.far_half_width = wilson_half_width(rep.far_successes, trials);
  return rep;
}

ExperimentReport run_emd_experiment(const MeasureDecider& decide, const EmdPairGenerator& gen,
                                    long trials, std::uint64_t seed, int jobs) {
  if (trials < 100) throw input_error("experiment needs at least 100 trials");
  if (jobs < 1) throw input_error("job count must be at least 1");

  struct Body {
    const MeasureDecider& decide;
    const EmdPairGenerator& gen;
    std::uint64_t seed;
    mutable long close_total = 0;
    mutable long far_total = 0;

    void operator()(long t, long& close, long& far) const {
      const std::uint64_t trial_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
      {
        auto [x, y] = gen.close_pair(t);
        if (decide(x, y, trial_seed) == DtepAnswer::Close) ++close;
      }
      {
        auto [x, y] = gen.far_pair(t);
        if (decide(x, y, trial_seed) == DtepAnswer::Far) ++far;
      }
    }
  } body{decide, gen, seed};

  run_trials(trials, jobs, body);

  ExperimentReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.close_successes = body.close_total;
  rep.far_successes = body.far_total;
  rep.close_rate = static_cast<double>(rep.close_successes) / static_cast<double>(trials);
  rep.far_rate = static_cast<double>(rep.far_successes) / static_cast<double>(trials);
  rep.close_half_width = wilson_half_width(rep.close_successes, trials);
  rep.far_half_width = wilson_half_width(rep.far_successes, trials);
  return rep;
}

DistortionReport distortion_report(const std::vector<SignedGridMeasure>& instances,
                                   const EmbedConfig& cfg) {
  if (instances.size() < 2) throw input_error("distortion report needs at least two instances");
  cfg.validate();
  for (const auto& m : instances)
    if (m.side() != cfg.side) throw input_error("instance grid side does not match the embedding");

  std::vector<Vector> embedded;
  embedded.reserve(instances.size());
  for (const auto& m : instances) embedded.push_back(grid_embed(m, cfg));

  DistortionReport rep;
  rep.side = cfg.side;
  bool any = false;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (std::size_t j = i + 1; j < instances.size(); ++j) {
      const double truth = emd_norm(subtract(instances[i], instances[j]));
      const double emb = (embedded[i] - embedded[j]).lpNorm<1>();
      if (truth == 0.0) {
        if (emb > kTol.signed_sum) {
          std::ostringstream os;
          os << "embedding separates instances " << i << " and " << j
             << " at transport distance zero";
          throw error(os.str());
        }
        continue;
      }
      const double ratio = emb / truth;
      rep.rows.push_back({static_cast<int>(i), static_cast<int>(j), truth, emb, ratio});
      if (!any || ratio < rep.min_ratio) rep.min_ratio = ratio;
      if (!any || ratio > rep.max_ratio) rep.max_ratio = ratio;
      any = true;
    }
  }
  if (!any) throw input_error("distortion report needs at least one pair at positive distance");
  rep.distortion = rep.max_ratio / rep.min_ratio;
  return rep;
}

std::vector<SignedGridMeasure> random_signed_measures(int n, int count, std::uint64_t seed) {
  if (n < 4) throw input_error("random measures need a grid side of at least 4");
  if (count < 1) throw input_error("measure count must be at least 1");
  std::vector<SignedGridMeasure> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    SplitRng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::vector<GridCell> cells;
    const int dipoles = 1 + static_cast<int>(rng.next_u64() % 3);
    for (int d = 0; d < dipoles; ++d) {
      const double mass = static_cast<double>(1 + rng.next_u64() % 5000) / kMassScale * 200.0;
      const int sep = 1 + static_cast<int>(rng.next_u64() % (n - 1));
      place_dipole(rng, n, sep, mass, cells);
    }
    out.emplace_back(n, cells);
  }
  return out;
}

std::vector<TraceGapRow> trace_gap_experiment(const std::vector<int>& sizes, long trials,
                                              std::uint64_t seed) {
  if (trials < 1) throw input_error("experiment needs at least one trial");
  std::vector<TraceGapRow> rows;
  rows.reserve(sizes.size());
  for (int n : sizes) {
    if (n < 1 || n > 64) throw input_error("matrix sizes must lie in [1, 64]");
    TraceGapRow row;
    row.n = n;
    row.trials = trials;
    const Matrix id = Matrix::Identity(n, n);
    // sqrt(t^2 / f^2) instead of t / f: both squares are exact small integers
    // here, so the identity row lands on sqrt(n) to the last bit.
    const double id_trace = trace_norm(id);
    row.identity_ratio = std::sqrt(id_trace * id_trace / id.squaredNorm());
    for (long t = 0; t < trials; ++t) {
      SplitRng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(n)),
                               static_cast<std::uint64_t>(t)));
      Matrix a(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.next_gaussian();
      const double fro = a.norm();
      if (fro == 0.0) continue;
      row.max_ratio = std::max(row.max_ratio, trace_norm(a) / fro);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace normlab
