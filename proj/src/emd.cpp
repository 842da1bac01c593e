#include "normlab/emd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <queue>
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

int ceil_log2(int n) {
  int l = 0;
  while ((1 << l) < n) ++l;
  return l;
}

std::uint16_t shift_hash(std::uint64_t key, long long b) {
  return static_cast<std::uint16_t>(mix64(key ^ mix64(static_cast<std::uint64_t>(b))) &
                                    ((1u << kReductionHashBits) - 1));
}

}  // namespace

GridMeasure::GridMeasure(int n, const std::vector<GridCell>& cells)
    : GridMeasure(n, cells, false) {}

GridMeasure::GridMeasure(int n, const std::vector<GridCell>& cells, bool allow_negative)
    : n_(n), total_(0.0) {
  if (n < 1) throw input_error("grid side must be at least 1");
  for (const auto& c : cells) {
    if (c.x < 0 || c.x >= n || c.y < 0 || c.y >= n) {
      std::ostringstream os;
      os << "grid cell (" << c.x << ", " << c.y << ") is outside the " << n << "x" << n << " grid";
      throw input_error(os.str());
    }
    if (!std::isfinite(c.w)) throw input_error("grid cell weights must be finite");
    if (!allow_negative && c.w < 0.0) {
      std::ostringstream os;
      os << "grid cell (" << c.x << ", " << c.y << ") has negative weight " << c.w;
      throw input_error(os.str());
    }
    cells_[{c.x, c.y}] += c.w;
  }
  for (auto it = cells_.begin(); it != cells_.end();) {
    if (it->second == 0.0)
      it = cells_.erase(it);
    else
      ++it;
  }
  for (const auto& [xy, w] : cells_) total_ += w;
}

double GridMeasure::at(int x, int y) const {
  auto it = cells_.find({x, y});
  return it == cells_.end() ? 0.0 : it->second;
}

SignedGridMeasure::SignedGridMeasure(int n, const std::vector<GridCell>& cells)
    : GridMeasure(n, cells, true) {
  if (std::abs(total_) > kTol.signed_sum) {
    std::ostringstream os;
    os << "signed measure weights sum to " << total_ << ", expected zero";
    throw input_error(os.str());
  }
}

GridMeasure SignedGridMeasure::positive_part() const {
  std::vector<GridCell> out;
  for (const auto& [xy, w] : cells_)
    if (w > 0.0) out.push_back({xy.first, xy.second, w});
  return GridMeasure(n_, out);
}

GridMeasure SignedGridMeasure::negative_part() const {
  std::vector<GridCell> out;
  for (const auto& [xy, w] : cells_)
    if (w < 0.0) out.push_back({xy.first, xy.second, -w});
  return GridMeasure(n_, out);
}

GridMeasure SignedGridMeasure::shifted_dense(long long b) const {
  std::vector<GridCell> out;
  out.reserve(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_));
  const double shift = static_cast<double>(b);
  for (int y = 0; y < n_; ++y)
    for (int x = 0; x < n_; ++x) {
      const double w = at(x, y) - shift;
      if (w <= 0.0) {
        std::ostringstream os;
        os << "shift " << b << " does not clear the mass at (" << x << ", " << y << ")";
        throw input_error(os.str());
      }
      out.push_back({x, y, w});
    }
  return GridMeasure(n_, out);
}

SignedGridMeasure subtract(const GridMeasure& a, const GridMeasure& b) {
  if (a.side() != b.side()) throw input_error("measures live on different grids");
  std::vector<GridCell> cells;
  for (const auto& [xy, w] : a.cells()) cells.push_back({xy.first, xy.second, w});
  for (const auto& [xy, w] : b.cells()) cells.push_back({xy.first, xy.second, -w});
  return SignedGridMeasure(a.side(), cells);
}

SignedGridMeasure subtract(const SignedGridMeasure& a, const SignedGridMeasure& b) {
  if (a.side() != b.side()) throw input_error("measures live on different grids");
  std::vector<GridCell> cells;
  for (const auto& [xy, w] : a.cells()) cells.push_back({xy.first, xy.second, w});
  for (const auto& [xy, w] : b.cells()) cells.push_back({xy.first, xy.second, -w});
  return SignedGridMeasure(a.side(), cells);
}

double plan_cost(const TransportPlan& plan) {
  double cost = 0.0;
  for (const auto& f : plan.flows)
    cost += f.mass * (std::abs(f.from_x - f.to_x) + std::abs(f.from_y - f.to_y));
  return cost;
}

namespace {

// Minimum-cost flow by successive shortest augmenting paths with
// Johnson potentials. Small dense transportation instances only.
class MinCostFlow {
 public:
  explicit MinCostFlow(int nodes) : head_(static_cast<std::size_t>(nodes), -1) {}

  void add_edge(int from, int to, long long cap, long long cost) {
    edges_.push_back({to, head_[static_cast<std::size_t>(from)], cap, cost});
    head_[static_cast<std::size_t>(from)] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({from, head_[static_cast<std::size_t>(to)], 0, -cost});
    head_[static_cast<std::size_t>(to)] = static_cast<int>(edges_.size()) - 1;
  }

  // Sends as much flow as possible from s to t; returns (flow, cost).
  std::pair<long long, long long> run(int s, int t) {
    const std::size_t n = head_.size();
    std::vector<long long> pot(n, 0);  // all costs non-negative initially
    long long flow = 0, cost = 0;
    for (;;) {
      constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
      std::vector<long long> dist(n, kInf);
      std::vector<int> via(n, -1);
      std::priority_queue<std::pair<long long, int>, std::vector<std::pair<long long, int>>,
                          std::greater<>>
          pq;
      dist[static_cast<std::size_t>(s)] = 0;
      pq.push({0, s});
      while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[static_cast<std::size_t>(u)]) continue;
        for (int e = head_[static_cast<std::size_t>(u)]; e != -1; e = edges_[static_cast<std::size_t>(e)].next) {
          const Edge& ed = edges_[static_cast<std::size_t>(e)];
          if (ed.cap <= 0) continue;
          const long long nd = d + ed.cost + pot[static_cast<std::size_t>(u)] -
                               pot[static_cast<std::size_t>(ed.to)];
          if (nd < dist[static_cast<std::size_t>(ed.to)]) {
            dist[static_cast<std::size_t>(ed.to)] = nd;
            via[static_cast<std::size_t>(ed.to)] = e;
            pq.push({nd, ed.to});
          }
        }
      }
      if (via[static_cast<std::size_t>(t)] == -1) break;
      for (std::size_t u = 0; u < n; ++u)
        if (dist[u] < kInf) pot[u] += dist[u];
      long long push = kInf;
      for (int u = t; u != s;) {
        const Edge& ed = edges_[static_cast<std::size_t>(via[static_cast<std::size_t>(u)])];
        push = std::min(push, ed.cap);
        u = edges_[static_cast<std::size_t>(via[static_cast<std::size_t>(u)] ^ 1)].to;
      }
      for (int u = t; u != s;) {
        const int e = via[static_cast<std::size_t>(u)];
        edges_[static_cast<std::size_t>(e)].cap -= push;
        edges_[static_cast<std::size_t>(e ^ 1)].cap += push;
        cost += push * edges_[static_cast<std::size_t>(e)].cost;
        u = edges_[static_cast<std::size_t>(e ^ 1)].to;
      }
      flow += push;
    }
    return {flow, cost};
  }

  // Flow currently on a forward edge, by insertion order index.
  long long forward_flow(int edge_index) const {
    return edges_[static_cast<std::size_t>(2 * edge_index + 1)].cap;
  }

 private:
  struct Edge {
    int to;
    int next;
    long long cap;
    long long cost;
  };
  std::vector<int> head_;
  std::vector<Edge> edges_;
};

}  // namespace

EmdResult emd_distance(const GridMeasure& a, const GridMeasure& b) {
  if (a.side() != b.side()) throw input_error("measures live on different grids");
  if (std::abs(a.total() - b.total()) > kTol.signed_sum) {
    std::ostringstream os;
    os << "transport requires equal totals, got " << a.total() << " and " << b.total();
    throw input_error(os.str());
  }

  // Net supplies per cell, quantized to integer units of 1/kMassScale.
  std::map<std::pair<int, int>, long long> units;
  for (const auto& [xy, w] : a.cells()) units[xy] += std::llround(w * kMassScale);
  for (const auto& [xy, w] : b.cells()) units[xy] -= std::llround(w * kMassScale);
  long long imbalance = 0;
  for (const auto& [xy, u] : units) imbalance += u;
  if (imbalance != 0) {
    // Fold the quantization residue into the heaviest cell.
    auto heaviest = units.begin();
    for (auto it = units.begin(); it != units.end(); ++it)
      if (std::llabs(it->second) > std::llabs(heaviest->second)) heaviest = it;
    heaviest->second -= imbalance;
  }

  struct Node {
    int x, y;
    long long u;
  };
  std::vector<Node> sources, sinks;
  for (const auto& [xy, u] : units) {
    if (u > 0) sources.push_back({xy.first, xy.second, u});
    if (u < 0) sinks.push_back({xy.first, xy.second, -u});
  }

  EmdResult out;
  if (sources.empty()) return out;  // identical measures

  const int ns = static_cast<int>(sources.size());
  const int nt = static_cast<int>(sinks.size());
  const int s = 0, t = ns + nt + 1;
  MinCostFlow mcf(ns + nt + 2);
  int bipartite_base = -1;
  for (int i = 0; i < ns; ++i) mcf.add_edge(s, 1 + i, sources[static_cast<std::size_t>(i)].u, 0);
  for (int j = 0; j < nt; ++j) mcf.add_edge(1 + ns + j, t, sinks[static_cast<std::size_t>(j)].u, 0);
  bipartite_base = ns + nt;
  constexpr long long kInfCap = std::numeric_limits<long long>::max() / 8;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j) {
      const long long d = std::llabs(sources[static_cast<std::size_t>(i)].x -
                                     sinks[static_cast<std::size_t>(j)].x) +
                          std::llabs(sources[static_cast<std::size_t>(i)].y -
                                     sinks[static_cast<std::size_t>(j)].y);
      mcf.add_edge(1 + i, 1 + ns + j, kInfCap, d);
    }

  auto [flow, cost] = mcf.run(s, t);
  long long want = 0;
  for (const auto& src : sources) want += src.u;
  if (flow != want) throw error("transport solver failed to route all supply");

  out.plan.cost = static_cast<double>(cost) / kMassScale;
  out.distance = out.plan.cost;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j) {
      const int idx = bipartite_base + i * nt + j;
      const long long f = mcf.forward_flow(idx);
      if (f > 0)
        out.plan.flows.push_back({sources[static_cast<std::size_t>(i)].x,
                                  sources[static_cast<std::size_t>(i)].y,
                                  sinks[static_cast<std::size_t>(j)].x,
                                  sinks[static_cast<std::size_t>(j)].y,
                                  static_cast<double>(f) / kMassScale});
    }
  return out;
}

double emd_norm(const SignedGridMeasure& x) {
  return emd_distance(x.positive_part(), x.negative_part()).distance;
}

EmbedConfig EmbedConfig::deterministic(int n) {
  EmbedConfig cfg;
  cfg.side = n;
  cfg.levels = ceil_log2(n);
  cfg.shift_u = 0;
  cfg.shift_v = 0;
  cfg.validate();
  return cfg;
}

EmbedConfig EmbedConfig::randomized(int n, std::uint64_t seed) {
  EmbedConfig cfg;
  cfg.side = n;
  cfg.levels = ceil_log2(n);
  SplitRng rng(seed);
  const std::uint64_t mask = (1ull << cfg.levels) - 1;
  cfg.shift_u = static_cast<int>(rng.next_u64() & mask);
  cfg.shift_v = static_cast<int>(rng.next_u64() & mask);
  cfg.validate();
  return cfg;
}

void EmbedConfig::validate() const {
  if (side < 1) throw input_error("embedding grid side must be at least 1");
  if (levels != ceil_log2(side)) throw input_error("embedding levels must cover the grid side");
  const int span = 1 << levels;
  if (shift_u < 0 || shift_u >= span || shift_v < 0 || shift_v >= span)
    throw input_error("embedding shift must lie in [0, 2^levels)");
}

Eigen::Index EmbedConfig::dimension() const {
  Eigen::Index dim = 0;
  for (int level = 0; level <= levels; ++level) {
    const Eigen::Index per_axis = Eigen::Index{1} << (levels + 1 - level);
    dim += per_axis * per_axis;
  }
  return dim;
}

namespace {

Vector embed_cells(const std::map<std::pair<int, int>, double>& cells, const EmbedConfig& cfg) {
  cfg.validate();
  Vector out = Vector::Zero(cfg.dimension());
  Eigen::Index offset = 0;
  for (int level = 0; level <= cfg.levels; ++level) {
    const Eigen::Index per_axis = Eigen::Index{1} << (cfg.levels + 1 - level);
    const double scale = static_cast<double>(1 << level);
    for (const auto& [xy, w] : cells) {
      const Eigen::Index cx = (xy.first + cfg.shift_u) >> level;
      const Eigen::Index cy = (xy.second + cfg.shift_v) >> level;
      out[offset + cy * per_axis + cx] += scale * w;
    }
    offset += per_axis * per_axis;
  }
  return out;
}

}  // namespace

Vector grid_embed(const GridMeasure& m, const EmbedConfig& cfg) {
  if (m.side() != cfg.side) throw input_error("measure and embedding use different grid sides");
  return embed_cells(m.cells(), cfg);
}

Vector grid_embed(const SignedGridMeasure& m, const EmbedConfig& cfg) {
  if (m.side() != cfg.side) throw input_error("measure and embedding use different grid sides");
  return embed_cells(m.cells(), cfg);
}

long long b_value(const SignedGridMeasure& x) {
  double m = 0.0;  // absent cells weigh zero
  const std::size_t full = static_cast<std::size_t>(x.side()) * static_cast<std::size_t>(x.side());
  bool first = x.cells().size() == full;  // full support: ignore the implicit zero
  for (const auto& [xy, w] : x.cells()) {
    if (first) {
      m = w;
      first = false;
    } else {
      m = std::min(m, w);
    }
  }
  if (std::abs(m) > 4.0e15) throw input_error("measure weights too large to shift");
  long long b = 2 * static_cast<long long>(std::floor(m / 2.0));
  if (static_cast<double>(b) >= m) b -= 2;
  return b;
}

ShiftDecomposition shift_decompose(const SignedGridMeasure& x) {
  const long long b1 = b_value(x);
  return ShiftDecomposition{b1, b1 - 2, x.shifted_dense(b1), x.shifted_dense(b1 - 2)};
}

ExactEmdScheme::ExactEmdScheme(int n, DtepConfig dtep) : n_(n), dtep_(dtep) {
  dtep_.validate();
  if (n_ < 1) throw input_error("grid side must be at least 1");
  fingerprint_ = hash_chain({0xe24dull, static_cast<std::uint64_t>(n_), bits(dtep_.r),
                             bits(dtep_.approx)});
}

SketchVector ExactEmdScheme::sketch(const GridMeasure& m) const {
  if (m.side() != n_) throw input_error("measure side does not match the scheme grid");
  SketchVector out;
  out.fingerprint = fingerprint_;
  out.values = Vector::Zero(static_cast<Eigen::Index>(n_) * n_);
  for (const auto& [xy, w] : m.cells())
    out.values[static_cast<Eigen::Index>(xy.second) * n_ + xy.first] = w;
  return out;
}

DtepAnswer ExactEmdScheme::decide(const SketchVector& a, const SketchVector& b) const {
  if (a.fingerprint != fingerprint_ || b.fingerprint != fingerprint_)
    throw protocol_error("sketch fingerprints do not match the decoding configuration");
  const Eigen::Index want = static_cast<Eigen::Index>(n_) * n_;
  if (a.values.size() != want || b.values.size() != want)
    throw protocol_error("sketch length does not match the scheme grid");
  if (std::abs(a.values.sum() - b.values.sum()) > kTol.signed_sum) return DtepAnswer::Far;

  std::vector<GridCell> ca, cb;
  for (int y = 0; y < n_; ++y)
    for (int x = 0; x < n_; ++x) {
      const Eigen::Index i = static_cast<Eigen::Index>(y) * n_ + x;
      if (a.values[i] != 0.0) ca.push_back({x, y, a.values[i]});
      if (b.values[i] != 0.0) cb.push_back({x, y, b.values[i]});
    }
  const double d = emd_distance(GridMeasure(n_, ca), GridMeasure(n_, cb)).distance;
  return d <= dtep_.cut() ? DtepAnswer::Close : DtepAnswer::Far;
}

EmbedSketchScheme::EmbedSketchScheme(EmbedConfig embed, StableSketchConfig sketch)
    : embed_(embed), cfg_(sketch) {
  embed_.validate();
  cfg_.validate();
}

std::uint64_t EmbedSketchScheme::fingerprint() const {
  return hash_chain({0xe3bedull, config_fingerprint(cfg_), static_cast<std::uint64_t>(embed_.side),
                     static_cast<std::uint64_t>(embed_.levels),
                     static_cast<std::uint64_t>(embed_.shift_u),
                     static_cast<std::uint64_t>(embed_.shift_v)});
}

SketchVector EmbedSketchScheme::sketch(const GridMeasure& m) const {
  SketchVector s = stable_measurements(grid_embed(m, embed_), cfg_);
  s.fingerprint = fingerprint();
  return s;
}

DtepAnswer EmbedSketchScheme::decide(const SketchVector& a, const SketchVector& b) const {
  const std::uint64_t fp = fingerprint();
  if (a.fingerprint != fp || b.fingerprint != fp)
    throw protocol_error("sketch fingerprints do not match the decoding configuration");
  SketchVector ra{a.values, config_fingerprint(cfg_)};
  SketchVector rb{b.values, config_fingerprint(cfg_)};
  return dtep_decide(ra, rb, cfg_);
}

void ReductionConfig::validate() const {
  if (repetitions < 1) throw input_error("reduction repetitions must be at least 1");
}

ReductionSketch signed_reduction_sketch(const SignedGridMeasure& x, const MeasureSketchScheme& base,
                                        std::uint64_t seed) {
  const ShiftDecomposition parts = shift_decompose(x);
  const std::uint64_t key = mix64(seed ^ 0x5b17c0deull);
  ReductionSketch out;
  out.base[0] = base.sketch(parts.x1);
  out.base[1] = base.sketch(parts.x2);
  out.shift_tag[0] = shift_hash(key, parts.b1);
  out.shift_tag[1] = shift_hash(key, parts.b2);
  out.fingerprint = hash_chain({0x2ed9ull, key, base.fingerprint()});
  return out;
}

DtepAnswer signed_reduction_decide(const ReductionSketch& sx, const ReductionSketch& sy,
                                   const MeasureSketchScheme& base) {
  if (sx.fingerprint != sy.fingerprint)
    throw protocol_error("reduction sketches come from different configurations");
  for (int qx = 0; qx < 2; ++qx)
    for (int qy = 0; qy < 2; ++qy)
      if (sx.shift_tag[static_cast<std::size_t>(qx)] == sy.shift_tag[static_cast<std::size_t>(qy)])
        return base.decide(sx.base[static_cast<std::size_t>(qx)],
                           sy.base[static_cast<std::size_t>(qy)]);
  return DtepAnswer::Far;
}

DtepAnswer reduction_protocol(const SignedGridMeasure& x, const SignedGridMeasure& y,
                              const MeasureSchemeFactory& make, const ReductionConfig& cfg) {
  cfg.validate();
  int far = 0;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t hash_seed = derive_seed(mix64(cfg.seed ^ 0xc011ull),
                                                static_cast<std::uint64_t>(rep));
    const std::uint64_t base_seed = derive_seed(mix64(cfg.seed ^ 0xba5eull),
                                                static_cast<std::uint64_t>(rep));
    auto base = make(base_seed);
    if (!base) throw input_error("measure scheme factory returned a null scheme");
    const ReductionSketch sx = signed_reduction_sketch(x, *base, hash_seed);
    const ReductionSketch sy = signed_reduction_sketch(y, *base, hash_seed);
    if (signed_reduction_decide(sx, sy, *base) == DtepAnswer::Far) ++far;
  }
  return 2 * far > cfg.repetitions ? DtepAnswer::Far : DtepAnswer::Close;
}

}  // namespace normlab
