#include "normlab/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "normlab/errors.hpp"

namespace normlab {

namespace {

double finite_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw validation_error(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw validation_error(what + " must be finite");
  return v;
}

long checked_integer(const json& j, const std::string& what, long lo, long hi) {
  if (!j.is_number_integer()) throw validation_error(what + " must be an integer");
  const long v = j.get<long>();
  if (v < lo || v > hi) {
    std::ostringstream os;
    os << what << " must lie in [" << lo << ", " << hi << "]";
    throw validation_error(os.str());
  }
  return v;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::uint64_t parse_hex64(const json& j, const std::string& what) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (!j.is_string()) throw validation_error(what + " must be a hex string or unsigned integer");
  const std::string s = j.get<std::string>();
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &pos, 0);
  } catch (const std::exception&) {
    throw validation_error(what + " is not a valid integer literal");
  }
  if (pos != s.size()) throw validation_error(what + " is not a valid integer literal");
  return v;
}

}  // namespace

json parse_json_text(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw validation_error(what + " is not valid JSON");
  return j;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path);
}

Vector vector_from_json(const json& j) {
  const json* arr = nullptr;
  if (j.is_array()) {
    arr = &j;
  } else if (j.is_object() && j.contains("coords") && j["coords"].is_array()) {
    arr = &j["coords"];
  } else {
    throw validation_error("vector must be an array or an object with a coords array");
  }
  Vector v(static_cast<Eigen::Index>(arr->size()));
  for (std::size_t i = 0; i < arr->size(); ++i)
    v[static_cast<Eigen::Index>(i)] = finite_number((*arr)[i], "vector coordinate");
  return v;
}

json vector_to_json(const Vector& v) {
  json coords = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) coords.push_back(v[i]);
  return json{{"coords", coords}};
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_object()) throw validation_error("matrix must be an object");
  const long rows = checked_integer(j.value("rows", json()), "matrix rows", 1, 1 << 20);
  const long cols = checked_integer(j.value("cols", json()), "matrix cols", 1, 1 << 20);
  if (!j.contains("entries") || !j["entries"].is_array())
    throw validation_error("matrix needs an entries array");
  const json& e = j["entries"];
  if (static_cast<long>(e.size()) != rows * cols)
    throw validation_error("matrix entries length must equal rows * cols");
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c)
      m(r, c) = finite_number(e[static_cast<std::size_t>(r * cols + c)], "matrix entry");
  return m;
}

json matrix_to_json(const Matrix& m) {
  json entries = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) entries.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", entries}};
}

FiniteMetric metric_from_json(const json& j) {
  if (!j.is_object()) throw validation_error("metric must be an object");
  const long n = checked_integer(j.value("n", json()), "metric size", 1, 4096);
  if (!j.contains("d") || !j["d"].is_array() || static_cast<long>(j["d"].size()) != n)
    throw validation_error("metric needs an n-row distance table");
  Matrix d(n, n);
  for (long r = 0; r < n; ++r) {
    const json& row = j["d"][static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<long>(row.size()) != n)
      throw validation_error("metric rows must each hold n entries");
    for (long c = 0; c < n; ++c)
      d(r, c) = finite_number(row[static_cast<std::size_t>(c)], "metric distance");
  }
  return FiniteMetric(static_cast<int>(n), d);
}

json metric_to_json(const FiniteMetric& x) {
  json rows = json::array();
  for (int r = 0; r < x.size(); ++r) {
    json row = json::array();
    for (int c = 0; c < x.size(); ++c) row.push_back(x(r, c));
    rows.push_back(row);
  }
  return json{{"n", x.size()}, {"d", rows}};
}

namespace {

std::vector<GridCell> cells_from_json(const json& j, int& n) {
  if (!j.is_object()) throw validation_error("measure must be an object");
  n = static_cast<int>(checked_integer(j.value("n", json()), "measure grid side", 1, 1 << 15));
  if (!j.contains("cells") || !j["cells"].is_array())
    throw validation_error("measure needs a cells array");
  std::vector<GridCell> cells;
  cells.reserve(j["cells"].size());
  for (const json& c : j["cells"]) {
    if (!c.is_object()) throw validation_error("measure cells must be objects");
    GridCell cell;
    cell.x = static_cast<int>(checked_integer(c.value("x", json()), "cell x", 0, n - 1));
    cell.y = static_cast<int>(checked_integer(c.value("y", json()), "cell y", 0, n - 1));
    cell.w = finite_number(c.value("w", json()), "cell weight");
    cells.push_back(cell);
  }
  return cells;
}

json cells_to_json(const GridMeasure& m) {
  json cells = json::array();
  for (const auto& [xy, w] : m.cells())
    cells.push_back(json{{"x", xy.first}, {"y", xy.second}, {"w", w}});
  return json{{"n", m.side()}, {"cells", cells}};
}

}  // namespace

GridMeasure measure_from_json(const json& j) {
  int n = 0;
  auto cells = cells_from_json(j, n);
  return GridMeasure(n, cells);
}

SignedGridMeasure signed_measure_from_json(const json& j) {
  int n = 0;
  auto cells = cells_from_json(j, n);
  return SignedGridMeasure(n, cells);
}

json measure_to_json(const GridMeasure& m) { return cells_to_json(m); }

json measure_to_json(const SignedGridMeasure& m) { return cells_to_json(m); }

json plan_to_json(const TransportPlan& plan) {
  json flows = json::array();
  for (const auto& f : plan.flows) {
    flows.push_back({{"from", {f.from_x, f.from_y}}, {"to", {f.to_x, f.to_y}}, {"mass", f.mass}});
  }
  return json{{"cost", plan.cost}, {"flows", std::move(flows)}};
}

SketchVector sketch_from_json(const json& j) {
  if (!j.is_object()) throw validation_error("sketch must be an object");
  SketchVector s;
  if (!j.contains("fingerprint")) throw validation_error("sketch needs a fingerprint");
  s.fingerprint = parse_hex64(j["fingerprint"], "sketch fingerprint");
  if (!j.contains("values") || !j["values"].is_array())
    throw validation_error("sketch needs a values array");
  s.values.resize(static_cast<Eigen::Index>(j["values"].size()));
  for (std::size_t i = 0; i < j["values"].size(); ++i)
    s.values[static_cast<Eigen::Index>(i)] = finite_number(j["values"][i], "sketch value");
  return s;
}

json sketch_to_json(const SketchVector& s) {
  json values = json::array();
  for (Eigen::Index i = 0; i < s.values.size(); ++i) values.push_back(s.values[i]);
  return json{{"fingerprint", hex64(s.fingerprint)}, {"values", values}};
}

json report_to_json(const ExperimentReport& rep) {
  return json{{"trials", rep.trials},
              {"close", json{{"successes", rep.close_successes},
                             {"rate", rep.close_rate},
                             {"wilson_half_width", rep.close_half_width}}},
              {"far", json{{"successes", rep.far_successes},
                           {"rate", rep.far_rate},
                           {"wilson_half_width", rep.far_half_width}}},
              {"seed", hex64(rep.seed)}};
}

json distortion_to_json(const DistortionReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back(json{{"instance_id", std::to_string(r.first) + "-" + std::to_string(r.second)},
                        {"emd", r.emd},
                        {"embedded", r.embedded},
                        {"ratio", r.ratio}});
  return json{{"side", rep.side},
              {"min_ratio", rep.min_ratio},
              {"max_ratio", rep.max_ratio},
              {"distortion", rep.distortion},
              {"pairs", rows}};
}

std::string distortion_csv(const DistortionReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "instance_id,emd,embedded,ratio\n";
  for (const auto& r : rep.rows)
    os << r.first << "-" << r.second << "," << r.emd << "," << r.embedded << "," << r.ratio
       << "\n";
  return os.str();
}

std::string trace_gap_csv(const std::vector<TraceGapRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "n,trials,max_ratio,identity_ratio\n";
  for (const auto& r : rows)
    os << r.n << "," << r.trials << "," << r.max_ratio << "," << r.identity_ratio << "\n";
  return os.str();
}

json trace_gap_to_json(const std::vector<TraceGapRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back(json{{"n", r.n},
                       {"trials", r.trials},
                       {"max_ratio", r.max_ratio},
                       {"identity_ratio", r.identity_ratio}});
  return json{{"rows", out}};
}

json witness_to_json(const PoincareWitness& w, const PairSpace& ps) {
  json mu1 = json::array(), mu2 = json::array();
  for (int idx = 0; idx < ps.count(); ++idx) {
    auto [i, j] = ps.pair(idx);
    if (w.mu1[idx] != 0.0) mu1.push_back(json{{"i", i}, {"j", j}, {"weight", w.mu1[idx]}});
    if (w.mu2[idx] != 0.0) mu2.push_back(json{{"i", i}, {"j", j}, {"weight", w.mu2[idx]}});
  }
  return json{{"mu1", mu1}, {"mu2", mu2}, {"ratio", w.ratio}, {"delta", w.delta}};
}

json threshold_result_to_json(const ThresholdMapResult& res, const PairSpace& ps) {
  json out;
  switch (res.status) {
    case SolveStatus::Feasible:
      out["status"] = "feasible";
      break;
    case SolveStatus::Infeasible:
      out["status"] = "infeasible";
      break;
    case SolveStatus::Indeterminate:
      out["status"] = "indeterminate";
      break;
  }
  out["iterations"] = res.iterations;
  out["gap_norm"] = res.gap_norm;
  out["box_violation"] = res.box_violation;
  if (res.points) out["points"] = matrix_to_json(*res.points);
  if (res.hyperplane) {
    json plane = json::array();
    for (int idx = 0; idx < ps.count(); ++idx) {
      auto [i, j] = ps.pair(idx);
      if ((*res.hyperplane)[idx] != 0.0)
        plane.push_back(json{{"i", i}, {"j", j}, {"weight", (*res.hyperplane)[idx]}});
    }
    out["hyperplane"] = plane;
    out["cone_margin"] = res.cone_margin;
    out["box_margin"] = res.box_margin;
  }
  if (res.witness) out["witness"] = witness_to_json(*res.witness, ps);
  return out;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot open " + tmp + " for writing");
    out << content;
    out.flush();
    if (!out) throw error("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw error("cannot move " + tmp + " into place: " + std::strerror(errno));
  }
}

}  // namespace normlab
