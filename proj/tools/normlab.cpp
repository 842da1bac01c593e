// normlab: command-line front end for the norm/sketch/transport toolkit.
//
// Every subcommand validates its flags before computing anything, writes
// machine-readable output (scalar, JSON, or CSV), and exits 0 on success,
// 2 on any validation error, 3 when the feasibility solver is
// indeterminate. File outputs are written atomically.

#include <cstdint>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "normlab/constants.hpp"
#include "normlab/emd.hpp"
#include "normlab/errors.hpp"
#include "normlab/harness.hpp"
#include "normlab/io.hpp"
#include "normlab/poincare.hpp"
#include "normlab/rng.hpp"
#include "normlab/sketch.hpp"
#include "normlab/spaces.hpp"

namespace {

using normlab::json;

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Print to stdout, or atomically to a file when a path is given.
void emit(const std::string& out_path, std::string content) {
  if (content.empty() || content.back() != '\n') content.push_back('\n');
  if (out_path.empty()) {
    std::cout << content;
  } else {
    normlab::atomic_write(out_path, content);
  }
}

json load_json_arg(const std::string& inline_text, const std::string& path, const char* what) {
  if (!inline_text.empty() && !path.empty())
    throw normlab::input_error(std::string(what) + ": give inline JSON or --file, not both");
  if (!inline_text.empty()) return normlab::parse_json_text(inline_text, what);
  if (!path.empty()) return normlab::load_json_file(path);
  throw normlab::input_error(std::string(what) + ": no input given");
}

// A measure document is signed when its total mass vanishes.
normlab::Vector embed_any_measure(const json& j, const normlab::EmbedConfig& cfg) {
  try {
    return grid_embed(normlab::signed_measure_from_json(j), cfg);
  } catch (const normlab::validation_error&) {
    return grid_embed(normlab::measure_from_json(j), cfg);
  }
}

const char* answer_name(normlab::DtepAnswer a) {
  return a == normlab::DtepAnswer::Close ? "close" : "far";
}

json report_with_meta(const normlab::ExperimentReport& rep, json extra) {
  json out = normlab::report_to_json(rep);
  for (auto& [k, v] : extra.items()) out[k] = v;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normlab: norms, stable sketches, transport distances, and threshold maps",
               "normlab"};
  app.require_subcommand(1);
  int exit_code = 0;

  // ---- norm ------------------------------------------------------------
  auto* norm_cmd = app.add_subcommand("norm", "lp norm of a vector");
  {
    auto p = std::make_shared<double>(2.0);
    auto vec = std::make_shared<std::string>();
    auto file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    norm_cmd->add_option("--p", *p, "norm index p > 0")->capture_default_str();
    norm_cmd->add_option("--vec", *vec, "vector as inline JSON, e.g. '[3,4]'");
    norm_cmd->add_option("--file", *file, "vector JSON file");
    norm_cmd->add_option("--out", *out, "write the result to this file (atomic)");
    norm_cmd->callback([=] {
      const normlab::Vector x =
          normlab::vector_from_json(load_json_arg(*vec, *file, "norm input"));
      emit(*out, format_number(normlab::lp_norm(x, *p)));
    });
  }

  // ---- trace -----------------------------------------------------------
  auto* trace_cmd = app.add_subcommand("trace", "trace norm (sum of singular values)");
  {
    auto mat = std::make_shared<std::string>();
    auto file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    trace_cmd->add_option("--mat", *mat, "matrix as inline JSON {rows,cols,entries}");
    trace_cmd->add_option("--file", *file, "matrix JSON file");
    trace_cmd->add_option("--out", *out, "write the result to this file (atomic)");
    trace_cmd->callback([=] {
      const normlab::Matrix a =
          normlab::matrix_from_json(load_json_arg(*mat, *file, "trace input"));
      emit(*out, format_number(normlab::trace_norm(a)));
    });
  }

  // ---- emd -------------------------------------------------------------
  auto* emd_cmd = app.add_subcommand("emd", "earth mover's distance on grid measures");
  emd_cmd->require_subcommand(1);
  {
    auto* dist = emd_cmd->add_subcommand("dist", "exact transport distance between two measures");
    auto a_path = std::make_shared<std::string>();
    auto b_path = std::make_shared<std::string>();
    auto plan_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    dist->add_option("--a", *a_path, "first measure JSON file")->required();
    dist->add_option("--b", *b_path, "second measure JSON file")->required();
    dist->add_option("--plan", *plan_path, "also write the optimal plan to this file (atomic)");
    dist->add_option("--out", *out, "write the distance to this file (atomic)");
    dist->callback([=] {
      const normlab::GridMeasure a =
          normlab::measure_from_json(normlab::load_json_file(*a_path));
      const normlab::GridMeasure b =
          normlab::measure_from_json(normlab::load_json_file(*b_path));
      const normlab::EmdResult res = normlab::emd_distance(a, b);
      if (!plan_path->empty())
        normlab::atomic_write(*plan_path, normlab::plan_to_json(res.plan).dump(2) + "\n");
      emit(*out, format_number(res.distance));
    });
  }
  {
    auto* normsub = emd_cmd->add_subcommand("norm", "transport norm of a signed measure");
    auto x_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    normsub->add_option("--x", *x_path, "signed measure JSON file (zero total mass)")->required();
    normsub->add_option("--out", *out, "write the result to this file (atomic)");
    normsub->callback([=] {
      const normlab::SignedGridMeasure x =
          normlab::signed_measure_from_json(normlab::load_json_file(*x_path));
      emit(*out, format_number(normlab::emd_norm(x)));
    });
  }
  {
    auto* embed = emd_cmd->add_subcommand("embed", "dyadic grid embedding of a measure");
    auto x_path = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(normlab::kDefaultSeed);
    auto deterministic = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    embed->add_option("--x", *x_path, "measure JSON file (signed or nonnegative)")->required();
    embed->add_option("--seed", *seed, "seed for the random grid shift")->capture_default_str();
    embed->add_flag("--deterministic", *deterministic, "use the zero grid shift");
    embed->add_option("--out", *out, "write the embedding to this file (atomic)");
    embed->callback([=] {
      const json j = normlab::load_json_file(*x_path);
      const int n = j.value("n", 0);
      const normlab::EmbedConfig cfg = *deterministic
                                           ? normlab::EmbedConfig::deterministic(n)
                                           : normlab::EmbedConfig::randomized(n, *seed);
      emit(*out, normlab::vector_to_json(embed_any_measure(j, cfg)).dump(2));
    });
  }
  {
    auto* reduce = emd_cmd->add_subcommand(
        "reduce", "threshold decision on two signed measures via the shift reduction");
    auto x_path = std::make_shared<std::string>();
    auto y_path = std::make_shared<std::string>();
    auto r = std::make_shared<double>(1.0);
    auto approx = std::make_shared<double>(2.0);
    auto reps = std::make_shared<int>(normlab::kReductionRepetitions);
    auto seed = std::make_shared<std::uint64_t>(normlab::kDefaultSeed);
    auto base = std::make_shared<std::string>("exact");
    auto m = std::make_shared<int>(normlab::kDefaultMeasurements);
    auto out = std::make_shared<std::string>();
    reduce->add_option("--x", *x_path, "first signed measure JSON file")->required();
    reduce->add_option("--y", *y_path, "second signed measure JSON file")->required();
    reduce->add_option("--r", *r, "close threshold")->capture_default_str();
    reduce->add_option("--approx", *approx, "far multiplier (> 1)")->capture_default_str();
    reduce->add_option("--reps", *reps, "independent repetitions (majority vote)")
        ->capture_default_str();
    reduce->add_option("--seed", *seed, "RNG seed")->capture_default_str();
    reduce->add_option("--base", *base, "base scheme for shifted measures")
        ->check(CLI::IsMember({"exact", "embed"}))
        ->capture_default_str();
    reduce->add_option("--m", *m, "measurements for the embed base")->capture_default_str();
    reduce->add_option("--out", *out, "write the verdict to this file (atomic)");
    reduce->callback([=] {
      const normlab::SignedGridMeasure x =
          normlab::signed_measure_from_json(normlab::load_json_file(*x_path));
      const normlab::SignedGridMeasure y =
          normlab::signed_measure_from_json(normlab::load_json_file(*y_path));
      if (x.side() != y.side())
        throw normlab::input_error("measures live on different grid sides");
      normlab::DtepConfig dtep;
      dtep.r = *r;
      dtep.approx = *approx;
      dtep.validate();
      const int n = x.side();
      const bool exact = *base == "exact";
      const int msr = *m;
      normlab::MeasureSchemeFactory make =
          [=](std::uint64_t s) -> std::shared_ptr<const normlab::MeasureSketchScheme> {
        if (exact) return std::make_shared<const normlab::ExactEmdScheme>(n, dtep);
        normlab::StableSketchConfig sc;
        sc.p = 1.0;
        sc.m = msr;
        sc.seed = normlab::derive_seed(s, 1);
        sc.dtep = dtep;
        return std::make_shared<const normlab::EmbedSketchScheme>(
            normlab::EmbedConfig::randomized(n, s), sc);
      };
      normlab::ReductionConfig rc;
      rc.seed = *seed;
      rc.repetitions = *reps;
      const normlab::DtepAnswer ans = normlab::reduction_protocol(x, y, make, rc);
      json doc{{"answer", answer_name(ans)},
               {"repetitions", *reps},
               {"base", *base},
               {"r", *r},
               {"approx", *approx}};
      emit(*out, doc.dump(2));
    });
  }

  // ---- dtep eval ---------------------------------------------------------
  auto* dtep_cmd = app.add_subcommand("dtep", "distance threshold estimation experiments");
  dtep_cmd->require_subcommand(1);
  {
    auto* eval = dtep_cmd->add_subcommand("eval", "close/far success rates of the stable sketch");
    auto p = std::make_shared<double>(1.0);
    auto m = std::make_shared<int>(normlab::kDefaultMeasurements);
    auto r = std::make_shared<double>(1.0);
    auto approx = std::make_shared<double>(2.0);
    auto dim = std::make_shared<int>(32);
    auto trials = std::make_shared<long>(1000);
    auto close = std::make_shared<double>(0.0);
    auto far = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(normlab::kDefaultSeed);
    auto jobs = std::make_shared<int>(1);
    auto min_rate = std::make_shared<double>(-1.0);
    auto out = std::make_shared<std::string>();
    eval->add_option("--p", *p, "norm index, in (0, 2]")->capture_default_str();
    eval->add_option("--m", *m, "measurements per sketch (odd)")->capture_default_str();
    eval->add_option("--r", *r, "close threshold")->capture_default_str();
    eval->add_option("--approx", *approx, "far multiplier (> 1)")->capture_default_str();
    eval->add_option("--dim", *dim, "ambient dimension of test vectors")->capture_default_str();
    eval->add_option("--trials", *trials, "trials (>= 100)")->capture_default_str();
    eval->add_option("--close", *close, "close margin, in (0, r]; 0 means r");
    eval->add_option("--far", *far, "far margin, > approx*r; 0 means 1.5*approx*r");
    eval->add_option("--seed", *seed, "RNG seed")->capture_default_str();
    eval->add_option("--jobs", *jobs, "worker threads for the experiment")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval->add_option("--min-rate", *min_rate,
                     "exit nonzero if either success rate falls below this");
    eval->add_option("--out", *out, "write the report to this file (atomic)");
    eval->callback([=, &exit_code] {
      normlab::DtepConfig dtep;
      dtep.r = *r;
      dtep.approx = *approx;
      dtep.validate();
      const double close_dist = *close > 0.0 ? *close : dtep.r;
      const double far_dist = *far > 0.0 ? *far : 1.5 * dtep.approx * dtep.r;
      const normlab::LpPairGenerator gen(*p, *dim, dtep, close_dist, far_dist,
                                         normlab::derive_seed(*seed, 0xA11CE));
      const double pp = *p;
      const int mm = *m;
      const int dd = *dim;
      normlab::SchemeFactory make =
          [=](std::uint64_t s) -> std::shared_ptr<const normlab::SketchScheme> {
        normlab::StableSketchConfig c;
        c.p = pp;
        c.m = mm;
        c.seed = s;
        c.dtep = dtep;
        return std::make_shared<const normlab::StableSketchScheme>(c, dd);
      };
      const normlab::ExperimentReport rep =
          normlab::run_dtep_experiment(make, gen, *trials, *seed, *jobs);
      emit(*out, report_with_meta(rep, json{{"p", *p},
                                            {"m", *m},
                                            {"r", dtep.r},
                                            {"approx", dtep.approx},
                                            {"close_margin", close_dist},
                                            {"far_margin", far_dist}})
                     .dump(2));
      if (*min_rate >= 0.0 && (rep.close_rate < *min_rate || rep.far_rate < *min_rate))
        exit_code = 1;
    });
  }

  // ---- boost eval ----------------------------------------------------------
  auto* boost_cmd = app.add_subcommand("boost", "max-of-norms product-space booster");
  boost_cmd->require_subcommand(1);
  {
    auto* eval = boost_cmd->add_subcommand("eval", "success rates of the boosted product scheme");
    auto k = std::make_shared<int>(8);
    auto t = std::make_shared<double>(1.0);
    auto approx = std::make_shared<double>(2.0);
    auto reps = std::make_shared<int>(normlab::kDefaultRepetitions);
    auto frac = std::make_shared<double>(normlab::kDefaultFarFraction);
    auto p = std::make_shared<double>(1.0);
    auto m = std::make_shared<int>(normlab::kDefaultMeasurements);
    auto dim = std::make_shared<int>(4);
    auto trials = std::make_shared<long>(1000);
    auto base = std::make_shared<std::string>("exact");
    auto close = std::make_shared<double>(0.0);
    auto far = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(normlab::kDefaultSeed);
    auto jobs = std::make_shared<int>(1);
    auto min_rate = std::make_shared<double>(-1.0);
    auto out = std::make_shared<std::string>();
    eval->add_option("--k", *k, "product arity")->check(CLI::PositiveNumber)->capture_default_str();
    eval->add_option("--t", *t, "product close threshold")->capture_default_str();
    eval->add_option("--approx", *approx, "base far multiplier (> 1)")->capture_default_str();
    eval->add_option("--reps", *reps, "sign repetitions")->capture_default_str();
    eval->add_option("--frac", *frac, "far vote fraction")->capture_default_str();
    eval->add_option("--p", *p, "norm index of the component spaces")->capture_default_str();
    eval->add_option("--m", *m, "measurements for the stable base")->capture_default_str();
    eval->add_option("--dim", *dim, "component dimension")->capture_default_str();
    eval->add_option("--trials", *trials, "trials (>= 100)")->capture_default_str();
    eval->add_option("--base", *base, "base scheme at threshold k*t")
        ->check(CLI::IsMember({"exact", "stable"}))
        ->capture_default_str();
    eval->add_option("--close", *close, "close margin, in (0, t]; 0 means t");
    eval->add_option("--far", *far, "far margin, > k*approx*t; 0 means 1.5*k*approx*t");
    eval->add_option("--seed", *seed, "RNG seed")->capture_default_str();
    eval->add_option("--jobs", *jobs, "worker threads for the experiment")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval->add_option("--min-rate", *min_rate,
                     "exit nonzero if either success rate falls below this");
    eval->add_option("--out", *out, "write the report to this file (atomic)");
    eval->callback([=, &exit_code] {
      normlab::DtepConfig product;
      product.r = *t;
      product.approx = *k * *approx;
      product.validate();
      normlab::DtepConfig base_dtep;
      base_dtep.r = *k * *t;
      base_dtep.approx = *approx;
      base_dtep.validate();
      const double close_dist = *close > 0.0 ? *close : product.r;
      const double far_dist = *far > 0.0 ? *far : 1.5 * product.approx * product.r;
      const normlab::ProductPairGenerator gen(*p, *k, *dim, product, close_dist, far_dist,
                                              normlab::derive_seed(*seed, 0xA11CE));
      const bool exact = *base == "exact";
      const double pp = *p;
      const int mm = *m;
      const int dd = *dim;
      normlab::SchemeFactory make_base =
          [=](std::uint64_t s) -> std::shared_ptr<const normlab::SketchScheme> {
        if (exact) return std::make_shared<const normlab::ExactNormScheme>(pp, base_dtep);
        normlab::StableSketchConfig c;
        c.p = pp;
        c.m = mm;
        c.seed = s;
        c.dtep = base_dtep;
        return std::make_shared<const normlab::StableSketchScheme>(c, dd);
      };
      normlab::BoostConfig bc;
      bc.k = *k;
      bc.repetitions = *reps;
      bc.far_fraction = *frac;
      const normlab::ExperimentReport rep =
          normlab::run_boost_experiment(make_base, bc, gen, *trials, *seed, *jobs);
      emit(*out, report_with_meta(rep, json{{"k", *k},
                                            {"t", *t},
                                            {"approx", *approx},
                                            {"repetitions", *reps},
                                            {"far_fraction", *frac},
                                            {"base", *base},
                                            {"close_margin", close_dist},
                                            {"far_margin", far_dist}})
                     .dump(2));
      if (*min_rate >= 0.0 && (rep.close_rate < *min_rate || rep.far_rate < *min_rate))
        exit_code = 1;
    });
  }

  // ---- poincare analyze -----------------------------------------------------
  auto* poincare_cmd = app.add_subcommand("poincare", "threshold maps and distribution witnesses");
  poincare_cmd->require_subcommand(1);
  {
    auto* analyze = poincare_cmd->add_subcommand(
        "analyze", "feasibility of a threshold map, or a witness at a requested slack");
    auto metric_path = std::make_shared<std::string>();
    auto s1 = std::make_shared<double>(0.0);
    auto s2 = std::make_shared<double>(0.0);
    auto tau1 = std::make_shared<double>(0.0);
    auto tau2 = std::make_shared<double>(0.0);
    auto tau3 = std::make_shared<double>(0.0);
    auto delta = std::make_shared<double>(0.0);
    auto tol = std::make_shared<double>(normlab::kTol.solver);
    auto max_iter = std::make_shared<int>(20000);
    auto adversarial = std::make_shared<int>(0);
    auto seed = std::make_shared<std::uint64_t>(normlab::kDefaultSeed);
    auto out = std::make_shared<std::string>();
    analyze->add_option("--metric", *metric_path, "finite metric JSON file {n, d}")->required();
    analyze->add_option("--s1", *s1, "close metric threshold")->required();
    analyze->add_option("--s2", *s2, "far metric threshold (> s1)")->required();
    analyze->add_option("--tau1", *tau1, "target distance cap on close pairs")->required();
    analyze->add_option("--tau2", *tau2, "target distance floor on far pairs")->required();
    analyze->add_option("--tau3", *tau3, "target distance cap on all pairs (threshold-map mode)");
    analyze->add_option("--delta", *delta, "requested witness slack (witness mode)");
    analyze->add_option("--tol", *tol, "solver tolerance")->capture_default_str();
    analyze->add_option("--max-iter", *max_iter, "solver iteration budget")->capture_default_str();
    analyze->add_option("--adversarial", *adversarial,
                        "probe a found witness with this many projected-gradient iterations");
    analyze->add_option("--seed", *seed, "RNG seed for the adversarial probe")
        ->capture_default_str();
    analyze->add_option("--out", *out, "write the report to this file (atomic)");
    analyze->callback([=, &exit_code] {
      const bool tau3_mode = *tau3 > 0.0;
      const bool delta_mode = *delta > 0.0;
      if (tau3_mode == delta_mode)
        throw normlab::input_error("give exactly one of --tau3 and --delta");
      const normlab::FiniteMetric X =
          normlab::metric_from_json(normlab::load_json_file(*metric_path));
      const normlab::PairSpace ps(X.size());
      json doc;
      const normlab::PoincareWitness* found = nullptr;
      normlab::ThresholdMapResult result;
      if (tau3_mode) {
        normlab::ThresholdParams P;
        P.s1 = *s1;
        P.s2 = *s2;
        P.tau1 = *tau1;
        P.tau2 = *tau2;
        P.tau3 = *tau3;
        P.validate();
        result = normlab::threshold_feasibility(X, P, *tol, *max_iter);
        doc = normlab::threshold_result_to_json(result, ps);
        if (result.status == normlab::SolveStatus::Indeterminate) exit_code = 3;
        if (result.witness) found = &*result.witness;
      } else {
        const normlab::WitnessSearchResult search =
            normlab::distribution_witness(X, *s1, *s2, *tau1, *tau2, *delta);
        result = search.details;
        doc["details"] = normlab::threshold_result_to_json(search.details, ps);
        switch (search.status) {
          case normlab::WitnessSearchStatus::WitnessFound:
            doc["status"] = "witness-found";
            break;
          case normlab::WitnessSearchStatus::FeasibleNoWitness:
            doc["status"] = "feasible-no-witness";
            break;
          case normlab::WitnessSearchStatus::Indeterminate:
            doc["status"] = "indeterminate";
            exit_code = 3;
            break;
        }
        if (search.witness) {
          doc["witness"] = normlab::witness_to_json(*search.witness, ps);
          result.witness = search.witness;
          found = &*result.witness;
        }
      }
      if (*adversarial > 0 && found != nullptr) {
        const normlab::AdversarialResult probe =
            normlab::adversarial_map(*found, X, *adversarial, *seed);
        doc["adversarial_gap"] = probe.gap;
      }
      emit(*out, doc.dump(2));
    });
  }

  // ---- report ---------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "measured profiles as CSV or JSON");
  report_cmd->require_subcommand(1);
  {
    auto* distortion = report_cmd->add_subcommand(
        "distortion", "embedding-vs-transport distortion over random signed measures");
    auto n = std::make_shared<int>(8);
    auto count = std::make_shared<int>(50);
    auto seed = std::make_shared<std::uint64_t>(normlab::kDefaultSeed);
    auto deterministic = std::make_shared<bool>(false);
    auto format = std::make_shared<std::string>("csv");
    auto out = std::make_shared<std::string>();
    distortion->add_option("--n", *n, "grid side")->capture_default_str();
    distortion->add_option("--count", *count, "number of random measures")->capture_default_str();
    distortion->add_option("--seed", *seed, "RNG seed")->capture_default_str();
    distortion->add_flag("--deterministic", *deterministic, "use the zero grid shift");
    distortion->add_option("--format", *format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    distortion->add_option("--out", *out, "write the report to this file (atomic)");
    distortion->callback([=] {
      const std::vector<normlab::SignedGridMeasure> instances =
          normlab::random_signed_measures(*n, *count, *seed);
      const normlab::EmbedConfig cfg =
          *deterministic ? normlab::EmbedConfig::deterministic(*n)
                         : normlab::EmbedConfig::randomized(*n, normlab::derive_seed(*seed, 1));
      const normlab::DistortionReport rep = normlab::distortion_report(instances, cfg);
      emit(*out, *format == "csv" ? normlab::distortion_csv(rep)
                                  : normlab::distortion_to_json(rep).dump(2));
    });
  }
  {
    auto* trace_gap = report_cmd->add_subcommand(
        "trace-gap", "trace-to-Frobenius ratio profile over random matrices");
    auto sizes = std::make_shared<std::vector<int>>(std::vector<int>{2, 4, 8, 16});
    auto trials = std::make_shared<long>(100);
    auto seed = std::make_shared<std::uint64_t>(normlab::kDefaultSeed);
    auto format = std::make_shared<std::string>("csv");
    auto out = std::make_shared<std::string>();
    trace_gap->add_option("--sizes", *sizes, "matrix sizes (each <= 64)")
        ->delimiter(',')
        ->capture_default_str();
    trace_gap->add_option("--trials", *trials, "matrices per size")->capture_default_str();
    trace_gap->add_option("--seed", *seed, "RNG seed")->capture_default_str();
    trace_gap->add_option("--format", *format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    trace_gap->add_option("--out", *out, "write the report to this file (atomic)");
    trace_gap->callback([=] {
      const std::vector<normlab::TraceGapRow> rows =
          normlab::trace_gap_experiment(*sizes, *trials, *seed);
      emit(*out, *format == "csv" ? normlab::trace_gap_csv(rows)
                                  : normlab::trace_gap_to_json(rows).dump(2));
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const normlab::error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return exit_code;
}
