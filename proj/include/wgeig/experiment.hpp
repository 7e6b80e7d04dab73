#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "augsub.hpp"
#include "linalg.hpp"
#include "mesh.hpp"

namespace wgeig {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Algorithm { FirstK, Single };
enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  int degree = 0;
  std::vector<int> coarse_n{8};
  int fine_n = 64;
  Algorithm algorithm = Algorithm::FirstK;
  int k = 1;
  int target = 1;
  int iterations = 10;
  std::uint64_t seed = 1;
  double tol = 1e-10;  ///< reference eigensolver residual tolerance
  double pcg_tol = 1e-12;
  double cluster_tol = 1e-6;
  double stop_tol = 0.0;  ///< 0 disables early stopping
  double ratio_min = 2.5;
  double ratio_max = 6.5;
  std::string out;
  OutputFormat format = OutputFormat::Csv;

  /// Number of reference pairs needed to measure errors of every tracked target.
  [[nodiscard]] int reference_count() const {
    return (algorithm == Algorithm::FirstK ? k : target) + 2;
  }

  void validate() const {
    if (degree != 0 && degree != 1) throw ConfigError("degree must be 0 or 1");
    if (fine_n < 1) throw ConfigError("fine n must be positive");
    if (coarse_n.empty()) throw ConfigError("at least one coarse n is required");
    for (int nc : coarse_n) {
      if (nc < 1 || nc > fine_n || fine_n % nc != 0)
        throw ConfigError("fine n " + std::to_string(fine_n) + " is not a refinement of coarse n " + std::to_string(nc));
      const int ratio = fine_n / nc;
      if ((ratio & (ratio - 1)) != 0)
        throw ConfigError("fine n / coarse n = " + std::to_string(ratio) + " is not a power of two");
      if (nc < 2) throw ConfigError("coarse n must be at least 2 so that W_H is nontrivial");
    }
    if (k < 1) throw ConfigError("k must be >= 1");
    if (target < 1) throw ConfigError("target must be >= 1");
    if (iterations < 0) throw ConfigError("iteration count must be nonnegative");
    if (!(tol > 0.0) || !(pcg_tol > 0.0)) throw ConfigError("tolerances must be positive");
    if (!(cluster_tol >= 0.0) || !(stop_tol >= 0.0)) throw ConfigError("tolerances must be nonnegative");
    if (!(ratio_min < ratio_max)) throw ConfigError("empty ratio window");
  }

  [[nodiscard]] RunOptions run_options() const {
    RunOptions o;
    o.k = k;
    o.target = target;
    o.iterations = iterations;
    o.seed = seed;
    o.solver.pcg_tol = pcg_tol;
    o.cluster_tol = cluster_tol;
    o.stop_tol = stop_tol;
    o.coarse_tol = tol;
    return o;
  }
};

/// Per-iteration reduction factor fitted over the leading pre-stagnation window.
struct FactorFit {
  double factor = std::numeric_limits<double>::quiet_NaN();
  double floor = 0.0;
  int first = 0;   ///< first error index used
  int points = 0;  ///< number of errors in the window
  bool ok = false;
};

/// Geometric-mean reduction factor of errors[skip..], stopping before the first error
/// that falls below `floor`. Needs at least three errors in the window.
inline FactorFit fit_factor(const std::vector<double>& errors, double floor, int skip = 1) {
  FactorFit fit;
  fit.floor = floor;
  fit.first = skip;
  int last = skip - 1;
  for (int i = skip; i < static_cast<int>(errors.size()); ++i) {
    if (!(errors[i] >= floor) || !(errors[i] > 0.0)) break;
    last = i;
  }
  fit.points = last - skip + 1;
  if (fit.points < 3) return fit;
  fit.factor = std::pow(errors[last] / errors[skip], 1.0 / (fit.points - 1));
  fit.ok = true;
  return fit;
}

struct TargetRates {
  int target = 0;
  FactorFit a;
  FactorFit b;
};

struct CoarseRates {
  int coarse_n = 0;
  double mesh_size = 0.0;
  std::vector<TargetRates> targets;
};

/// factor(H) / factor(H/2) for consecutive coarse sizes, per target.
struct RatioEntry {
  int coarse_n = 0;
  int next_n = 0;
  int target = 0;
  double a_ratio = std::numeric_limits<double>::quiet_NaN();
  double b_ratio = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
};

struct RateReport {
  std::vector<CoarseRates> rows;
  std::vector<RatioEntry> ratios;
  [[nodiscard]] bool pass() const {
    if (ratios.empty()) return false;
    for (const auto& r : ratios)
      if (!r.pass) return false;
    return true;
  }
};

inline CoarseRates fit_trace(const IterationTrace& trace, int coarse_n, double floor) {
  CoarseRates row;
  row.coarse_n = coarse_n;
  row.mesh_size = std::sqrt(2.0) / coarse_n;
  for (std::size_t t = 0; t < trace.targets.size(); ++t) {
    TargetRates tr;
    tr.target = trace.targets[t];
    tr.a = fit_factor(trace.errors(static_cast<Index>(t), true), floor);
    tr.b = fit_factor(trace.errors(static_cast<Index>(t), false), floor);
    row.targets.push_back(tr);
  }
  return row;
}

inline RateReport rate_report(std::vector<CoarseRates> rows, double ratio_min, double ratio_max) {
  RateReport rep;
  rep.rows = std::move(rows);
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
    const auto& h = rep.rows[i];
    const auto& h2 = rep.rows[i + 1];
    for (std::size_t t = 0; t < h.targets.size() && t < h2.targets.size(); ++t) {
      RatioEntry r;
      r.coarse_n = h.coarse_n;
      r.next_n = h2.coarse_n;
      r.target = h.targets[t].target;
      if (h.targets[t].a.ok && h2.targets[t].a.ok) r.a_ratio = h.targets[t].a.factor / h2.targets[t].a.factor;
      if (h.targets[t].b.ok && h2.targets[t].b.ok) r.b_ratio = h.targets[t].b.factor / h2.targets[t].b.factor;
      r.pass = r.a_ratio >= ratio_min && r.a_ratio <= ratio_max;
      rep.ratios.push_back(r);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Running

/// Fine problem plus reference eigenpairs shared by every coarse size of a configuration.
struct ExperimentContext {
  FineProblem fine;
  EigenSet reference;
  double reference_seconds = 0.0;

  explicit ExperimentContext(const ExperimentConfig& cfg)
      : fine(TriMesh::build_uniform(cfg.fine_n), cfg.degree) {
    const auto t0 = std::chrono::steady_clock::now();
    ReferenceOptions ropts;
    ropts.seed = cfg.seed;
    reference = reference_eigensolve(fine.stiffness, fine.mass, cfg.reference_count(), cfg.tol, ropts);
    reference_seconds = detail::seconds_since(t0);
  }
};

inline IterationTrace run_experiment(const ExperimentConfig& cfg, const ExperimentContext& ctx, int coarse_n) {
  const TriMesh coarse = TriMesh::build_uniform(coarse_n);
  const RunOptions opts = cfg.run_options();
  return cfg.algorithm == Algorithm::FirstK ? run_algorithm_k(coarse, ctx.fine, opts, &ctx.reference)
                                            : run_algorithm_single(coarse, ctx.fine, opts, &ctx.reference);
}

/// Errors below this are treated as stagnated at the reference accuracy.
inline double stagnation_floor(const ExperimentConfig& cfg) { return 10.0 * cfg.tol; }

// ---------------------------------------------------------------------------
// Output

/// 17 significant digits, independent of the global locale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline const char* trace_csv_header() { return "iter,target,lambda,a_err,b_err,a_factor,b_factor"; }

inline void write_trace_csv(std::ostream& os, const IterationTrace& trace) {
  os << trace_csv_header() << '\n';
  for (std::size_t l = 0; l < trace.entries.size(); ++l) {
    const auto& e = trace.entries[l];
    for (std::size_t t = 0; t < trace.targets.size(); ++t) {
      const auto ti = static_cast<Index>(t);
      os << e.iter << ',' << trace.targets[t] << ',' << format_double(e.lambda[ti]) << ','
         << format_double(e.a_err[ti]) << ',' << format_double(e.b_err[ti]) << ','
         << format_double(trace.factor(l, ti, true)) << ',' << format_double(trace.factor(l, ti, false)) << '\n';
    }
  }
}

/// One row per (coarse n, target); the ratio columns compare a row with the next coarse size.
inline void write_rates_csv(std::ostream& os, const RateReport& rep) {
  os << "coarse_n,target,a_factor,b_factor,points,next_n,a_ratio,b_ratio,pass\n";
  for (const auto& row : rep.rows)
    for (const auto& t : row.targets) {
      os << row.coarse_n << ',' << t.target << ',' << format_double(t.a.factor) << ',' << format_double(t.b.factor)
         << ',' << t.a.points;
      const RatioEntry* ratio = nullptr;
      for (const auto& r : rep.ratios)
        if (r.coarse_n == row.coarse_n && r.target == t.target) ratio = &r;
      if (ratio)
        os << ',' << ratio->next_n << ',' << format_double(ratio->a_ratio) << ',' << format_double(ratio->b_ratio)
           << ',' << (ratio->pass ? "PASS" : "FAIL");
      else
        os << ",,,,";
      os << '\n';
    }
}

/// JSON has no NaN; unavailable values become null.
inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const FactorFit& f) {
  return {{"factor", json_number(f.factor)}, {"floor", f.floor}, {"first", f.first}, {"points", f.points}, {"ok", f.ok}};
}

inline nlohmann::json to_json(const CoarseRates& row) {
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : row.targets) targets.push_back({{"target", t.target}, {"a", to_json(t.a)}, {"b", to_json(t.b)}});
  return {{"coarse_n", row.coarse_n}, {"H", row.mesh_size}, {"targets", targets}};
}

inline nlohmann::json to_json(const RateReport& rep) {
  nlohmann::json rows = nlohmann::json::array(), ratios = nlohmann::json::array();
  for (const auto& r : rep.rows) rows.push_back(to_json(r));
  for (const auto& r : rep.ratios)
    ratios.push_back({{"coarse_n", r.coarse_n},
                      {"next_n", r.next_n},
                      {"target", r.target},
                      {"a_ratio", json_number(r.a_ratio)},
                      {"b_ratio", json_number(r.b_ratio)},
                      {"pass", r.pass}});
  return {{"rows", rows}, {"ratios", ratios}, {"pass", rep.pass()}};
}

inline nlohmann::json to_json(const IterationTrace& trace) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t l = 0; l < trace.entries.size(); ++l) {
    const auto& e = trace.entries[l];
    nlohmann::json lam = nlohmann::json::array(), ae = nlohmann::json::array(), be = nlohmann::json::array();
    for (Index t = 0; t < e.lambda.size(); ++t) {
      lam.push_back(e.lambda[t]);
      ae.push_back(json_number(e.a_err[t]));
      be.push_back(json_number(e.b_err[t]));
    }
    nlohmann::json gaps = nlohmann::json::array();
    for (const auto& g : e.gaps)
      gaps.push_back({{"projected_k", json_number(g.projected_k)},
                      {"projected_other", json_number(g.projected_other)},
                      {"reference_k", json_number(g.reference_k)}});
    entries.push_back({{"iter", e.iter},
                       {"lambda", lam},
                       {"a_err", ae},
                       {"b_err", be},
                       {"seconds", e.seconds},
                       {"pcg_iterations", e.pcg_iterations},
                       {"ritz", e.ritz},
                       {"gaps", gaps}});
  }
  return {{"algorithm", trace.algorithm == IterationTrace::Algorithm::FirstK ? "k" : "single"},
          {"targets", trace.targets},
          {"seed", trace.seed},
          {"coarse_dim", trace.coarse_dim},
          {"entries", entries}};
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"degree", cfg.degree},
          {"coarse_n", cfg.coarse_n},
          {"fine_n", cfg.fine_n},
          {"algo", cfg.algorithm == Algorithm::FirstK ? "k" : "single"},
          {"k", cfg.k},
          {"target", cfg.target},
          {"iters", cfg.iterations},
          {"seed", cfg.seed},
          {"tol", cfg.tol},
          {"pcg_tol", cfg.pcg_tol},
          {"cluster_tol", cfg.cluster_tol},
          {"stop_tol", cfg.stop_tol}};
}

inline nlohmann::json to_json(const EigenSet& es) {
  nlohmann::json vals = nlohmann::json::array(), res = nlohmann::json::array();
  for (Index i = 0; i < es.count(); ++i) {
    vals.push_back(es.values[i]);
    res.push_back(i < es.residuals.size() ? json_number(es.residuals[i]) : nlohmann::json(nullptr));
  }
  return {{"eigenvalues", vals}, {"residuals", res}, {"iterations", es.iterations}, {"seed", es.seed}};
}

}  // namespace wgeig
