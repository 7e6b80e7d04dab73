// Experiment runner: reference solves, augmented-subspace traces and rate fits.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <wgeig/wgeig.hpp>

namespace {

using namespace wgeig;

constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

void add_common(CLI::App* cmd, ExperimentConfig& cfg, std::string& format) {
  cmd->add_option("--degree", cfg.degree, "WG polynomial degree r")->check(CLI::IsMember({0, 1}));
  cmd->add_option("--fine-n", cfg.fine_n, "fine mesh subdivisions per side");
  cmd->add_option("--k", cfg.k, "number of eigenpairs");
  cmd->add_option("--seed", cfg.seed, "random seed");
  cmd->add_option("--tol", cfg.tol, "reference eigensolver residual tolerance");
  cmd->add_option("--out", cfg.out, "output path (stdout if omitted)");
  cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

void add_iteration(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option("--coarse-n", cfg.coarse_n, "coarse mesh subdivisions per side")->delimiter(',');
  cmd->add_option("--algo", cfg.algorithm, "k (first k pairs) or single (one target)")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Algorithm>{{"k", Algorithm::FirstK}, {"single", Algorithm::Single}}));
  cmd->add_option("--target", cfg.target, "target eigenpair index for --algo single");
  cmd->add_option("--iters", cfg.iterations, "number of iterations");
  cmd->add_option("--pcg-tol", cfg.pcg_tol, "relative residual for the linear solves");
  cmd->add_option("--cluster-tol", cfg.cluster_tol, "relative spacing below which eigenvalues form a cluster");
  cmd->add_option("--stop-tol", cfg.stop_tol, "stop once eigenvalues change by less than this (0: never)");
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open output file " + path);
  os << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

int cmd_solve(ExperimentConfig& cfg, bool dump_vectors) {
  if (cfg.fine_n < 1) throw ConfigError("fine n must be positive");
  if (cfg.degree != 0 && cfg.degree != 1) throw ConfigError("degree must be 0 or 1");
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  FineProblem fine(TriMesh::build_uniform(cfg.fine_n), cfg.degree);
  ReferenceOptions ropts;
  ropts.seed = cfg.seed;
  const EigenSet es = reference_eigensolve(fine.stiffness, fine.mass, cfg.k, cfg.tol, ropts);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (cfg.format == OutputFormat::Csv) {
    std::ostringstream os;
    os << "index,lambda,residual\n";
    for (Index i = 0; i < es.count(); ++i)
      os << i + 1 << ',' << format_double(es.values[i]) << ',' << format_double(es.residuals[i]) << '\n';
    emit(cfg.out, os.str());
    return 0;
  }
  nlohmann::json j = to_json(es);
  j["degree"] = cfg.degree;
  j["n"] = cfg.fine_n;
  j["h"] = fine.space.mesh().mesh_size();
  j["num_dofs"] = fine.space.num_dofs();
  j["tol"] = cfg.tol;
  j["seconds"] = seconds;
  if (dump_vectors) {
    nlohmann::json vecs = nlohmann::json::array();
    for (Index i = 0; i < es.count(); ++i)
      vecs.push_back(std::vector<double>(es.vectors.col(i).data(), es.vectors.col(i).data() + es.vectors.rows()));
    j["eigenvectors"] = vecs;
  }
  emit(cfg.out, dump(j));
  return 0;
}

int cmd_iterate(ExperimentConfig& cfg) {
  if (cfg.coarse_n.size() != 1) throw ConfigError("iterate takes exactly one coarse n");
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentContext ctx(cfg);
  const IterationTrace trace = run_experiment(cfg, ctx, cfg.coarse_n.front());
  const CoarseRates fits = fit_trace(trace, cfg.coarse_n.front(), stagnation_floor(cfg));

  nlohmann::json summary = {{"config", to_json(cfg)},
                            {"reference", to_json(ctx.reference)},
                            {"reference_seconds", ctx.reference_seconds},
                            {"rates", to_json(fits)},
                            {"trace", to_json(trace)},
                            {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  if (cfg.format == OutputFormat::Json) {
    emit(cfg.out, dump(summary));
    return 0;
  }
  std::ostringstream os;
  write_trace_csv(os, trace);
  emit(cfg.out, os.str());
  if (!cfg.out.empty()) {
    std::filesystem::path side(cfg.out);
    side.replace_extension(".summary.json");
    emit(side.string(), dump(summary));
  }
  return 0;
}

int cmd_rates(ExperimentConfig& cfg) {
  std::sort(cfg.coarse_n.begin(), cfg.coarse_n.end());
  cfg.coarse_n.erase(std::unique(cfg.coarse_n.begin(), cfg.coarse_n.end()), cfg.coarse_n.end());
  if (cfg.coarse_n.size() < 2) throw ConfigError("rates needs at least two distinct coarse sizes");
  cfg.validate();
  const ExperimentContext ctx(cfg);
  std::vector<CoarseRates> rows;
  nlohmann::json traces = nlohmann::json::array();
  for (int nc : cfg.coarse_n) {
    const IterationTrace trace = run_experiment(cfg, ctx, nc);
    rows.push_back(fit_trace(trace, nc, stagnation_floor(cfg)));
    traces.push_back({{"coarse_n", nc}, {"trace", to_json(trace)}});
  }
  const RateReport report = rate_report(std::move(rows), cfg.ratio_min, cfg.ratio_max);

  if (cfg.format == OutputFormat::Json) {
    nlohmann::json j = {{"config", to_json(cfg)},
                        {"window", {cfg.ratio_min, cfg.ratio_max}},
                        {"reference", to_json(ctx.reference)},
                        {"report", to_json(report)},
                        {"traces", traces}};
    emit(cfg.out, dump(j));
  } else {
    std::ostringstream os;
    write_rates_csv(os, report);
    emit(cfg.out, os.str());
  }
  for (const auto& row : report.rows)
    for (const auto& t : row.targets)
      if (!t.a.ok) {
        std::cerr << "error: coarse n " << row.coarse_n << ", target " << t.target << ": only " << t.a.points
                  << " pre-stagnation errors, need at least 3 for a fit\n";
        return kExitSolver;
      }
  std::cerr << "ratio window [" << cfg.ratio_min << ", " << cfg.ratio_max << "]: " << (report.pass() ? "PASS" : "FAIL")
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak Galerkin eigensolver with augmented subspace iterations"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string format;
  bool dump_vectors = false;
  auto* solve = app.add_subcommand("solve", "reference eigenpairs on the fine mesh");
  add_common(solve, cfg, format);
  solve->add_flag("--dump-vectors", dump_vectors, "include eigenvector coefficients in the JSON output");

  auto* iterate = app.add_subcommand("iterate", "trace one augmented subspace run");
  add_common(iterate, cfg, format);
  add_iteration(iterate, cfg);

  auto* rates = app.add_subcommand("rates", "fit reduction factors over several coarse sizes");
  add_common(rates, cfg, format);
  add_iteration(rates, cfg);
  rates->add_option("--ratio-min", cfg.ratio_min, "lower end of the accepted factor ratio window");
  rates->add_option("--ratio-max", cfg.ratio_max, "upper end of the accepted factor ratio window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  // solve reports in JSON by default, the trace commands in CSV.
  if (format.empty()) format = solve->parsed() ? "json" : "csv";
  cfg.format = format == "json" ? OutputFormat::Json : OutputFormat::Csv;

  try {
    if (solve->parsed()) return cmd_solve(cfg, dump_vectors);
    if (iterate->parsed()) return cmd_iterate(cfg);
    return cmd_rates(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
}
