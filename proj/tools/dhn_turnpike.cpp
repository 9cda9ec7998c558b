#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "dhn/error.hpp"
#include "dhn/pipeline.hpp"

namespace {

constexpr int kSchemaError = 2;
constexpr int kNumericalError = 3;

std::string matrix_text(const Eigen::MatrixXd& M) {
  std::string s = "[";
  for (int i = 0; i < M.rows(); ++i) {
    s += i ? ", [" : "[";
    for (int k = 0; k < M.cols(); ++k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.6g", k ? ", " : "", M(i, k));
      s += buf;
    }
    s += "]";
  }
  return s + "]";
}

struct Context {
  dhn::Scenario scenario;
  std::filesystem::path out;
  dhn::PipelineOptions options;
  std::optional<dhn::TurnpikeStage> turnpike;
  std::optional<std::vector<dhn::RunResult>> runs;
  std::optional<dhn::ReportStage> report;

  const dhn::TurnpikeStage& need_turnpike() {
    if (!turnpike) turnpike = dhn::turnpike_stage(scenario);
    return *turnpike;
  }
  const std::vector<dhn::RunResult>& need_runs() {
    if (!runs) runs = dhn::solve_stage(scenario, need_turnpike(), options);
    return *runs;
  }
  const dhn::ReportStage& need_report() {
    if (!report) report = dhn::report_stage(scenario, need_turnpike(), need_runs(), options);
    return *report;
  }
};

void run_model(Context& ctx) {
  const auto& model = ctx.scenario.model;
  const auto cert = dhn::hurwitz_certificate(model);
  std::filesystem::create_directories(ctx.out);
  dhn::write_json(ctx.out / "model.json", dhn::model_json(ctx.scenario, cert));
  std::cout << "A = " << matrix_text(model.A) << "\n"
            << "B = " << matrix_text(model.B) << "\n"
            << "E = " << matrix_text(model.E) << "\n"
            << "spectral abscissa = " << cert.spectral_abscissa << "\n"
            << "gershgorin margin = " << cert.gershgorin_margin << "\n"
            << "transient constant = " << cert.transient_constant << "\n";
}

void run_turnpike(Context& ctx) {
  const auto& st = ctx.need_turnpike();
  dhn::write_turnpike_artifacts(ctx.out, ctx.scenario, st);
  std::cout << "pencil regular (Hadamard ratio " << st.regularity.max_ratio << "), index "
            << st.decomposition.index << ", " << st.decomposition.finite << " finite / "
            << st.decomposition.infinite << " infinite eigenvalues\n"
            << "turnpike: DAE residual " << st.dae_residual << ", switching residual "
            << st.switching_residual << ", ordering agreement " << st.ordering_agreement
            << ", interiority margin " << st.turnpike.interiority_margin << "\n";
}

void run_solve(Context& ctx) {
  const auto& runs = ctx.need_runs();
  dhn::write_run_artifacts(ctx.out, ctx.scenario, runs);
  for (const auto& r : runs) {
    std::cout << r.label << ": N = " << r.pair.intervals() << ", objective " << r.pair.objective
              << ", KKT residual " << r.pair.diagnostics.kkt_residual
              << (r.pair.diagnostics.nonconvex ? " (nonconvex)" : "") << "\n";
  }
}

void run_report(Context& ctx) {
  const auto& rep = ctx.need_report();
  dhn::write_report_artifacts(ctx.out, ctx.scenario, ctx.need_turnpike(), ctx.need_runs(), rep);
  std::cout << "eps_num = " << rep.eps_num << "\n";
  for (std::size_t i = 0; i < rep.reports.size(); ++i) {
    const auto& r = rep.reports[i];
    std::cout << r.label << ": " << (r.exact ? "EXACT" : "NOT_EXACT") << ", tube [" << r.tube.entry << ", "
              << r.tube.exit << "] s, singular overlap " << rep.singular_overlap[i] << "\n";
  }
  std::cout << "horizon independent: " << (rep.summary.horizon_independent ? "yes" : "no")
            << ", pairwise gap " << rep.summary.max_pairwise_gap << "\n";
}

void run_audit(Context& ctx) {
  const auto au = dhn::audit_stage(ctx.scenario, ctx.need_turnpike(), ctx.need_runs(), ctx.need_report(),
                                   ctx.options);
  std::filesystem::create_directories(ctx.out);
  dhn::write_json(ctx.out / "audit.json", dhn::audit_json(ctx.scenario, au));
  std::cout << "c* = " << au.c_star << " (c used " << au.c_used << ")\n";
  for (std::size_t i = 0; i < au.storage.size(); ++i) {
    const auto& est = au.storage[i];
    std::cout << "x0 = " << est.x0_scale << " xn: storage estimate " << est.estimate << ", stabilization ratio "
              << est.stabilization_ratio << (est.bounded ? "" : " (not bounded)")
              << (au.bound_holds[i] ? "" : " (exceeds nu_hat(0) * ell_hat)") << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact time-varying turnpikes for district heating networks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string scenario_path;
  std::string out_dir;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  app.add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  app.add_option("--out", out_dir, "Output directory (overrides DHN_OUT_DIR and outputs.dir)");
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Overrides numerics.seed");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"model", "Emit A, B, E and the Hurwitz certificate"},
      {"turnpike", "Pencil regularity, Weierstrass decomposition and turnpike CSV"},
      {"solve", "Solve the run matrix and write one CSV per run"},
      {"report", "Turnpike exactness report"},
      {"audit", "Dissipativity audit"},
      {"all", "Every stage above"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    Context ctx{dhn::load_scenario(scenario_path), {}, {}, {}, {}, {}};
    if (seed) ctx.scenario.numerics.seed = *seed;
    if (!out_dir.empty()) {
      ctx.out = out_dir;
    } else if (const char* env = std::getenv("DHN_OUT_DIR"); env && *env) {
      ctx.out = env;
    } else {
      ctx.out = ctx.scenario.outputs.dir;
    }
    ctx.options.threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    const bool all = command == "all";
    if (all || command == "model") run_model(ctx);
    if (all || command == "turnpike") run_turnpike(ctx);
    if (all || command == "solve") run_solve(ctx);
    if (all || command == "report") run_report(ctx);
    if (all || command == "audit") run_audit(ctx);
    return 0;
  } catch (const dhn::ValidationError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kSchemaError;
  } catch (const dhn::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
