#include "dhn/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>
#include <thread>

#include "dhn/error.hpp"

namespace dhn {

namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const std::vector<double>& v) { return json(v); }

std::string horizon_label(double T) {
  char buf[64];
  if (std::fmod(T, 3600.0) == 0.0) {
    std::snprintf(buf, sizeof buf, "T%gh", T / 3600.0);
  } else {
    std::snprintf(buf, sizeof buf, "T%gs", T);
  }
  return buf;
}

double max_horizon(const Scenario& sc) { return *std::max_element(sc.horizons.begin(), sc.horizons.end()); }

double stacked_scale(const TrajectoryPair& pair) {
  return std::max({1.0, pair.x.cwiseAbs().maxCoeff(), pair.u.cwiseAbs().maxCoeff()});
}

}  // namespace

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  const int workers = std::clamp(threads, 1, std::max(count, 1));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TurnpikeStage turnpike_stage(const Scenario& sc) {
  TurnpikeStage st;
  st.pencil = build_pencil(sc.model, sc.cost, sc.disturbance);
  st.regularity = check_regularity(st.pencil, sc.numerics.seed);
  if (!st.regularity.regular) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "det(sD - M) vanishes at every sample (largest Hadamard ratio %.3e <= %.3e): "
                  "the regularity assumption on the optimality system fails",
                  st.regularity.max_ratio, st.regularity.tolerance);
    throw NumericalError(buf);
  }
  st.decomposition = weierstrass_decompose(st.pencil);
  const double omega = sc.numerics.base_period > 0.0 ? 2.0 * std::numbers::pi / sc.numerics.base_period : 0.0;
  st.turnpike = bounded_particular_solution(st.decomposition, st.pencil, sc.box, omega);

  const double span = st.turnpike.period > 0.0 ? st.turnpike.period : max_horizon(sc);
  st.check_grid = uniform_grid(0.0, span, sc.numerics.turnpike_points);
  st.dae_residual = dae_residual(st.pencil, st.turnpike.xi, st.check_grid);
  st.switching_residual = switching_residual(sc.model, sc.cost, st.turnpike, st.check_grid);

  const auto alternate = weierstrass_decompose(st.pencil, sc.numerics.seed + 1);
  const auto tp2 = bounded_particular_solution(alternate, st.pencil, sc.box, omega);
  st.alternate_index = alternate.index;
  double diff = 0.0, scale = 0.0;
  for (double t : st.check_grid) {
    const Eigen::VectorXd a = st.turnpike.xi(t);
    diff = std::max(diff, (a - tp2.xi(t)).cwiseAbs().maxCoeff());
    scale = std::max(scale, a.cwiseAbs().maxCoeff());
  }
  st.ordering_agreement = scale > 0.0 ? diff / scale : diff;
  return st;
}

std::vector<RunResult> solve_stage(const Scenario& sc, const TurnpikeStage& tp,
                                   const PipelineOptions& options) {
  const int H = sc.horizons.size(), X = sc.initial_states.size();
  std::vector<RunResult> runs(H * X);
  const BoxQpOptions qp = sc.qp_options();
  parallel_for(H * X, options.threads, [&](int idx) {
    const double T = sc.horizons[idx / X];
    const InitialStateSpec& spec = sc.initial_states[idx % X];
    RunResult& r = runs[idx];
    r.label = horizon_label(T) + "_" + spec.label;
    r.horizon = T;
    r.x0_scale = spec.scale.value_or(0.0);
    r.scenario = sc.ocp(sc.initial_state(spec), T);
    r.pair = solve(r.scenario, qp);
    r.adjoint = costate(r.pair, r.scenario, sc.numerics.costate_tolerance);
    r.switching = mean_switching_functions(r.pair, r.adjoint, r.scenario);
    const double delta = sc.outputs.switching_tolerance
                             ? *sc.outputs.switching_tolerance
                             : default_switching_tolerance(r.switching, r.pair, sc.box);
    r.arcs = classify_arcs(r.switching, r.pair.t, delta);
    r.bang_consistency = bang_consistency(r.arcs, r.pair, sc.box);
    r.deviation = deviation(r.pair, r.scenario, tp.turnpike);
  });
  return runs;
}

ReportStage report_stage(const Scenario& sc, const TurnpikeStage& tp, const std::vector<RunResult>& runs,
                         const PipelineOptions& options) {
  ReportStage rep;
  const int R = runs.size();
  rep.refinement.assign(R, 0.0);
  const BoxQpOptions qp = sc.qp_options();
  parallel_for(R, options.threads, [&](int i) {
    OcpScenario fine = runs[i].scenario;
    fine.intervals = 2 * runs[i].pair.intervals();
    rep.refinement[i] = refinement_discrepancy(runs[i].pair, runs[i].scenario, solve(fine, qp));
  });
  double floor = 0.0;
  for (int i = 0; i < R; ++i) {
    rep.eps_num = std::max(rep.eps_num, 10.0 * rep.refinement[i]);
    floor = std::max(floor, 1e-9 * stacked_scale(runs[i].pair));
  }
  rep.eps_num = std::max(rep.eps_num, floor);

  if (!sc.outputs.eps_grid.empty()) {
    rep.eps_grid = sc.outputs.eps_grid;
  } else {
    for (double k : sc.outputs.eps_multiples) rep.eps_grid.push_back(k * rep.eps_num);
  }

  std::vector<TrajectoryPair> pairs;
  std::vector<OcpScenario> scenarios;
  rep.all_exact = true;
  for (const auto& r : runs) {
    rep.reports.push_back(make_run_report(r.label, r.x0_scale, r.pair, r.deviation, rep.eps_grid, rep.eps_num));
    rep.all_exact = rep.all_exact && rep.reports.back().exact;
    pairs.push_back(r.pair);
    scenarios.push_back(r.scenario);

    const std::vector<bool> singular = r.arcs.all_singular(r.pair.intervals());
    int in_tube = 0, labelled = 0;
    for (std::size_t k = 0; k < r.deviation.e.size(); ++k) {
      if (r.deviation.e[k] <= rep.eps_num) {
        ++in_tube;
        labelled += singular[k] ? 1 : 0;
      }
    }
    rep.singular_overlap.push_back(in_tube ? static_cast<double>(labelled) / in_tube : 0.0);
  }
  rep.summary = exactness_check(rep.reports, pairs, scenarios, rep.eps_num);
  rep.eps_hat = eps_hat(tp.turnpike, sc.box, max_horizon(sc), sc.numerics.turnpike_points);
  return rep;
}

AuditStage audit_stage(const Scenario& sc, const TurnpikeStage& tps, const std::vector<RunResult>& runs,
                       const ReportStage& report, const PipelineOptions& options) {
  const auto& tp = tps.turnpike;
  AuditStage au;
  if (sc.outputs.alpha_c_max) {
    au.c_max = *sc.outputs.alpha_c_max;
  } else {
    const int n = sc.model.n(), m = sc.model.m();
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n + m, n + m);
    hess.topLeftCorner(n, n) = sc.cost.Q;
    hess.topRightCorner(n, m) = sc.cost.S.transpose();
    hess.bottomLeftCorner(m, n) = sc.cost.S;
    au.c_max = std::max(hess.selfadjointView<Eigen::Lower>().eigenvalues().cwiseAbs().maxCoeff(), 1e-12);
  }

  std::vector<TrajectoryPair> pairs;
  std::vector<RotatedCost> costs;
  for (const auto& r : runs) {
    pairs.push_back(r.pair);
    costs.push_back(rotated_cost(r.pair, r.scenario, tp, 0.0));
  }
  au.c_star = fit_alpha_constant(pairs, costs, tp, au.c_max);
  au.c_used = sc.outputs.alpha_c.value_or(au.c_star);
  for (const auto& r : runs) {
    au.run_labels.push_back(r.label);
    au.run_costs.push_back(rotated_cost(r.pair, r.scenario, tp, au.c_used));
    au.run_sdi.push_back(sdi_check(r.pair, tp, au.run_costs.back(), au.c_used));
  }

  const auto& scales = sc.outputs.storage_x0_scales;
  const auto& T_list = sc.outputs.storage_horizons;
  if (!T_list.empty()) {
    const BoxQpOptions qp = sc.qp_options();
    const OcpScenario base = sc.ocp(sc.xn.size() ? Eigen::VectorXd(sc.xn) : tp.x(0.0), T_list.front());
    const int S = scales.size();
    au.storage.resize(S);
    parallel_for(S + 1, options.threads, [&](int i) {
      if (i < S) {
        au.storage[i] = available_storage_estimate(base, scales[i] * sc.xn, tp, au.c_used, T_list, 0.05, qp);
        au.storage[i].x0_scale = scales[i];
      } else {
        au.turnpike_start = available_storage_estimate(base, tp.x(0.0), tp, au.c_used, T_list, 0.05, qp);
      }
    });
    const auto& last = au.turnpike_start;
    au.turnpike_start_sdi = sdi_check(last.pairs.back(), tp, last.costs.back(), au.c_used);
  }

  std::vector<TrajectoryPair> all_pairs = pairs;
  for (const auto& est : au.storage) all_pairs.insert(all_pairs.end(), est.pairs.begin(), est.pairs.end());
  all_pairs.insert(all_pairs.end(), au.turnpike_start.pairs.begin(), au.turnpike_start.pairs.end());
  au.storage_offset = storage_offset(all_pairs, tp);

  auto absorb = [&](const TrajectoryPair& pair, const OcpScenario& scenario, const RotatedCost& cost) {
    au.nu_hat0 = std::max(au.nu_hat0, theta_measure(deviation(pair, scenario, tp), report.eps_num));
    au.ell_hat = std::max(au.ell_hat, cost.sup_abs_integrand);
  };
  for (std::size_t i = 0; i < runs.size(); ++i) absorb(runs[i].pair, runs[i].scenario, au.run_costs[i]);
  for (const auto* est : {&au.turnpike_start}) {
    for (std::size_t k = 0; k < est->pairs.size(); ++k) absorb(est->pairs[k], est->scenarios[k], est->costs[k]);
  }
  for (const auto& est : au.storage) {
    for (std::size_t k = 0; k < est.pairs.size(); ++k) absorb(est.pairs[k], est.scenarios[k], est.costs[k]);
  }
  for (const auto& est : au.storage) au.bound_holds.push_back(est.estimate <= au.nu_hat0 * au.ell_hat);
  return au;
}

json model_json(const Scenario& sc, const HurwitzCertificate& cert) {
  json j;
  j["vertex_ids"] = sc.model.vertex_ids;
  std::vector<std::string> producers, consumers;
  for (int i : sc.model.producers) producers.push_back(sc.model.vertex_ids[i]);
  for (int i : sc.model.consumers) consumers.push_back(sc.model.vertex_ids[i]);
  j["producers"] = producers;
  j["consumers"] = consumers;
  j["A"] = matrix_json(sc.model.A);
  j["B"] = matrix_json(sc.model.B);
  j["E"] = matrix_json(sc.model.E);
  j["certificate"] = {{"spectral_abscissa", cert.spectral_abscissa},
                      {"gershgorin_margin", cert.gershgorin_margin},
                      {"transient_constant", cert.transient_constant},
                      {"decay_rate", cert.decay_rate},
                      {"hurwitz", cert.spectral_abscissa < 0.0}};
  return j;
}

json turnpike_json(const TurnpikeStage& st) {
  const auto& w = st.decomposition;
  json j;
  j["regularity"] = {{"regular", st.regularity.regular},
                     {"max_ratio", st.regularity.max_ratio},
                     {"tolerance", st.regularity.tolerance},
                     {"samples", st.regularity.samples.size()}};
  j["decomposition"] = {{"finite", w.finite},
                        {"infinite", w.infinite},
                        {"index", w.index},
                        {"alternate_index", st.alternate_index},
                        {"sylvester_residual", w.sylvester_residual},
                        {"reconstruction_residual", reconstruction_residual(w, st.pencil.D, st.pencil.M)}};
  j["turnpike"] = {{"base_omega", st.turnpike.base_omega},
                   {"period_s", st.turnpike.period},
                   {"interior", st.turnpike.interior},
                   {"interiority_margin", st.turnpike.interiority_margin}};
  j["residuals"] = {{"grid_points", st.check_grid.size()},
                    {"dae", st.dae_residual},
                    {"switching", st.switching_residual},
                    {"ordering_agreement", st.ordering_agreement}};
  return j;
}

json report_json(const Scenario& sc, const TurnpikeStage& tp, const std::vector<RunResult>& runs,
                 const ReportStage& rep) {
  json j;
  j["eps_num"] = rep.eps_num;
  j["eps_grid"] = vector_json(rep.eps_grid);
  j["eps_hat"] = rep.eps_hat;
  j["turnpike"] = {{"index", tp.decomposition.index},
                   {"interior", tp.turnpike.interior},
                   {"interiority_margin", tp.turnpike.interiority_margin}};
  json run_list = json::array();
  json mu = {{"eps", vector_json(rep.eps_grid)}, {"runs", json::object()}};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const auto& rr = rep.reports[i];
    json arcs = json::array();
    for (int k = 0; k < static_cast<int>(r.arcs.arcs.size()); ++k) {
      json per = json::array();
      for (const auto& a : r.arcs.arcs[k]) {
        per.push_back({{"label", to_string(a.label)}, {"t0_s", a.t0}, {"t1_s", a.t1}});
      }
      arcs.push_back({{"input", input_column(sc.model, k)}, {"arcs", per}});
    }
    run_list.push_back({
        {"label", r.label},
        {"horizon_s", r.horizon},
        {"x0_scale", r.x0_scale},
        {"N", r.pair.intervals()},
        {"step_s", r.pair.step()},
        {"objective", r.pair.objective},
        {"kkt_residual", r.pair.diagnostics.kkt_residual},
        {"qp_iterations", r.pair.diagnostics.iterations},
        {"nonconvex", r.pair.diagnostics.nonconvex},
        {"refinement_discrepancy", rep.refinement[i]},
        {"verdict", rr.exact ? "EXACT" : "NOT_EXACT"},
        {"tube",
         {{"found", rr.tube.found},
          {"entry_s", rr.tube.entry},
          {"exit_s", rr.tube.exit},
          {"length_s", rr.tube.length()},
          {"fraction_of_horizon", rr.tube.length() / rr.horizon}}},
        {"sup_deviation_in_tube", rr.sup_deviation_in_tube},
        {"theta_s", vector_json(rr.theta)},
        {"costate", {{"substeps", r.adjoint.substeps}, {"halving_agreement", r.adjoint.halving_agreement}}},
        {"switching_tolerance", r.arcs.delta},
        {"bang_consistency", r.bang_consistency},
        {"singular_overlap", rep.singular_overlap[i]},
        {"arcs", arcs},
    });
    mu["runs"][r.label] = vector_json(rr.theta);
  }
  j["runs"] = run_list;
  j["mu_table"] = mu;
  j["nu_hat"] = vector_json(rep.summary.nu_hat);
  const double limit = runs.empty() ? 0.0 : 2.0 * runs.front().pair.step();
  j["exactness"] = {{"all_exact", rep.all_exact},
                    {"horizon_independent", rep.summary.horizon_independent},
                    {"max_theta_growth_s", rep.summary.max_theta_growth},
                    {"theta_growth_limit_s", limit},
                    {"max_entry_shift_s", rep.summary.max_entry_shift},
                    {"max_pairwise_gap", rep.summary.max_pairwise_gap},
                    {"pairwise_coincident", rep.summary.pairwise_coincident}};
  return j;
}

json audit_json(const Scenario& sc, const AuditStage& au) {
  json j;
  j["alpha"] = {{"form", "c*s^2"}, {"c_max", au.c_max}, {"c_star", au.c_star}, {"c_used", au.c_used}};
  j["storage_offset"] = au.storage_offset;
  j["nu_hat0_s"] = au.nu_hat0;
  j["ell_hat"] = au.ell_hat;
  j["storage_bound"] = au.nu_hat0 * au.ell_hat;
  auto estimate_json = [&](const StorageEstimate& est) {
    return json{{"horizons_s", vector_json(est.horizons)},
                {"values", vector_json(est.values)},
                {"running_max", vector_json(est.running_max)},
                {"estimate", est.estimate},
                {"stabilization_ratio", est.stabilization_ratio},
                {"bounded", est.bounded},
                {"within_bound", est.estimate <= au.nu_hat0 * au.ell_hat}};
  };
  json storage = json::array();
  for (const auto& est : au.storage) {
    json e = estimate_json(est);
    e["x0_scale"] = est.x0_scale;
    storage.push_back(e);
  }
  j["storage"] = storage;
  if (!au.turnpike_start.horizons.empty()) {
    json e = estimate_json(au.turnpike_start);
    e["sdi_max_violation"] = au.turnpike_start_sdi.max_violation;
    e["sdi_relative_violation"] = au.turnpike_start_sdi.relative_violation;
    j["turnpike_start"] = e;
  }
  json sdi = json::array();
  for (std::size_t i = 0; i < au.run_sdi.size(); ++i) {
    const auto& rc = au.run_costs[i];
    sdi.push_back({{"label", au.run_labels[i]},
                   {"max_violation", au.run_sdi[i].max_violation},
                   {"relative_violation", au.run_sdi[i].relative_violation},
                   {"shifted_cost", rc.shifted.back()},
                   {"deviation2", rc.deviation2.back()},
                   {"rotated_cost", rc.integral(au.c_used)}});
  }
  j["runs"] = sdi;
  bool all_bounded = !au.storage.empty();
  bool all_within = !au.storage.empty();
  for (std::size_t i = 0; i < au.storage.size(); ++i) {
    all_bounded = all_bounded && au.storage[i].bounded;
    all_within = all_within && au.bound_holds[i];
  }
  j["summary"] = {{"all_bounded", all_bounded}, {"all_within_bound", all_within}, {"scenario", sc.name}};
  return j;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void write_turnpike_artifacts(const std::filesystem::path& dir, const Scenario& sc, const TurnpikeStage& st) {
  std::filesystem::create_directories(dir);
  const auto grid = uniform_grid(0.0, max_horizon(sc), sc.numerics.turnpike_points);
  write_csv(dir / "turnpike.csv", turnpike_table(st.turnpike, sc.model, grid));
  write_json(dir / "turnpike.json", turnpike_json(st));
}

void write_run_artifacts(const std::filesystem::path& dir, const Scenario& sc, const std::vector<RunResult>& runs) {
  std::filesystem::create_directories(dir);
  for (const auto& r : runs) {
    write_csv(dir / ("run_" + r.label + ".csv"), run_table(r.pair, sc.model, &r.adjoint.lambda, &r.switching));
  }
}

void write_report_artifacts(const std::filesystem::path& dir, const Scenario& sc, const TurnpikeStage& tp,
                            const std::vector<RunResult>& runs, const ReportStage& report) {
  std::filesystem::create_directories(dir);
  for (const auto& r : runs) write_csv(dir / ("deviation_" + r.label + ".csv"), deviation_table(r.deviation));
  write_json(dir / "report.json", report_json(sc, tp, runs, report));
}

}  // namespace dhn
