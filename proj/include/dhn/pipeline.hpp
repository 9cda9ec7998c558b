#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhn/diagnostics.hpp"
#include "dhn/dissipativity.hpp"
#include "dhn/network.hpp"
#include "dhn/pencil.hpp"
#include "dhn/pmp.hpp"
#include "dhn/scenario_io.hpp"

namespace dhn {

struct PipelineOptions {
  int threads = 1;
};

/// Runs fn(0..count-1) on up to `threads` workers. Exceptions are rethrown
/// after all workers finished (the one with the lowest index wins).
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

struct TurnpikeStage {
  OptimalityPencil pencil;
  RegularityResult regularity;
  WeierstrassDecomposition decomposition;
  TurnpikeTrajectory turnpike;
  std::vector<double> check_grid;  // residual grid (one period or the longest horizon)
  double dae_residual = 0.0;
  double switching_residual = 0.0;
  double ordering_agreement = 0.0;  // sup-relative difference to a second ordering
  int alternate_index = 0;
};

/// Regularity, decomposition and bounded turnpike. Throws NumericalError when
/// the pencil is not regular.
TurnpikeStage turnpike_stage(const Scenario& scenario);

struct RunResult {
  std::string label;
  double horizon = 0.0;
  double x0_scale = 0.0;  // 0 for absolute initial states
  OcpScenario scenario;
  TrajectoryPair pair;
  AdjointTrajectory adjoint;
  Eigen::MatrixXd switching;  // interval means, m x N
  ArcPartition arcs;
  double bang_consistency = 0.0;
  DeviationSeries deviation;
};

/// Solves the (horizon x initial state) matrix, horizons outermost.
std::vector<RunResult> solve_stage(const Scenario& scenario, const TurnpikeStage& turnpike,
                                   const PipelineOptions& options);

struct ReportStage {
  double eps_num = 0.0;
  std::vector<double> refinement;  // per run: median N vs 2N discrepancy
  std::vector<double> eps_grid;
  std::vector<RunReport> reports;
  ExactnessSummary summary;
  std::vector<double> singular_overlap;  // per run: in-tube time labelled singular
  double eps_hat = 0.0;
  bool all_exact = false;
};

ReportStage report_stage(const Scenario& scenario, const TurnpikeStage& turnpike,
                         const std::vector<RunResult>& runs, const PipelineOptions& options);

struct AuditStage {
  double c_max = 0.0;
  double c_star = 0.0;
  double c_used = 0.0;
  std::vector<std::string> run_labels;
  std::vector<RotatedCost> run_costs;
  std::vector<SdiResult> run_sdi;
  double storage_offset = 0.0;
  std::vector<StorageEstimate> storage;
  double nu_hat0 = 0.0;  // largest measure of Theta(eps_num) over every audited solve
  double ell_hat = 0.0;  // largest |rotated stage cost| over every audited solve
  std::vector<bool> bound_holds;  // S^a(x0) <= nu_hat0 * ell_hat
  StorageEstimate turnpike_start;
  SdiResult turnpike_start_sdi;
};

AuditStage audit_stage(const Scenario& scenario, const TurnpikeStage& turnpike,
                       const std::vector<RunResult>& runs, const ReportStage& report,
                       const PipelineOptions& options);

nlohmann::json model_json(const Scenario& scenario, const HurwitzCertificate& cert);
nlohmann::json turnpike_json(const TurnpikeStage& stage);
nlohmann::json report_json(const Scenario& scenario, const TurnpikeStage& turnpike,
                           const std::vector<RunResult>& runs, const ReportStage& report);
nlohmann::json audit_json(const Scenario& scenario, const AuditStage& audit);

/// Artifact writers; file names are listed in the README.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_turnpike_artifacts(const std::filesystem::path& dir, const Scenario& scenario,
                              const TurnpikeStage& stage);
void write_run_artifacts(const std::filesystem::path& dir, const Scenario& scenario,
                         const std::vector<RunResult>& runs);
void write_report_artifacts(const std::filesystem::path& dir, const Scenario& scenario,
                            const TurnpikeStage& turnpike, const std::vector<RunResult>& runs,
                            const ReportStage& report);

}  // namespace dhn
