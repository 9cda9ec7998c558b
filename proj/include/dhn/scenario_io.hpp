#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhn/box_qp.hpp"
#include "dhn/diagnostics.hpp"
#include "dhn/network.hpp"
#include "dhn/ocp.hpp"
#include "dhn/pencil.hpp"
#include "dhn/signal.hpp"

namespace dhn {

/// Initial state of a run: either scale * xn or an absolute vector.
struct InitialStateSpec {
  std::optional<double> scale;
  Eigen::VectorXd value;
  std::string label;  // used in artifact names, e.g. "x0.8xn"
};

struct NumericsSection {
  double step = 360.0;  // seconds; N = ceil(T / step) unless `intervals` is set
  int intervals = 0;    // fixed N for every horizon when > 0
  double qp_tolerance = 1e-9;
  int qp_max_iterations = 10000;
  int qp_restarts = 8;
  std::uint64_t seed = 20240611;
  double costate_tolerance = 1e-7;
  double base_period = 0.0;  // seconds; 0 picks the slowest forcing period
  int turnpike_points = 1000;
};

struct OutputsSection {
  std::string dir = "out";
  std::vector<double> eps_multiples{1.0, 2.0, 5.0, 10.0, 100.0, 1000.0};  // times eps_num
  std::vector<double> eps_grid;     // absolute thresholds; overrides eps_multiples
  std::optional<double> alpha_c;    // fixed c; fitted by bisection when absent
  std::optional<double> alpha_c_max;
  std::vector<double> storage_x0_scales{0.8, 0.9, 1.0, 1.1, 1.2};
  std::vector<double> storage_horizons{21600.0, 43200.0, 86400.0, 104400.0, 172800.0};
  std::optional<double> switching_tolerance;
};

struct Scenario {
  std::string name;
  NetworkGraph graph;
  StateSpaceModel model;
  CostData cost;
  Signal disturbance;
  InputBox box;
  Eigen::VectorXd xn;  // empty when the file defines none
  std::vector<InitialStateSpec> initial_states;
  std::vector<double> horizons;
  NumericsSection numerics;
  OutputsSection outputs;

  int intervals_for(double horizon) const;
  Eigen::VectorXd initial_state(const InitialStateSpec& spec) const;
  OcpScenario ocp(const Eigen::VectorXd& x0, double horizon) const;
  BoxQpOptions qp_options() const;
};

/// Parses and validates a scenario document. Schema violations raise
/// ValidationError carrying the JSON pointer of the offending field.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

/// Parses a signal term list (see README) of the given dimension; `pointer`
/// prefixes error locations.
Signal parse_signal(const std::string& json_text, int dim, const std::string& pointer = "");

/// Fixed-format number used in every CSV: full precision, scientific.
std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;

  int column(const std::string& name) const;  // throws std::out_of_range
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Run table on the grid t_0..t_N: t_s, x_<id>_K, u_<k>_W and, when given,
/// lambda_<id> and s_<k>. The piecewise-constant input (and the per-interval
/// switching function) is held into the last row.
CsvTable run_table(const TrajectoryPair& pair, const StateSpaceModel& model,
                   const Eigen::MatrixXd* lambda = nullptr, const Eigen::MatrixXd* switching = nullptr);

/// Turnpike table t_s, x_<id>_K, u_<k>_W, lambda_<id> on the given grid.
CsvTable turnpike_table(const TurnpikeTrajectory& turnpike, const StateSpaceModel& model,
                        const std::vector<double>& grid);

/// Deviation table t_s, e.
CsvTable deviation_table(const DeviationSeries& series);

/// Input column label of producer k ("u_<vertex id>_W").
std::string input_column(const StateSpaceModel& model, int k);
std::string state_column(const StateSpaceModel& model, int i);

}  // namespace dhn
