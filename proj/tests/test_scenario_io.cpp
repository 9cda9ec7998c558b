#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dhn/error.hpp"
#include "dhn/scenario_io.hpp"
#include "fixtures.hpp"

using namespace dhn;
using nlohmann::json;

namespace {

json two_cycle_doc() {
  std::ifstream in(fixture::scenario_path("two_cycle"));
  return json::parse(in);
}

std::string pointer_of(const json& doc) {
  try {
    parse_scenario(doc.dump());
  } catch (const ValidationError& e) {
    return e.pointer();
  }
  return "<accepted>";
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dhn_test_" + name);
}

}  // namespace

TEST(ScenarioIo, TwoCycleFixture) {
  const Scenario sc = load_scenario(fixture::scenario_path("two_cycle"));
  EXPECT_EQ(sc.name, "two_cycle");
  EXPECT_LE((sc.model.A - (Eigen::Matrix2d() << -2, 1, 1, -3).finished()).norm(), 1e-15);
  // xn solves 0 = A xn + B*1 + E*(-0.5)
  EXPECT_LE((sc.model.A * sc.xn + sc.model.B * 1.0 + sc.model.E * -0.5).norm(), 1e-14);
  EXPECT_LE((sc.cost.r(0.0) + sc.xn).norm(), 1e-15);  // r = -Q xn with Q = I
  EXPECT_LE((sc.cost.S - sc.model.B.transpose()).norm(), 0.0);
  EXPECT_NEAR(sc.disturbance(2.5)(0), -0.5 + 0.1 * std::sin(2 * std::numbers::pi * 2.5 / 10.0), 1e-15);
  ASSERT_EQ(sc.initial_states.size(), 2u);
  EXPECT_EQ(sc.initial_states[0].label, "x0.5xn");
  EXPECT_LE((sc.initial_state(sc.initial_states[1]) - 1.5 * sc.xn).norm(), 0.0);
  EXPECT_EQ(sc.horizons, (std::vector<double>{20.0, 25.0}));
  EXPECT_EQ(sc.intervals_for(20.0), 400);
  EXPECT_EQ(sc.outputs.storage_horizons, (std::vector<double>{5.0, 10.0, 20.0, 30.0}));
  EXPECT_EQ(sc.numerics.seed, 20240611u);
}

TEST(ScenarioIo, Dhn15FixtureMatchesTheDocumentedSetup) {
  const Scenario sc = load_scenario(fixture::scenario_path("dhn15"));
  EXPECT_EQ(sc.model.n(), 15);
  EXPECT_EQ(sc.model.m(), 2);
  EXPECT_EQ(sc.model.w(), 3);
  EXPECT_EQ(sc.intervals_for(86400.0), 240);
  EXPECT_EQ(sc.intervals_for(104400.0), 290);
  EXPECT_EQ(sc.horizons, (std::vector<double>{86400.0, 104400.0}));
  EXPECT_LE((sc.cost.Q - 1000.0 * Eigen::MatrixXd::Identity(15, 15)).norm(), 0.0);
  EXPECT_EQ(sc.box.upper(0), 0.045);
}

TEST(ScenarioIo, OcpUsesTheScenarioData) {
  const Scenario sc = load_scenario(fixture::scenario_path("two_cycle"));
  const OcpScenario ocp = sc.ocp(sc.xn, 20.0);
  EXPECT_EQ(ocp.intervals, 400);
  EXPECT_DOUBLE_EQ(ocp.step(), 0.05);
  const BoxQpOptions o = sc.qp_options();
  EXPECT_EQ(o.tolerance, 1e-9);
  EXPECT_EQ(o.restarts, 8);
}

TEST(ScenarioIo, SchemaErrorsCarryJsonPointers) {
  json d = two_cycle_doc();
  d["cost"]["Q"]["diagonal"] = {1.0, 1.0, 1.0};
  EXPECT_EQ(pointer_of(d), "/cost/Q/diagonal");

  d = two_cycle_doc();
  d["graph"]["vertices"][1]["mass"] = -1.0;
  EXPECT_EQ(pointer_of(d), "/graph/vertices/1/mass");

  d = two_cycle_doc();
  d["graph"]["vertices"][0]["role"] = "boiler";
  EXPECT_EQ(pointer_of(d), "/graph/vertices/0/role");

  d = two_cycle_doc();
  d["disturbance"][1]["type"] = "square";
  EXPECT_EQ(pointer_of(d), "/disturbance/1/type");

  d = two_cycle_doc();
  d["disturbance"][1].erase("period_s");
  EXPECT_EQ(pointer_of(d), "/disturbance/1/period_s");

  d = two_cycle_doc();
  d["bounds"]["u_min"] = -1.0;
  EXPECT_EQ(pointer_of(d), "/bounds/u_min/0");

  d = two_cycle_doc();
  d["bounds"]["u_max"] = 0.0;
  EXPECT_EQ(pointer_of(d), "/bounds/u_max/0");

  d = two_cycle_doc();
  d["runs"]["horizons_s"] = {20.0, -1.0};
  EXPECT_EQ(pointer_of(d), "/runs/horizons_s/1");

  d = two_cycle_doc();
  d["cost"]["S"] = "identity";
  EXPECT_EQ(pointer_of(d), "/cost/S");

  d = two_cycle_doc();
  d["cost"]["Q"] = {{"dense", {{1.0, 2.0}, {0.0, 1.0}}}};
  EXPECT_EQ(pointer_of(d), "/cost/Q");

  d = two_cycle_doc();
  d["numerics"]["N"] = 0;
  EXPECT_EQ(pointer_of(d), "/numerics/N");

  d = two_cycle_doc();
  d.erase("bounds");
  EXPECT_EQ(pointer_of(d), "/bounds");

  d = two_cycle_doc();
  d["graph"]["edges"][1]["flow"] = 3.0;
  EXPECT_EQ(pointer_of(d), "/graph/vertices/0");

  EXPECT_EQ(pointer_of(two_cycle_doc()), "<accepted>");
  EXPECT_THROW(parse_scenario("{ not json"), ValidationError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ValidationError);
}

TEST(ScenarioIo, SignalTermsAndBroadcasting) {
  const Signal s = parse_signal(R"([
      {"type": "const", "value": [1, 2]},
      {"type": "sin", "amplitude": 0.5, "period_s": 4, "phase_rad": [0, 1]},
      {"type": "poly", "coeffs": [0, 0.25]},
      {"type": "exp", "coeff": [3, 0], "rate": -0.5}])",
                                2);
  const double t = 1.7, w = 2 * std::numbers::pi / 4;
  EXPECT_NEAR(s(t)(0), 1 + 0.5 * std::sin(w * t) + 0.25 * t + 3 * std::exp(-0.5 * t), 1e-14);
  EXPECT_NEAR(s(t)(1), 2 + 0.5 * std::sin(w * t + 1) + 0.25 * t, 1e-14);
  EXPECT_LE((parse_signal("3.5", 2)(9.0) - Eigen::Vector2d(3.5, 3.5)).norm(), 0.0);
  EXPECT_LE((parse_signal("[1, -1]", 2)(0.0) - Eigen::Vector2d(1, -1)).norm(), 0.0);
  try {
    parse_signal(R"([{"type": "const", "value": [1, 2, 3]}])", 2, "/cost/p");
    FAIL() << "dimension mismatch accepted";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.pointer(), "/cost/p/0/value");
  }
}

TEST(ScenarioIo, AbsoluteInitialStatesAndFixedN) {
  json d = two_cycle_doc();
  d["runs"]["x0"] = {{{"value", {0.1, 0.2}}, {"label", "custom"}}, {{"scale", 1.0}}};
  d["numerics"]["N"] = 50;
  const Scenario sc = parse_scenario(d.dump());
  EXPECT_EQ(sc.initial_states[0].label, "custom");
  EXPECT_FALSE(sc.initial_states[0].scale.has_value());
  EXPECT_LE((sc.initial_state(sc.initial_states[0]) - Eigen::Vector2d(0.1, 0.2)).norm(), 0.0);
  EXPECT_EQ(sc.intervals_for(20.0), 50);
  EXPECT_EQ(sc.intervals_for(25.0), 50);
}

TEST(Csv, NumbersRoundTripExactly) {
  for (double v : {0.0, -1.0 / 3.0, 6.02214076e23, 1e-300, 70.000000000000014}) {
    EXPECT_EQ(std::stod(format_number(v)), v) << format_number(v);
  }
  CsvTable t;
  t.header = {"t_s", "a", "b"};
  t.rows = Eigen::MatrixXd::Random(7, 3);
  const auto path = temp_file("roundtrip.csv");
  write_csv(path, t);
  const CsvTable back = read_csv(path);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ((back.rows - t.rows).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(back.column("b"), 2);
  EXPECT_THROW(back.column("zzz"), std::out_of_range);
  std::filesystem::remove(path);
}

TEST(Csv, RunTableLayout) {
  const Scenario sc = load_scenario(fixture::scenario_path("two_cycle"));
  TrajectoryPair pair;
  pair.t = {0.0, 1.0, 2.0};
  pair.x = (Eigen::MatrixXd(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  pair.u = (Eigen::MatrixXd(1, 2) << 0.5, 0.7).finished();
  const Eigen::MatrixXd lambda = Eigen::MatrixXd::Constant(2, 3, -1.0);
  const Eigen::MatrixXd s = (Eigen::MatrixXd(1, 2) << 0.1, 0.2).finished();
  const CsvTable t = run_table(pair, sc.model, &lambda, &s);
  EXPECT_EQ(t.header, (std::vector<std::string>{"t_s", "x_1_K", "x_2_K", "u_1_W", "lambda_1", "lambda_2", "s_1"}));
  ASSERT_EQ(t.rows.rows(), 3);
  EXPECT_EQ(t.rows(1, t.column("x_2_K")), 5.0);
  EXPECT_EQ(t.rows(2, t.column("u_1_W")), 0.7);  // last input held into the final row
  EXPECT_EQ(t.rows(2, t.column("s_1")), 0.2);
  EXPECT_EQ(input_column(sc.model, 0), "u_1_W");
  EXPECT_EQ(state_column(sc.model, 1), "x_2_K");
  const CsvTable plain = run_table(pair, sc.model);
  EXPECT_EQ(plain.header.size(), 4u);
}

TEST(Csv, DeviationAndTurnpikeTables) {
  DeviationSeries s;
  s.t = {0.5, 1.5};
  s.e = {0.25, 0.125};
  const CsvTable d = deviation_table(s);
  EXPECT_EQ(d.header, (std::vector<std::string>{"t_s", "e"}));
  EXPECT_EQ(d.rows(1, 1), 0.125);

  const Scenario sc = load_scenario(fixture::scenario_path("two_cycle"));
  const OptimalityPencil P = build_pencil(sc.model, sc.cost, sc.disturbance);
  const TurnpikeTrajectory tp = bounded_particular_solution(weierstrass_decompose(P), P, sc.box);
  const CsvTable t = turnpike_table(tp, sc.model, {0.0, 2.5});
  ASSERT_EQ(t.rows.rows(), 2);
  EXPECT_EQ(t.header.size(), 1u + 2 + 1 + 2);
  EXPECT_EQ(t.rows(1, t.column("u_1_W")), tp.u(2.5)(0));
  EXPECT_EQ(t.rows(1, t.column("lambda_2")), tp.lambda(2.5)(1));
}
