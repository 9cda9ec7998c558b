#include "dhn/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dhn/error.hpp"

namespace dhn {

namespace {

using nlohmann::json;

std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }
std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

const json& require(const json& j, const std::string& ptr, const std::string& key) {
  if (!j.is_object()) throw ValidationError(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(child(ptr, key), "required field is missing");
  return *it;
}

const json* optional_field(const json& j, const std::string& ptr, const std::string& key) {
  if (!j.is_object()) throw ValidationError(ptr, "expected an object");
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ValidationError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(ptr, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& ptr) {
  const double v = number(j, ptr);
  if (v <= 0.0) throw ValidationError(ptr, "expected a positive number");
  return v;
}

int integer(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw ValidationError(ptr, "expected an integer");
  return j.get<int>();
}

std::string string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw ValidationError(ptr, "expected a string");
  return j.get<std::string>();
}

std::vector<double> number_list(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ValidationError(ptr, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], child(ptr, i)));
  return out;
}

Eigen::VectorXd vector_of(const json& j, const std::string& ptr, int dim) {
  const auto v = number_list(j, ptr);
  if (static_cast<int>(v.size()) != dim) {
    throw ValidationError(ptr, "expected " + std::to_string(dim) + " entries, got " +
                                   std::to_string(v.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
}

// A scalar broadcasts to every component.
Eigen::VectorXd broadcast(const json& j, const std::string& ptr, int dim) {
  if (j.is_number()) return Eigen::VectorXd::Constant(dim, number(j, ptr));
  return vector_of(j, ptr, dim);
}

Eigen::MatrixXd matrix_of(const json& j, const std::string& ptr, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw ValidationError(ptr, "expected a " + std::to_string(rows) + "x" + std::to_string(cols) +
                                   " matrix (array of rows)");
  }
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i) M.row(i) = vector_of(j[i], child(ptr, i), cols).transpose();
  return M;
}

Signal signal_of(const json& j, const std::string& ptr, int dim) {
  if (j.is_number() || (j.is_array() && !j.empty() && j[0].is_number())) {
    return Signal::constant(broadcast(j, ptr, dim));
  }
  if (!j.is_array()) throw ValidationError(ptr, "expected a list of signal terms");
  Signal s(dim);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string tp = child(ptr, i);
    const json& term = j[i];
    const std::string type = string(require(term, tp, "type"), child(tp, "type"));
    if (type == "const") {
      s.add(ConstantTerm{broadcast(require(term, tp, "value"), child(tp, "value"), dim)});
    } else if (type == "sin") {
      const double period = positive(require(term, tp, "period_s"), child(tp, "period_s"));
      const Eigen::VectorXd amp = broadcast(require(term, tp, "amplitude"), child(tp, "amplitude"), dim);
      Eigen::VectorXd phase = Eigen::VectorXd::Zero(dim);
      if (const json* ph = optional_field(term, tp, "phase_rad")) phase = broadcast(*ph, child(tp, "phase_rad"), dim);
      s = s + Signal::sinusoid(2.0 * std::numbers::pi / period, amp, phase);
    } else if (type == "poly") {
      const json& coeffs = require(term, tp, "coeffs");
      if (!coeffs.is_array() || coeffs.empty()) {
        throw ValidationError(child(tp, "coeffs"), "expected a nonempty coefficient list");
      }
      for (std::size_t k = 0; k < coeffs.size(); ++k) {
        const Eigen::VectorXd c = broadcast(coeffs[k], child(child(tp, "coeffs"), k), dim);
        if (k == 0) {
          s.add(ConstantTerm{c});
        } else {
          s.add(MonomialTerm{static_cast<int>(k), c});
        }
      }
    } else if (type == "exp") {
      const double rate = number(require(term, tp, "rate"), child(tp, "rate"));
      s.add(ExponentialTerm{rate, broadcast(require(term, tp, "coeff"), child(tp, "coeff"), dim)});
    } else {
      throw ValidationError(child(tp, "type"), "unknown signal term type '" + type +
                                                   "' (expected const, sin, poly or exp)");
    }
  }
  return s.simplified();
}

NetworkGraph graph_of(const json& j, const std::string& ptr) {
  NetworkGraph g;
  const std::string vp = child(ptr, "vertices");
  const json& vs = require(j, ptr, "vertices");
  if (!vs.is_array()) throw ValidationError(vp, "expected an array");
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const std::string p = child(vp, i);
    Vertex v;
    const json& id = require(vs[i], p, "id");
    v.id = id.is_number_integer() ? std::to_string(id.get<long long>()) : string(id, child(p, "id"));
    v.mass = number(require(vs[i], p, "mass"), child(p, "mass"));
    v.loss = number(require(vs[i], p, "loss"), child(p, "loss"));
    const std::string role = optional_field(vs[i], p, "role")
                                 ? string(vs[i]["role"], child(p, "role"))
                                 : std::string("plain");
    if (role == "plain") {
      v.role = VertexRole::plain;
    } else if (role == "producer") {
      v.role = VertexRole::producer;
    } else if (role == "consumer") {
      v.role = VertexRole::consumer;
    } else {
      throw ValidationError(child(p, "role"), "expected plain, producer or consumer");
    }
    g.vertices.push_back(v);
  }
  const std::string ep = child(ptr, "edges");
  const json& es = require(j, ptr, "edges");
  if (!es.is_array()) throw ValidationError(ep, "expected an array");
  auto id_of = [](const json& x, const std::string& p) {
    return x.is_number_integer() ? std::to_string(x.get<long long>()) : string(x, p);
  };
  for (std::size_t i = 0; i < es.size(); ++i) {
    const std::string p = child(ep, i);
    Edge e;
    e.tail = id_of(require(es[i], p, "tail"), child(p, "tail"));
    e.head = id_of(require(es[i], p, "head"), child(p, "head"));
    e.flow = number(require(es[i], p, "flow"), child(p, "flow"));
    g.edges.push_back(e);
  }
  return g;
}

Eigen::VectorXd nominal_state_of(const json& j, const std::string& ptr, const StateSpaceModel& model) {
  const int n = model.n();
  if (j.is_object()) {
    const json& eq = require(j, ptr, "equilibrium");
    const std::string p = child(ptr, "equilibrium");
    const Eigen::VectorXd u = broadcast(require(eq, p, "u"), child(p, "u"), model.m());
    const Eigen::VectorXd d = broadcast(require(eq, p, "d"), child(p, "d"), model.w());
    return -model.A.partialPivLu().solve(model.B * u + model.E * d);
  }
  return broadcast(j, ptr, n);
}

CostData cost_of(const json& j, const std::string& ptr, const StateSpaceModel& model,
                 Eigen::VectorXd& xn) {
  const int n = model.n(), m = model.m();
  CostData c;
  if (const json* x = optional_field(j, ptr, "xn")) xn = nominal_state_of(*x, child(ptr, "xn"), model);

  const std::string qp = child(ptr, "Q");
  const json& q = require(j, ptr, "Q");
  if (q.is_object() && q.contains("diagonal")) {
    c.Q = broadcast(q["diagonal"], child(qp, "diagonal"), n).asDiagonal();
  } else if (q.is_object() && q.contains("dense")) {
    c.Q = matrix_of(q["dense"], child(qp, "dense"), n, n);
  } else {
    throw ValidationError(qp, "expected {\"diagonal\": ...} or {\"dense\": [[...]]}");
  }
  if ((c.Q - c.Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, c.Q.cwiseAbs().maxCoeff())) {
    throw ValidationError(qp, "Q must be symmetric");
  }
  if (c.Q.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() <
      -1e-12 * std::max(1.0, c.Q.cwiseAbs().maxCoeff())) {
    throw ValidationError(qp, "Q must be positive semidefinite");
  }

  const json& s = require(j, ptr, "S");
  if (s.is_string()) {
    const std::string v = s.get<std::string>();
    if (v == "B_transpose") {
      c.S = model.B.transpose();
    } else if (v == "zero") {
      c.S = Eigen::MatrixXd::Zero(m, n);
    } else {
      throw ValidationError(child(ptr, "S"), "unknown shorthand '" + v + "' (expected B_transpose or zero)");
    }
  } else {
    c.S = matrix_of(s, child(ptr, "S"), m, n);
  }

  const json& r = require(j, ptr, "r");
  if (r.is_string()) {
    if (r.get<std::string>() != "minus_Q_xn") {
      throw ValidationError(child(ptr, "r"), "unknown shorthand (expected minus_Q_xn)");
    }
    if (xn.size() == 0) throw ValidationError(child(ptr, "xn"), "r = minus_Q_xn requires xn");
    c.r = Signal::constant(-c.Q * xn);
  } else {
    c.r = signal_of(r, child(ptr, "r"), n);
  }
  c.p = signal_of(require(j, ptr, "p"), child(ptr, "p"), m);
  return c;
}

std::string scale_label(double s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "x%gxn", s);
  return buf;
}

}  // namespace

int Scenario::intervals_for(double horizon) const {
  if (numerics.intervals > 0) return numerics.intervals;
  return std::max(2, static_cast<int>(std::ceil(horizon / numerics.step - 1e-9)));
}

Eigen::VectorXd Scenario::initial_state(const InitialStateSpec& spec) const {
  if (spec.scale) return *spec.scale * xn;
  return spec.value;
}

OcpScenario Scenario::ocp(const Eigen::VectorXd& x0, double horizon) const {
  OcpScenario sc{model, cost, disturbance, box, horizon, x0, intervals_for(horizon)};
  return sc;
}

BoxQpOptions Scenario::qp_options() const {
  BoxQpOptions o;
  o.tolerance = numerics.qp_tolerance;
  o.max_iterations = numerics.qp_max_iterations;
  o.restarts = numerics.qp_restarts;
  o.seed = numerics.seed;
  return o;
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("", "scenario must be a JSON object");

  Scenario sc;
  if (const json* name = optional_field(doc, "", "name")) sc.name = string(*name, "/name");
  sc.graph = graph_of(require(doc, "", "graph"), "/graph");
  validate(sc.graph);
  sc.model = assemble_model(sc.graph);
  const int n = sc.model.n(), m = sc.model.m(), w = sc.model.w();
  if (m == 0) throw ValidationError("/graph/vertices", "at least one producer is required");

  sc.cost = cost_of(require(doc, "", "cost"), "/cost", sc.model, sc.xn);
  if (w > 0) {
    sc.disturbance = signal_of(require(doc, "", "disturbance"), "/disturbance", w);
  } else {
    sc.disturbance = Signal(0);
  }

  const json& bounds = require(doc, "", "bounds");
  sc.box.lower = broadcast(require(bounds, "/bounds", "u_min"), "/bounds/u_min", m);
  sc.box.upper = broadcast(require(bounds, "/bounds", "u_max"), "/bounds/u_max", m);
  for (int i = 0; i < m; ++i) {
    if (sc.box.lower(i) < 0.0) {
      throw ValidationError("/bounds/u_min/" + std::to_string(i), "heat injection bounds must be nonnegative");
    }
    if (sc.box.upper(i) <= sc.box.lower(i)) {
      throw ValidationError("/bounds/u_max/" + std::to_string(i), "u_max must exceed u_min");
    }
  }

  const json& runs = require(doc, "", "runs");
  const json& x0s = require(runs, "/runs", "x0");
  if (!x0s.is_array() || x0s.empty()) throw ValidationError("/runs/x0", "expected a nonempty array");
  for (std::size_t i = 0; i < x0s.size(); ++i) {
    const std::string p = child("/runs/x0", i);
    InitialStateSpec spec;
    if (const json* s = optional_field(x0s[i], p, "scale")) {
      spec.scale = number(*s, child(p, "scale"));
      if (sc.xn.size() == 0) throw ValidationError(child(p, "scale"), "scaled x0 requires /cost/xn");
      spec.label = scale_label(*spec.scale);
    } else if (const json* v = optional_field(x0s[i], p, "value")) {
      spec.value = vector_of(*v, child(p, "value"), n);
      spec.label = "x0abs" + std::to_string(i);
    } else {
      throw ValidationError(p, "expected {\"scale\": s} or {\"value\": [...]}");
    }
    if (const json* l = optional_field(x0s[i], p, "label")) spec.label = string(*l, child(p, "label"));
    sc.initial_states.push_back(spec);
  }
  sc.horizons = number_list(require(runs, "/runs", "horizons_s"), "/runs/horizons_s");
  if (sc.horizons.empty()) throw ValidationError("/runs/horizons_s", "expected at least one horizon");
  for (std::size_t i = 0; i < sc.horizons.size(); ++i) {
    if (sc.horizons[i] <= 0.0) throw ValidationError(child("/runs/horizons_s", i), "horizon must be positive");
  }

  if (const json* num = optional_field(doc, "", "numerics")) {
    auto& nm = sc.numerics;
    const std::string p = "/numerics";
    if (const json* v = optional_field(*num, p, "step_s")) nm.step = positive(*v, p + "/step_s");
    if (const json* v = optional_field(*num, p, "N")) {
      nm.intervals = integer(*v, p + "/N");
      if (nm.intervals < 1) throw ValidationError(p + "/N", "N must be at least 1");
    }
    if (const json* v = optional_field(*num, p, "qp_tolerance")) nm.qp_tolerance = positive(*v, p + "/qp_tolerance");
    if (const json* v = optional_field(*num, p, "qp_max_iterations")) {
      nm.qp_max_iterations = integer(*v, p + "/qp_max_iterations");
      if (nm.qp_max_iterations < 1) throw ValidationError(p + "/qp_max_iterations", "must be positive");
    }
    if (const json* v = optional_field(*num, p, "qp_restarts")) {
      nm.qp_restarts = integer(*v, p + "/qp_restarts");
      if (nm.qp_restarts < 0) throw ValidationError(p + "/qp_restarts", "must be nonnegative");
    }
    if (const json* v = optional_field(*num, p, "seed")) {
      if (!v->is_number_unsigned()) throw ValidationError(p + "/seed", "expected a nonnegative integer");
      nm.seed = v->get<std::uint64_t>();
    }
    if (const json* v = optional_field(*num, p, "costate_tolerance")) {
      nm.costate_tolerance = positive(*v, p + "/costate_tolerance");
    }
    if (const json* v = optional_field(*num, p, "base_period_s")) nm.base_period = positive(*v, p + "/base_period_s");
    if (const json* v = optional_field(*num, p, "turnpike_points")) {
      nm.turnpike_points = integer(*v, p + "/turnpike_points");
      if (nm.turnpike_points < 2) throw ValidationError(p + "/turnpike_points", "must be at least 2");
    }
  }

  if (const json* out = optional_field(doc, "", "outputs")) {
    auto& o = sc.outputs;
    const std::string p = "/outputs";
    if (const json* v = optional_field(*out, p, "dir")) o.dir = string(*v, p + "/dir");
    if (const json* v = optional_field(*out, p, "eps_multiples")) o.eps_multiples = number_list(*v, p + "/eps_multiples");
    if (const json* v = optional_field(*out, p, "eps_grid")) o.eps_grid = number_list(*v, p + "/eps_grid");
    for (std::size_t i = 0; i < o.eps_multiples.size(); ++i) {
      if (o.eps_multiples[i] <= 0.0) throw ValidationError(child(p + "/eps_multiples", i), "must be positive");
    }
    for (std::size_t i = 0; i < o.eps_grid.size(); ++i) {
      if (o.eps_grid[i] < 0.0) throw ValidationError(child(p + "/eps_grid", i), "must be nonnegative");
    }
    if (const json* v = optional_field(*out, p, "alpha_c")) {
      o.alpha_c = number(*v, p + "/alpha_c");
      if (*o.alpha_c < 0.0) throw ValidationError(p + "/alpha_c", "must be nonnegative");
    }
    if (const json* v = optional_field(*out, p, "alpha_c_max")) o.alpha_c_max = positive(*v, p + "/alpha_c_max");
    if (const json* v = optional_field(*out, p, "storage_x0_scales")) {
      o.storage_x0_scales = number_list(*v, p + "/storage_x0_scales");
      if (!o.storage_x0_scales.empty() && sc.xn.size() == 0) {
        throw ValidationError(p + "/storage_x0_scales", "scaled initial states require /cost/xn");
      }
    }
    if (const json* v = optional_field(*out, p, "T_list_s")) {
      o.storage_horizons = number_list(*v, p + "/T_list_s");
      for (std::size_t i = 0; i < o.storage_horizons.size(); ++i) {
        if (o.storage_horizons[i] <= 0.0) throw ValidationError(child(p + "/T_list_s", i), "must be positive");
      }
    }
    if (const json* v = optional_field(*out, p, "switching_tolerance")) {
      o.switching_tolerance = positive(*v, p + "/switching_tolerance");
    }
  }
  if (sc.xn.size() == 0) sc.outputs.storage_x0_scales.clear();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("", "cannot read scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

Signal parse_signal(const std::string& text, int dim, const std::string& pointer) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(pointer, std::string("malformed JSON: ") + e.what());
  }
  return signal_of(doc, pointer, dim);
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw std::out_of_range("no CSV column named " + name);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty CSV");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.header.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(rows.size() + 1) +
                               " has the wrong number of fields");
    }
    rows.push_back(std::move(row));
  }
  table.rows.resize(rows.size(), table.header.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) table.rows(i, k) = rows[i][k];
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t k = 0; k < table.header.size(); ++k) out << (k ? "," : "") << table.header[k];
  out << '\n';
  for (int i = 0; i < table.rows.rows(); ++i) {
    for (int k = 0; k < table.rows.cols(); ++k) out << (k ? "," : "") << format_number(table.rows(i, k));
    out << '\n';
  }
}

std::string state_column(const StateSpaceModel& model, int i) { return "x_" + model.vertex_ids[i] + "_K"; }

std::string input_column(const StateSpaceModel& model, int k) {
  return "u_" + model.vertex_ids[model.producers[k]] + "_W";
}

CsvTable run_table(const TrajectoryPair& pair, const StateSpaceModel& model, const Eigen::MatrixXd* lambda,
                   const Eigen::MatrixXd* switching) {
  const int n = model.n(), m = model.m(), N = pair.intervals();
  CsvTable t;
  t.header.push_back("t_s");
  for (int i = 0; i < n; ++i) t.header.push_back(state_column(model, i));
  for (int k = 0; k < m; ++k) t.header.push_back(input_column(model, k));
  if (lambda) {
    for (int i = 0; i < n; ++i) t.header.push_back("lambda_" + model.vertex_ids[i]);
  }
  if (switching) {
    for (int k = 0; k < m; ++k) t.header.push_back("s_" + model.vertex_ids[model.producers[k]]);
  }
  t.rows.resize(N + 1, t.header.size());
  for (int j = 0; j <= N; ++j) {
    const int jc = std::min(j, N - 1);
    int c = 0;
    t.rows(j, c++) = pair.t[j];
    for (int i = 0; i < n; ++i) t.rows(j, c++) = pair.x(i, j);
    for (int k = 0; k < m; ++k) t.rows(j, c++) = pair.u(k, jc);
    if (lambda) {
      for (int i = 0; i < n; ++i) t.rows(j, c++) = (*lambda)(i, j);
    }
    if (switching) {
      for (int k = 0; k < m; ++k) t.rows(j, c++) = (*switching)(k, jc);
    }
  }
  return t;
}

CsvTable turnpike_table(const TurnpikeTrajectory& tp, const StateSpaceModel& model,
                        const std::vector<double>& grid) {
  const int n = model.n(), m = model.m();
  CsvTable t;
  t.header.push_back("t_s");
  for (int i = 0; i < n; ++i) t.header.push_back(state_column(model, i));
  for (int k = 0; k < m; ++k) t.header.push_back(input_column(model, k));
  for (int i = 0; i < n; ++i) t.header.push_back("lambda_" + model.vertex_ids[i]);
  t.rows.resize(grid.size(), t.header.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double tt = grid[j];
    t.rows(j, 0) = tt;
    t.rows.row(j).segment(1, n) = tp.x(tt).transpose();
    t.rows.row(j).segment(1 + n, m) = tp.u(tt).transpose();
    t.rows.row(j).segment(1 + n + m, n) = tp.lambda(tt).transpose();
  }
  return t;
}

CsvTable deviation_table(const DeviationSeries& series) {
  CsvTable t;
  t.header = {"t_s", "e"};
  t.rows.resize(series.t.size(), 2);
  for (std::size_t k = 0; k < series.t.size(); ++k) {
    t.rows(k, 0) = series.t[k];
    t.rows(k, 1) = series.e[k];
  }
  return t;
}

}  // namespace dhn
