#pragma once

#include "gme/fcs.hpp"
#include "gme/metrology.hpp"
#include "gme/model.hpp"
#include "gme/replica.hpp"
#include "gme/result_table.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef GME_VERSION
#define GME_VERSION "0.0.0"
#endif

namespace gme {

using ojson = nlohmann::ordered_json;

inline const std::vector<std::string>& known_models() {
  static const std::vector<std::string> v{"opo", "opo-tur-deformed"};
  return v;
}

inline const std::vector<std::string>& known_tasks() {
  static const std::vector<std::string> v{"evolve", "joint_qfi", "env_qfi", "qfi_rate", "scgf",
                                          "cumulants", "count_distribution", "tur", "replica_qfi"};
  return v;
}

struct ScenarioConfig {
  std::string model_name;
  double omega = 0.0;
  double chi = 0.2;
  double kappa = 1.0;
  double eta = 1.0;

  std::string task;
  double theta = 0.0;

  std::vector<double> t_grid;
  std::vector<double> lambda_grid;
  std::vector<double> chi_grid;

  std::vector<double> weights{1.0};

  double fd_step = 1e-3;
  double fd_lambda_step = 1e-3;
  double fd_mixed_step = 1e-2;
  bool fd_richardson = false;

  IntegratorConfig integrator{};

  std::vector<int> replica_orders{5, 10};
  int max_replicas = 24;

  double cd_t = 0.0;
  int cd_n_max = 0;
  int cd_lambda_points = 256;

  std::string output_directory = "out";
  std::string output_format = "csv";

  QuadraticModel make_model(double chi_value, double eta_value) const {
    QuadraticModel base = opo_model(omega, chi_value, kappa, eta_value);
    if (model_name == "opo-tur-deformed") return tur_deformed(base, 0.0);
    return base;
  }
  QuadraticModel make_model() const { return make_model(chi, eta); }

  FDConfig fd_config() const {
    FDConfig fd;
    fd.step = fd_step;
    fd.lambda_step = fd_lambda_step;
    fd.mixed_step = fd_mixed_step;
    fd.richardson = fd_richardson;
    return fd;
  }

  SteadyStateConfig steady_config() const {
    SteadyStateConfig s;
    s.integrator = integrator;
    return s;
  }

  /// Fully resolved config, defaults and expanded grids included.
  ojson to_json() const {
    ojson j;
    j["model"] = {{"name", model_name},
                  {"parameters", {{"omega", omega}, {"chi", chi}, {"kappa", kappa}, {"eta", eta}}}};
    j["task"] = task;
    j["theta"] = theta;
    ojson grids = ojson::object();
    if (!t_grid.empty()) grids["t"] = t_grid;
    if (!lambda_grid.empty()) grids["lambda"] = lambda_grid;
    if (!chi_grid.empty()) grids["chi"] = chi_grid;
    j["grids"] = grids;
    j["counting"] = {{"weights", weights}};
    j["fd"] = {{"step", fd_step}, {"lambda_step", fd_lambda_step}, {"mixed_step", fd_mixed_step},
               {"richardson", fd_richardson}};
    j["integrator"] = {{"rel_tol", integrator.rel_tol},
                       {"abs_tol", integrator.abs_tol},
                       {"max_step", integrator.max_step},
                       {"blowup_norm", integrator.blowup_norm}};
    j["replica"] = {{"orders", replica_orders}, {"max_replicas", max_replicas}};
    j["count_distribution"] = {{"t", cd_t}, {"n_max", cd_n_max}, {"lambda_points", cd_lambda_points}};
    j["output"] = {{"directory", output_directory}, {"format", output_format}};
    return j;
  }
};

namespace detail {

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

/// Schema walker that records every violation instead of stopping at the first.
class ConfigReader {
 public:
  std::vector<std::string> diagnostics;

  void error(const std::string& path, const std::string& msg) { diagnostics.push_back(path + ": " + msg); }

  const ojson* section(const ojson& parent, const std::string& key, const std::string& path, bool required) {
    if (!parent.contains(key)) {
      if (required) error(path, "required field is missing");
      return nullptr;
    }
    const ojson& v = parent.at(key);
    if (!v.is_object()) {
      error(path, "must be an object");
      return nullptr;
    }
    return &v;
  }

  void unknown_keys(const ojson& obj, const std::string& prefix, std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) error(prefix.empty() ? key : prefix + "." + key, "unknown key");
    }
  }

  std::optional<double> number(const ojson& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const ojson& v = obj.at(key);
    if (!v.is_number()) {
      error(path, "must be a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      error(path, "must be finite");
      return std::nullopt;
    }
    return x;
  }

  void positive(const ojson& obj, const std::string& key, const std::string& path, double& out) {
    if (auto x = number(obj, key, path)) {
      if (*x > 0.0)
        out = *x;
      else
        diagnostics.push_back(path + " must be positive");
    }
  }

  std::optional<int> integer(const ojson& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const ojson& v = obj.at(key);
    if (!v.is_number_integer()) {
      error(path, "must be an integer");
      return std::nullopt;
    }
    return v.get<int>();
  }

  std::optional<std::string> string(const ojson& obj, const std::string& key, const std::string& path,
                                    bool required) {
    if (!obj.contains(key)) {
      if (required) error(path, "required field is missing");
      return std::nullopt;
    }
    const ojson& v = obj.at(key);
    if (!v.is_string()) {
      error(path, "must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  /// A list of numbers, or {start, stop, step} with round((stop-start)/step)+1 points.
  std::vector<double> grid(const ojson& v, const std::string& path) {
    std::vector<double> out;
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
          error(path + "[" + std::to_string(i) + "]", "must be a finite number");
          return {};
        }
        out.push_back(v[i].get<double>());
      }
    } else if (v.is_object()) {
      unknown_keys(v, path, {"start", "stop", "step"});
      const auto start = number(v, "start", path + ".start");
      const auto stop = number(v, "stop", path + ".stop");
      const auto step = number(v, "step", path + ".step");
      if (!start || !stop || !step) {
        error(path, "range needs numeric start, stop and step");
        return {};
      }
      if (!(*step > 0.0) || *stop < *start) {
        error(path, "range needs step > 0 and stop >= start");
        return {};
      }
      const long n = std::lround((*stop - *start) / *step) + 1;
      if (n > 100000) {
        error(path, "range has more than 100000 points");
        return {};
      }
      for (long i = 0; i < n; ++i) out.push_back(*start + static_cast<double>(i) * *step);
    } else {
      error(path, "must be a list of numbers or {start, stop, step}");
      return {};
    }
    if (out.empty()) error(path, "grid must be nonempty");
    if (!std::is_sorted(out.begin(), out.end())) error(path, "grid must be sorted ascending");
    return out;
  }
};

}  // namespace detail

struct ParseResult {
  ScenarioConfig config;
  std::vector<std::string> diagnostics;
  bool ok() const { return diagnostics.empty(); }
};

/// Full schema check of a parsed config document.
inline ParseResult parse_config(const ojson& doc) {
  ParseResult res;
  ScenarioConfig& c = res.config;
  detail::ConfigReader r;
  if (!doc.is_object()) {
    r.error("<root>", "config must be an object");
    res.diagnostics = r.diagnostics;
    return res;
  }
  r.unknown_keys(doc, "", {"model", "task", "theta", "grids", "counting", "fd", "integrator", "replica",
                           "count_distribution", "output"});

  if (const ojson* m = r.section(doc, "model", "model", false)) {
    r.unknown_keys(*m, "model", {"name", "parameters"});
    if (auto name = r.string(*m, "name", "model.name", true)) {
      const auto& known = known_models();
      if (std::find(known.begin(), known.end(), *name) == known.end())
        r.error("model.name", "unknown model '" + *name + "'; valid: " + detail::join(known));
      else
        c.model_name = *name;
    }
    if (const ojson* p = r.section(*m, "parameters", "model.parameters", false)) {
      r.unknown_keys(*p, "model.parameters", {"omega", "chi", "kappa", "eta"});
      if (auto x = r.number(*p, "omega", "model.parameters.omega")) c.omega = *x;
      if (auto x = r.number(*p, "chi", "model.parameters.chi")) c.chi = *x;
      r.positive(*p, "kappa", "model.parameters.kappa", c.kappa);
      if (auto x = r.number(*p, "eta", "model.parameters.eta")) {
        if (*x >= 0.0 && *x <= 1.0)
          c.eta = *x;
        else
          r.error("model.parameters.eta", "must lie in [0,1], got " + ResultTable::format_number(*x));
      }
    }
  } else if (!doc.contains("model")) {
    r.error("model.name", "required field is missing");
  }

  if (auto task = r.string(doc, "task", "task", true)) {
    const auto& known = known_tasks();
    if (std::find(known.begin(), known.end(), *task) == known.end())
      r.error("task", "unknown task '" + *task + "'; valid: " + detail::join(known));
    else
      c.task = *task;
  }
  if (auto x = r.number(doc, "theta", "theta")) c.theta = *x;

  if (const ojson* g = r.section(doc, "grids", "grids", false)) {
    r.unknown_keys(*g, "grids", {"t", "lambda", "chi"});
    if (g->contains("t")) c.t_grid = r.grid(g->at("t"), "grids.t");
    if (g->contains("lambda")) c.lambda_grid = r.grid(g->at("lambda"), "grids.lambda");
    if (g->contains("chi")) c.chi_grid = r.grid(g->at("chi"), "grids.chi");
  }
  if (!c.t_grid.empty() && c.t_grid.front() < 0.0) r.error("grids.t", "times must be nonnegative");

  if (const ojson* cnt = r.section(doc, "counting", "counting", false)) {
    r.unknown_keys(*cnt, "counting", {"weights"});
    if (cnt->contains("weights")) {
      const ojson& w = cnt->at("weights");
      if (!w.is_array() || w.size() != 1 || !w[0].is_number())
        r.error("counting.weights", "must be a list with one number per monitored channel (1 for the OPO)");
      else
        c.weights = {w[0].get<double>()};
    }
  }

  if (const ojson* fd = r.section(doc, "fd", "fd", false)) {
    r.unknown_keys(*fd, "fd", {"step", "lambda_step", "mixed_step", "richardson"});
    r.positive(*fd, "step", "fd.step", c.fd_step);
    r.positive(*fd, "lambda_step", "fd.lambda_step", c.fd_lambda_step);
    r.positive(*fd, "mixed_step", "fd.mixed_step", c.fd_mixed_step);
    if (fd->contains("richardson")) {
      if (!fd->at("richardson").is_boolean())
        r.error("fd.richardson", "must be true or false");
      else
        c.fd_richardson = fd->at("richardson").get<bool>();
    }
  }

  if (const ojson* in = r.section(doc, "integrator", "integrator", false)) {
    r.unknown_keys(*in, "integrator", {"rel_tol", "abs_tol", "max_step", "blowup_norm"});
    r.positive(*in, "rel_tol", "integrator.rel_tol", c.integrator.rel_tol);
    r.positive(*in, "abs_tol", "integrator.abs_tol", c.integrator.abs_tol);
    if (auto x = r.number(*in, "max_step", "integrator.max_step")) c.integrator.max_step = *x;
    r.positive(*in, "blowup_norm", "integrator.blowup_norm", c.integrator.blowup_norm);
  }

  if (const ojson* rep = r.section(doc, "replica", "replica", false)) {
    r.unknown_keys(*rep, "replica", {"orders", "max_replicas"});
    if (auto x = r.integer(*rep, "max_replicas", "replica.max_replicas")) {
      if (*x >= 2)
        c.max_replicas = *x;
      else
        r.error("replica.max_replicas", "must be >= 2");
    }
    if (rep->contains("orders")) {
      const ojson& o = rep->at("orders");
      std::vector<int> orders;
      bool good = o.is_array() && !o.empty();
      if (good) {
        for (const auto& v : o) {
          if (!v.is_number_integer() || v.get<int>() < 0) good = false;
          else orders.push_back(v.get<int>());
        }
      }
      if (!good)
        r.error("replica.orders", "must be a nonempty list of nonnegative integers");
      else if (!std::is_sorted(orders.begin(), orders.end()))
        r.error("replica.orders", "must be sorted ascending");
      else
        c.replica_orders = orders;
    }
  }
  if (c.task == "replica_qfi" && !c.replica_orders.empty() && c.replica_orders.back() + 2 > c.max_replicas)
    r.error("replica.orders", "order " + std::to_string(c.replica_orders.back()) + " needs " +
                                  std::to_string(c.replica_orders.back() + 2) + " replicas, above max_replicas " +
                                  std::to_string(c.max_replicas));

  const ojson* cd = r.section(doc, "count_distribution", "count_distribution", false);
  if (cd) {
    r.unknown_keys(*cd, "count_distribution", {"t", "n_max", "lambda_points"});
    if (auto x = r.number(*cd, "t", "count_distribution.t")) {
      if (*x >= 0.0)
        c.cd_t = *x;
      else
        r.error("count_distribution.t", "must be nonnegative");
    }
    if (auto x = r.integer(*cd, "n_max", "count_distribution.n_max")) {
      if (*x >= 0)
        c.cd_n_max = *x;
      else
        r.error("count_distribution.n_max", "must be nonnegative");
    }
    if (auto x = r.integer(*cd, "lambda_points", "count_distribution.lambda_points")) {
      if (*x >= 2)
        c.cd_lambda_points = *x;
      else
        r.error("count_distribution.lambda_points", "must be >= 2");
    }
    if (c.cd_n_max >= c.cd_lambda_points)
      r.error("count_distribution.n_max", "must be below lambda_points");
  }

  if (const ojson* out = r.section(doc, "output", "output", false)) {
    r.unknown_keys(*out, "output", {"directory", "format"});
    if (auto d = r.string(*out, "directory", "output.directory", false)) c.output_directory = *d;
    if (auto f = r.string(*out, "format", "output.format", false)) {
      if (*f == "csv" || *f == "json")
        c.output_format = *f;
      else
        r.error("output.format", "must be csv or json");
    }
  }

  // task-specific requirements
  const std::string& t = c.task;
  if ((t == "evolve" || t == "joint_qfi" || t == "env_qfi" || t == "replica_qfi") && c.t_grid.empty())
    r.error("grids.t", "task '" + t + "' needs a time grid");
  if (t == "scgf" && c.lambda_grid.empty()) r.error("grids.lambda", "task 'scgf' needs a lambda grid");
  if ((t == "qfi_rate" || t == "cumulants" || t == "tur") && c.chi_grid.empty())
    r.error("grids.chi", "task '" + t + "' needs a chi grid");
  if (t == "count_distribution") {
    if (!cd || !cd->contains("t")) r.error("count_distribution.t", "required field is missing");
    if (!cd || !cd->contains("n_max")) r.error("count_distribution.n_max", "required field is missing");
  }
  if (c.model_name == "opo-tur-deformed" && c.theta <= -1.0)
    r.error("theta", "must be > -1 for opo-tur-deformed");

  res.diagnostics = std::move(r.diagnostics);
  return res;
}

/// Reads and parses a config file. Unreadable files and JSON syntax errors
/// come back as diagnostics.
inline ParseResult load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ParseResult res;
    res.diagnostics.push_back(path + ": cannot read file");
    return res;
  }
  ojson doc;
  try {
    doc = ojson::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    ParseResult res;
    res.diagnostics.push_back(path + ": " + e.what());
    return res;
  }
  return parse_config(doc);
}

struct PointError {
  std::size_t index = 0;
  double grid_value = 0.0;
  std::string message;
};

struct ScenarioResult {
  ResultTable table{{}};
  std::vector<PointError> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

namespace detail {

/// Runs fn(i) for i in [0, n) on `jobs` threads. Each call writes only to its
/// own slot, so output order is independent of scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double rate(double q, double t) { return t > 0.0 ? q / t : kNaN; }

// Time grid with a leading 0 for the integrators; `offset` maps back.
inline std::vector<double> with_origin(const std::vector<double>& t, std::size_t& offset) {
  offset = (!t.empty() && t.front() == 0.0) ? 0 : 1;
  std::vector<double> out;
  if (offset) out.push_back(0.0);
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

}  // namespace detail

/// Dispatches a validated config. Grid points that fail numerically become
/// rows of NaN plus an entry in `errors`; the rest of the grid still runs.
inline ScenarioResult run_scenario(const ScenarioConfig& c, int jobs = 1) {
  using detail::kNaN;
  ScenarioResult res;
  std::mutex warn_mutex;
  std::set<std::string> warnings;
  FDConfig fd = c.fd_config();
  fd.on_warning = [&](const std::string& msg) {
    std::lock_guard<std::mutex> lock(warn_mutex);
    warnings.insert(msg);
  };
  const SteadyStateConfig ss = c.steady_config();
  const CountingSpec counting{c.weights};
  auto fail = [&](std::size_t i, double g, const std::exception& e) {
    res.errors.push_back({i, g, e.what()});
  };

  if (c.task == "evolve") {
    std::vector<std::string> cols{"t", "xi_re", "xi_im"};
    const int dim = 2;
    for (int i = 0; i < dim; ++i) {
      cols.push_back("d" + std::to_string(i) + "_re");
      cols.push_back("d" + std::to_string(i) + "_im");
    }
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) {
        cols.push_back("sigma" + std::to_string(i) + std::to_string(j) + "_re");
        cols.push_back("sigma" + std::to_string(i) + std::to_string(j) + "_im");
      }
    res.table = ResultTable(cols);
    std::size_t off = 0;
    const auto grid = detail::with_origin(c.t_grid, off);
    try {
      const QuadraticModel model = c.make_model();
      const auto mc = coefficients_from_generator(lindblad_generator(model, c.theta));
      const Trajectory tr = evolve(GaussianMomentState::vacuum(model.n_modes()), mc, grid, c.integrator);
      for (std::size_t k = off; k < grid.size(); ++k) {
        const auto& s = tr.states[k];
        std::vector<Cell> row{grid[k], s.xi.real(), s.xi.imag()};
        for (int i = 0; i < dim; ++i) {
          row.emplace_back(s.d(i).real());
          row.emplace_back(s.d(i).imag());
        }
        for (int i = 0; i < dim; ++i)
          for (int j = i; j < dim; ++j) {
            row.emplace_back(s.sigma(i, j).real());
            row.emplace_back(s.sigma(i, j).imag());
          }
        res.table.add_row(row);
      }
    } catch (const std::exception& e) {
      fail(0, c.t_grid.front(), e);
      for (double t : c.t_grid) {
        std::vector<Cell> row(cols.size(), Cell{kNaN});
        row[0] = t;
        res.table.add_row(row);
      }
    }
  } else if (c.task == "joint_qfi" || c.task == "env_qfi") {
    const bool env = c.task == "env_qfi";
    res.table = env ? ResultTable({"t", "joint_qfi", "env_qfi", "joint_rate", "env_rate"})
                    : ResultTable({"t", "joint_qfi", "joint_rate"});
    std::size_t off = 0;
    const auto grid = detail::with_origin(c.t_grid, off);
    std::vector<double> joint(grid.size(), kNaN), envq(grid.size(), kNaN);
    try {
      const QuadraticModel model = c.make_model();
      joint = joint_qfi_series(model, c.theta, grid, fd, c.integrator);
      if (env) envq = env_qfi_series(model, c.theta, grid, fd, c.integrator);
    } catch (const std::exception& e) {
      fail(0, c.t_grid.front(), e);
    }
    for (std::size_t k = off; k < grid.size(); ++k) {
      const double t = grid[k];
      if (env)
        res.table.add_row({t, joint[k], envq[k], detail::rate(joint[k], t), detail::rate(envq[k], t)});
      else
        res.table.add_row({t, joint[k], detail::rate(joint[k], t)});
    }
  } else if (c.task == "qfi_rate" || c.task == "cumulants" || c.task == "tur") {
    const auto& grid = c.chi_grid;
    std::vector<std::vector<double>> vals(grid.size());
    std::vector<std::string> errs(grid.size());
    detail::parallel_for(grid.size(), jobs, [&](std::size_t i) {
      try {
        const QuadraticModel model = c.make_model(grid[i], c.eta);
        if (c.task == "qfi_rate") {
          vals[i] = {joint_qfi_rate(model, c.theta, fd, ss)};
        } else if (c.task == "cumulants") {
          const CumulantReport r = cumulants(model, c.theta, counting, fd, ss);
          vals[i] = {r.J, r.Dn, r.S};
        } else {
          const auto rows = tur_check([&](double) { return model; }, c.theta, counting, {grid[i]}, fd, ss);
          if (!rows[0].ok && rows[0].error.rfind("tur_violated", 0) != 0) throw std::runtime_error(rows[0].error);
          if (!rows[0].ok) fd.warn(rows[0].error + " at chi=" + ResultTable::format_number(grid[i]));
          vals[i] = {rows[0].D_over_J2, rows[0].inv_f, rows[0].slack};
        }
      } catch (const std::exception& e) {
        errs[i] = e.what();
      }
    });
    if (c.task == "qfi_rate")
      res.table = ResultTable({"chi", "qfi_rate"});
    else if (c.task == "cumulants")
      res.table = ResultTable({"chi", "quantity", "re", "im"});
    else
      res.table = ResultTable({"chi_over_kappa", "D_over_J2", "inv_f", "slack"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!errs[i].empty()) res.errors.push_back({i, grid[i], errs[i]});
      if (c.task == "qfi_rate") {
        res.table.add_row({grid[i], vals[i].empty() ? kNaN : vals[i][0]});
      } else if (c.task == "cumulants") {
        const char* names[] = {"J", "D", "S"};
        for (int q = 0; q < 3; ++q)
          res.table.add_row({grid[i], std::string(names[q]), vals[i].empty() ? kNaN : vals[i][q], 0.0});
      } else {
        const bool have = !vals[i].empty();
        res.table.add_row({grid[i] / c.kappa, have ? vals[i][0] : kNaN, have ? vals[i][1] : kNaN,
                           have ? vals[i][2] : kNaN});
      }
    }
  } else if (c.task == "scgf") {
    res.table = ResultTable({"lambda", "quantity", "re", "im"});
    std::vector<ScgfPoint> pts;
    try {
      pts = scgf_sweep(c.make_model(), c.theta, counting, c.lambda_grid, ss);
    } catch (const std::exception& e) {
      fail(0, c.lambda_grid.front(), e);
      pts.assign(c.lambda_grid.size(), ScgfPoint{});
      for (std::size_t i = 0; i < pts.size(); ++i) pts[i].lambda = c.lambda_grid[i];
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].ok)
        res.table.add_row({pts[i].lambda, std::string("C"), pts[i].value.real(), pts[i].value.imag()});
      else {
        if (!pts[i].error.empty()) res.errors.push_back({i, pts[i].lambda, pts[i].error});
        res.table.add_row({pts[i].lambda, std::string("C"), kNaN, kNaN});
      }
    }
  } else if (c.task == "count_distribution") {
    res.table = ResultTable({"n", "quantity", "re", "im"});
    try {
      const auto cd = count_distribution(c.make_model(), c.theta, counting, c.cd_t, c.cd_n_max,
                                         c.cd_lambda_points, c.integrator);
      for (int n = 0; n <= c.cd_n_max; ++n)
        res.table.add_row({static_cast<double>(n), std::string("P"), cd.p[n], 0.0});
      if (cd.normalization_defect > 1e-6)
        warnings.insert("count_distribution: normalization defect " +
                        ResultTable::format_number(cd.normalization_defect));
    } catch (const std::exception& e) {
      fail(0, c.cd_t, e);
      for (int n = 0; n <= c.cd_n_max; ++n)
        res.table.add_row({static_cast<double>(n), std::string("P"), kNaN, kNaN});
    }
  } else if (c.task == "replica_qfi") {
    std::vector<std::string> cols{"t"};
    for (int n : c.replica_orders) cols.push_back("Q_" + std::to_string(n) + "_over_t");
    cols.push_back("tsme_joint_rate");
    cols.push_back("tsme_env_rate");
    res.table = ResultTable(cols);
    ReplicaConfig rc;
    rc.max_replicas = c.max_replicas;
    rc.integrator.max_step = c.integrator.max_step;
    rc.integrator.blowup_norm = c.integrator.blowup_norm;
    const auto& grid = c.t_grid;
    std::vector<std::vector<Cell>> rows(grid.size());
    std::vector<std::string> errs(grid.size());
    detail::parallel_for(grid.size(), jobs, [&](std::size_t i) {
      const double t = grid[i];
      std::vector<Cell> row(cols.size(), Cell{kNaN});
      row[0] = t;
      try {
        const auto series =
            replica_qfi_series(c.make_model(), c.theta, t, c.replica_orders.back(), fd, rc);
        for (std::size_t k = 0; k < c.replica_orders.size(); ++k)
          row[1 + k] = detail::rate(series.approximants[c.replica_orders[k]], t);
        const QuadraticModel pure = c.make_model(c.chi, 1.0);
        row[cols.size() - 2] = detail::rate(joint_qfi(pure, c.theta, t, fd, c.integrator), t);
        row[cols.size() - 1] = detail::rate(env_qfi(pure, c.theta, t, fd, c.integrator), t);
      } catch (const std::exception& e) {
        errs[i] = e.what();
      }
      rows[i] = std::move(row);
    });
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!errs[i].empty()) res.errors.push_back({i, grid[i], errs[i]});
      res.table.add_row(rows[i]);
    }
  } else {
    throw Error("invalid_config", "unknown task '" + c.task + "'");
  }

  res.warnings.assign(warnings.begin(), warnings.end());
  return res;
}

struct RunOutcome {
  int exit_code = 0;
  std::vector<std::string> messages;
  std::filesystem::path table_path;
  std::filesystem::path manifest_path;
};

struct RunOverrides {
  std::optional<std::string> output_directory;
  std::optional<std::string> format;
  int jobs = 1;
};

/// Loads, validates, runs and writes `<dir>/<task>.<fmt>` plus manifest.json.
/// Exit code 0 on success, 2 on config error, 3 on numerical failure.
inline RunOutcome run_config_file(const std::string& path, const RunOverrides& ov = {}) {
  RunOutcome out;
  ParseResult pr = load_config(path);
  if (ov.format && *ov.format != "csv" && *ov.format != "json")
    pr.diagnostics.push_back("--format: must be csv or json");
  if (ov.jobs < 1) pr.diagnostics.push_back("--jobs: must be >= 1");
  if (!pr.ok()) {
    out.exit_code = 2;
    out.messages = pr.diagnostics;
    return out;
  }
  ScenarioConfig c = pr.config;
  if (ov.output_directory) c.output_directory = *ov.output_directory;
  if (ov.format) c.output_format = *ov.format;

  const auto t0 = std::chrono::steady_clock::now();
  ScenarioResult res;
  try {
    res = run_scenario(c, ov.jobs);
  } catch (const std::exception& e) {
    out.exit_code = 3;
    out.messages.push_back(e.what());
    return out;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.output_directory, ec);
  if (ec) {
    out.exit_code = 2;
    out.messages.push_back("output.directory: cannot create '" + c.output_directory + "': " + ec.message());
    return out;
  }
  out.table_path = fs::path(c.output_directory) / (c.task + "." + c.output_format);
  {
    std::ofstream f(out.table_path, std::ios::binary);
    if (c.output_format == "csv")
      res.table.write_csv(f);
    else
      res.table.write_json(f);
  }

  ojson manifest;
  manifest["tool"] = "gme_cli";
  manifest["version"] = GME_VERSION;
  manifest["config_path"] = path;
  manifest["config"] = c.to_json();
  manifest["jobs"] = ov.jobs;
  manifest["wall_time_s"] = wall;
  manifest["status"] = res.ok() ? "ok" : "numerical_failure";
  manifest["rows"] = res.table.rows().size();
  manifest["columns"] = res.table.columns();
  manifest["output"] = out.table_path.filename().string();
  ojson errors = ojson::array();
  for (const auto& e : res.errors) {
    errors.push_back({{"index", e.index}, {"grid_value", e.grid_value}, {"error", e.message}});
    out.messages.push_back("grid point " + std::to_string(e.index) + " (" +
                           ResultTable::format_number(e.grid_value) + "): " + e.message);
  }
  manifest["errors"] = errors;
  manifest["warnings"] = res.warnings;
  for (const auto& w : res.warnings) out.messages.push_back("warning: " + w);
  out.manifest_path = fs::path(c.output_directory) / "manifest.json";
  std::ofstream(out.manifest_path) << manifest.dump(2) << '\n';

  out.exit_code = res.ok() ? 0 : 3;
  return out;
}

}  // namespace gme
