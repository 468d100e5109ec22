#pragma once

// Commands behind the `nbreg` executable. Each returns the process exit code:
// 0 success, 1 input/usage error, 2 fit did not converge (result still
// written), 3 verification failed (report still written).

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "fisher.hpp"
#include "identity.hpp"
#include "mixture.hpp"
#include "report.hpp"
#include "verify.hpp"

namespace nbreg::cli {

enum class Command { FIT, SIMULATE, VERIFY, INFO };
enum class Format { JSON, TEXT, CSV };
enum class InfoSelection { OBSERVED, EXPECTED, BOTH };

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitVerifyFailed = 3;

struct RunConfig {
  Command command = Command::FIT;
  std::string input_path;
  std::string output_path;  // empty: stdout
  std::string response_column = "y";
  bool no_intercept = false;
  std::optional<std::uint64_t> seed;
  double eps_tail = kDefaultEpsTail;
  InfoSelection info = InfoSelection::OBSERVED;
  std::vector<double> beta;
  std::optional<double> theta;
  std::size_t n = 0;
  Format format = Format::JSON;
  double tol_first = IdentityTolerances{}.first;
  double tol_second = IdentityTolerances{}.second;
  double tol_sum = IdentityTolerances{}.sum;
  std::vector<GridPoint> grid;  // empty: default identity grid
  int max_iter = FitOptions{}.max_iter;
  int fd_instances = VerifyOptions{}.derivative_instances;
};

/// "y:param,y:param,..." e.g. "0:1,5:0.5".
inline std::vector<GridPoint> parse_grid(const std::string& spec) {
  std::vector<GridPoint> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw InputError("--grid: expected y:value pairs, got '" + item + "'");
    GridPoint g;
    Count y = 0;
    double v = 0.0;
    if (!detail::parse_count(detail::trim(std::string_view(item).substr(0, colon)), y) || y < 0)
      throw InputError("--grid: bad count in '" + item + "'");
    if (!detail::parse_double(detail::trim(std::string_view(item).substr(colon + 1)), v) || !(v > 0.0))
      throw InputError("--grid: bad positive parameter in '" + item + "'");
    g.y = y;
    g.param = v;
    out.push_back(g);
  }
  if (out.empty()) throw InputError("--grid: no points");
  return out;
}

namespace detail {

inline void emit(const RunConfig& cfg, const std::string& body) {
  if (cfg.output_path.empty()) {
    std::cout << body;
    std::cout.flush();
    return;
  }
  std::ofstream out(cfg.output_path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + cfg.output_path + "'");
  out << body;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline int cmd_fit(const RunConfig& cfg, std::ostream& log = std::cerr) {
  std::optional<Dataset> ds;
  FitResult res;
  try {
    ds.emplace(ingest_csv(cfg.input_path, cfg.response_column, cfg.no_intercept));
    log << "read " << ds->n() << " rows, " << ds->p() << " regressors from " << cfg.input_path << '\n';
    FitOptions opt;
    opt.max_iter = cfg.max_iter;
    opt.eps_tail = cfg.eps_tail;
    opt.info_kind = cfg.info == InfoSelection::EXPECTED ? InfoKind::EXPECTED : InfoKind::OBSERVED;
    res = fit(*ds, opt);
  } catch (const InputError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const CollinearityError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DomainError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }

  std::ostringstream body;
  switch (cfg.format) {
    case Format::JSON: body << detail::dump(to_json(res)); break;
    case Format::TEXT: write_text(body, res); break;
    case Format::CSV: write_csv(body, res); break;
  }
  detail::emit(cfg, body.str());
  if (!res.converged) {
    log << "warning: fit did not converge (gradient norm " << res.gradient_norm << ")\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& log = std::cerr) {
  if (!cfg.seed) {
    log << "error: simulate requires --seed\n";
    return kExitInput;
  }
  if (!cfg.theta || !(*cfg.theta > 0.0) || !std::isfinite(*cfg.theta)) {
    log << "error: simulate requires --theta > 0\n";
    return kExitInput;
  }
  if (cfg.beta.empty()) {
    log << "error: simulate requires --beta\n";
    return kExitInput;
  }
  if (cfg.n == 0) {
    log << "error: simulate requires --n >= 1\n";
    return kExitInput;
  }
  const auto p = static_cast<Eigen::Index>(cfg.beta.size());
  const Eigen::Index regressors = cfg.no_intercept ? p : p - 1;
  const auto n = static_cast<Eigen::Index>(cfg.n);

  // Stream 1: regressors, row by row. Stream 0: responses.
  Rng design_rng(*cfg.seed, 1);
  Eigen::MatrixXd Z(n, regressors);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < regressors; ++k) Z(i, k) = design_rng.normal();
  Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(cfg.beta.data(), p);
  Eigen::VectorXd eta = Z * (cfg.no_intercept ? beta : beta.tail(regressors).eval());
  if (!cfg.no_intercept) eta.array() += beta(0);
  std::vector<double> lambda(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(eta(i)) > kMaxLinearPredictor) {
      log << "error: linear predictor out of range at row " << i + 1 << '\n';
      return kExitInput;
    }
    lambda[static_cast<std::size_t>(i)] = std::exp(eta(i));
  }
  const std::vector<Count> y = sample_nb(lambda, *cfg.theta, *cfg.seed);

  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < regressors; ++k) names.push_back("x" + std::to_string(k + 1));
  std::ostringstream body;
  write_csv(body, y, Z, names, cfg.response_column);
  try {
    detail::emit(cfg, body.str());
  } catch (const InputError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

inline int cmd_verify(const RunConfig& cfg, std::ostream& log = std::cerr) {
  VerifyOptions opt;
  if (!cfg.grid.empty()) opt.identity_grid = cfg.grid;
  opt.identity_tol.first = cfg.tol_first;
  opt.identity_tol.second = cfg.tol_second;
  opt.identity_tol.sum = cfg.tol_sum;
  opt.eps_tail = cfg.eps_tail;
  opt.derivative_instances = cfg.fd_instances;
  if (cfg.seed) opt.seed = *cfg.seed;
  VerifyReport rep;
  try {
    rep = run_verification(opt);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  std::ostringstream body;
  if (cfg.format == Format::TEXT) write_text(body, rep);
  else body << detail::dump(to_json(rep));
  try {
    detail::emit(cfg, body.str());
  } catch (const InputError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  if (!rep.passed()) {
    log << "verification failed: an expected-HOLDS comparison missed its tolerance\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

inline int cmd_info(const RunConfig& cfg, std::ostream& log = std::cerr) {
  if (!cfg.theta) {
    log << "error: info requires --theta\n";
    return kExitInput;
  }
  std::ostringstream body;
  try {
    const Dataset ds = ingest_csv(cfg.input_path, cfg.response_column, cfg.no_intercept);
    if (cfg.beta.size() != ds.p())
      throw InputError("--beta has " + std::to_string(cfg.beta.size()) + " values, dataset has " +
                       std::to_string(ds.p()) + " regressors");
    const Params prm(Eigen::Map<const Eigen::VectorXd>(cfg.beta.data(), static_cast<Eigen::Index>(cfg.beta.size())),
                     *cfg.theta);
    std::vector<InfoMatrix> mats;
    if (cfg.info != InfoSelection::EXPECTED) mats.push_back(observed_info(ds, prm));
    if (cfg.info != InfoSelection::OBSERVED) mats.push_back(expected_info(ds, prm, cfg.eps_tail));
    if (cfg.format == Format::TEXT) {
      for (const auto& m : mats) write_text(body, m, ds.names());
    } else {
      json j;
      j["schema_version"] = kSchemaVersion;
      j["kind"] = "info";
      j["names"] = ds.names();
      j["beta"] = cfg.beta;
      j["theta"] = *cfg.theta;
      json arr = json::array();
      for (const auto& m : mats) arr.push_back(to_json(m));
      j["matrices"] = arr;
      body << detail::dump(j);
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  try {
    detail::emit(cfg, body.str());
  } catch (const InputError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

inline int run(const RunConfig& cfg, std::ostream& log = std::cerr) {
  switch (cfg.command) {
    case Command::FIT: return cmd_fit(cfg, log);
    case Command::SIMULATE: return cmd_simulate(cfg, log);
    case Command::VERIFY: return cmd_verify(cfg, log);
    case Command::INFO: return cmd_info(cfg, log);
  }
  return kExitInput;
}

}  // namespace nbreg::cli
