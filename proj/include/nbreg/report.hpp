#pragma once

// JSON (canonical) and aligned-text renderings of fit results, information
// matrices and verification reports. Every JSON document carries
// schema_version; text tables print the same numbers to 12 significant digits.

#include <Eigen/Dense>
#include <cstdio>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "estimator.hpp"
#include "fisher.hpp"
#include "identity.hpp"
#include "verify.hpp"

namespace nbreg {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

namespace detail {

inline json to_json_vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

inline json to_json_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json_vector(m.row(i).transpose()));
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
  return m;
}

inline std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

inline const char* to_string(Expectation e) { return e == Expectation::HOLDS ? "HOLDS" : "FAILS"; }

// InfoMatrix ----------------------------------------------------------------

inline json to_json(const InfoMatrix& info) {
  json j;
  j["kind"] = to_string(info.kind);
  j["matrix"] = detail::to_json_matrix(info.m);
  if (info.convention) j["tail_convention"] = to_string(*info.convention);
  json tr = json::array();
  for (const auto& t : info.truncation)
    tr.push_back({{"observation", t.observation},
                  {"cutoff", t.cutoff},
                  {"tail_mass", t.tail_mass},
                  {"residual_bound", t.residual_bound},
                  {"sum_tail_ge_j", t.s_ge_j},
                  {"sum_tail_ge_j_plus_1", t.s_ge_j_plus_1},
                  {"double_sum", t.direct}});
  j["truncation"] = tr;
  return j;
}

inline InfoMatrix info_from_json(const json& j) {
  InfoMatrix info;
  info.kind = j.at("kind").get<std::string>() == "observed" ? InfoKind::OBSERVED : InfoKind::EXPECTED;
  info.m = detail::matrix_from_json(j.at("matrix"));
  if (j.contains("tail_convention"))
    info.convention = j["tail_convention"].get<std::string>() == to_string(TailConvention::GE_J)
                          ? TailConvention::GE_J
                          : TailConvention::GE_J_PLUS_1;
  for (const auto& t : j.at("truncation"))
    info.truncation.push_back({t.at("observation").get<std::size_t>(), t.at("cutoff").get<Count>(),
                               t.at("tail_mass").get<double>(), t.at("residual_bound").get<double>(),
                               t.at("sum_tail_ge_j").get<double>(), t.at("sum_tail_ge_j_plus_1").get<double>(),
                               t.at("double_sum").get<double>()});
  return info;
}

// FitResult -------------------------------------------------------------------

inline json to_json(const FitResult& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "fit";
  j["names"] = r.names;
  j["beta_hat"] = detail::to_json_vector(r.beta_hat);
  j["theta_hat"] = r.theta_hat;
  j["alpha_hat"] = 1.0 / r.theta_hat;
  json se;
  se["available"] = r.se.available;
  se["reason"] = r.se.reason;
  if (r.se.available) {
    se["values"] = detail::to_json_vector(r.se.values);
    json z = json::array();
    for (Eigen::Index k = 0; k < r.beta_hat.size(); ++k) z.push_back(r.beta_hat(k) / r.se.values(k));
    z.push_back(r.theta_hat / r.se.values(r.beta_hat.size()));
    se["z_ratios"] = z;
  } else {
    se["values"] = nullptr;
    se["z_ratios"] = nullptr;
  }
  j["standard_errors"] = se;
  j["loglik_at_mle"] = r.loglik_at_mle;
  j["loglik_trace"] = r.loglik_trace;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["boundary_theta"] = r.boundary_theta;
  j["gradient_norm"] = r.gradient_norm;
  j["failed_line_searches"] = r.failed_line_searches;
  j["used_profile"] = r.used_profile;
  j["info"] = to_json(r.info);
  return j;
}

inline FitResult fit_result_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != kSchemaVersion) throw InputError("fit result: unsupported schema_version");
  FitResult r;
  r.names = j.at("names").get<std::vector<std::string>>();
  r.beta_hat = detail::vector_from_json(j.at("beta_hat"));
  r.theta_hat = j.at("theta_hat").get<double>();
  const json& se = j.at("standard_errors");
  r.se.available = se.at("available").get<bool>();
  r.se.reason = se.at("reason").get<std::string>();
  if (r.se.available) r.se.values = detail::vector_from_json(se.at("values"));
  r.loglik_at_mle = j.at("loglik_at_mle").get<double>();
  r.loglik_trace = j.at("loglik_trace").get<std::vector<double>>();
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.boundary_theta = j.at("boundary_theta").get<bool>();
  r.gradient_norm = j.at("gradient_norm").get<double>();
  r.failed_line_searches = j.at("failed_line_searches").get<int>();
  r.used_profile = j.at("used_profile").get<bool>();
  r.info = info_from_json(j.at("info"));
  return r;
}

inline void write_text(std::ostream& out, const FitResult& r) {
  out << "NB2 regression fit (" << (r.converged ? "converged" : "NOT converged") << ", " << r.iterations
      << " iterations, information: " << to_string(r.info.kind) << ")\n";
  out << std::left << std::setw(16) << "parameter" << std::right << std::setw(22) << "estimate" << std::setw(22)
      << "std_error" << std::setw(22) << "z" << '\n';
  auto row = [&](const std::string& name, double est, Eigen::Index k) {
    out << std::left << std::setw(16) << name << std::right << std::setw(22) << detail::fmt12(est);
    if (r.se.available) {
      out << std::setw(22) << detail::fmt12(r.se.values(k)) << std::setw(22) << detail::fmt12(est / r.se.values(k));
    } else {
      out << std::setw(22) << "NA" << std::setw(22) << "NA";
    }
    out << '\n';
  };
  for (Eigen::Index k = 0; k < r.beta_hat.size(); ++k)
    row(static_cast<std::size_t>(k) < r.names.size() ? r.names[static_cast<std::size_t>(k)] : "b" + std::to_string(k),
        r.beta_hat(k), k);
  row("theta", r.theta_hat, r.beta_hat.size());
  out << "loglik " << detail::fmt12(r.loglik_at_mle) << "  gradient_norm " << detail::fmt12(r.gradient_norm)
      << "  boundary_theta " << (r.boundary_theta ? "true" : "false") << '\n';
  if (!r.se.available) out << "standard errors unavailable: " << r.se.reason << '\n';
}

inline void write_csv(std::ostream& out, const FitResult& r) {
  out << "parameter,estimate,std_error,z\n";
  auto row = [&](const std::string& name, double est, Eigen::Index k) {
    out << name << ',' << detail::fmt12(est) << ',';
    if (r.se.available) out << detail::fmt12(r.se.values(k)) << ',' << detail::fmt12(est / r.se.values(k));
    else out << "NA,NA";
    out << '\n';
  };
  for (Eigen::Index k = 0; k < r.beta_hat.size(); ++k) row(r.names[static_cast<std::size_t>(k)], r.beta_hat(k), k);
  row("theta", r.theta_hat, r.beta_hat.size());
}

inline void write_text(std::ostream& out, const InfoMatrix& info, const std::vector<std::string>& names) {
  out << to_string(info.kind) << " information matrix";
  if (info.convention) out << " (tail convention " << to_string(*info.convention) << ")";
  out << '\n';
  std::vector<std::string> labels = names;
  labels.push_back("theta");
  out << std::setw(16) << "";
  for (const auto& l : labels) out << std::setw(22) << l;
  out << '\n';
  for (Eigen::Index i = 0; i < info.m.rows(); ++i) {
    out << std::left << std::setw(16) << labels[static_cast<std::size_t>(i)] << std::right;
    for (Eigen::Index j = 0; j < info.m.cols(); ++j) out << std::setw(22) << detail::fmt12(info.m(i, j));
    out << '\n';
  }
  if (!info.truncation.empty()) {
    Count max_cut = 0;
    double max_bound = 0.0;
    for (const auto& t : info.truncation) {
      max_cut = std::max(max_cut, t.cutoff);
      max_bound = std::max(max_bound, t.residual_bound);
    }
    out << "tail truncation: max cutoff " << max_cut << ", max residual bound " << detail::fmt12(max_bound) << '\n';
  }
}

// Identity and verification reports ----------------------------------------

inline json to_json(const IdentityReport& rep) {
  json j;
  j["identity"] = to_string(rep.id);
  j["parameter"] = rep.parameter;
  j["expected_pairs_hold"] = rep.expected_pairs_hold();
  json verdicts = json::array();
  for (const auto& v : rep.verdicts)
    verdicts.push_back({{"pair", v.pair},
                        {"expected", to_string(v.expected)},
                        {"verdict", v.holds ? "HOLDS" : "FAILS"},
                        {"tolerance", v.tol},
                        {"max_residual", v.max_residual},
                        {"as_expected", v.as_expected()}});
  j["verdicts"] = verdicts;
  json pts = json::array();
  for (const auto& p : rep.points) {
    json pj{{"y", p.point.y}, {rep.parameter, p.point.param}, {"valid", p.valid}};
    if (!p.valid) pj["error"] = p.error;
    json vals = json::object(), res = json::object();
    for (const auto& v : p.values) vals[v.label] = v.value;
    for (const auto& r : p.residuals) res[r.label] = r.value;
    pj["values"] = vals;
    pj["residuals"] = res;
    pts.push_back(pj);
  }
  j["points"] = pts;
  return j;
}

inline json to_json(const Check& c) {
  return {{"section", c.section},       {"name", c.name},
          {"expected", to_string(c.expected)}, {"verdict", c.holds ? "HOLDS" : "FAILS"},
          {"tolerance", c.tol},         {"max_residual", c.max_residual},
          {"points", c.points},         {"as_expected", c.as_expected()},
          {"note", c.note}};
}

inline json to_json(const VerifyReport& rep) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "verify";
  j["passed"] = rep.passed();
  j["fisher_tail_convention"] = to_string(rep.fisher_convention);
  json ids = json::array();
  for (const auto& r : rep.identities.reports) ids.push_back(to_json(r));
  j["identities"] = ids;
  json checks = json::array();
  for (const auto& c : rep.checks) checks.push_back(to_json(c));
  j["checks"] = checks;
  return j;
}

inline void write_text(std::ostream& out, const VerifyReport& rep) {
  auto line = [&](const std::string& what, Expectation e, bool holds, double worst, double tol) {
    const bool ok = holds == (e == Expectation::HOLDS);
    out << (ok ? "  ok    " : "  MISS  ") << std::left << std::setw(52) << what << std::right << " expected "
        << to_string(e) << ", measured " << (holds ? "HOLDS" : "FAILS") << "  max " << detail::fmt12(worst)
        << "  tol " << detail::fmt12(tol) << '\n';
  };
  for (const auto& r : rep.identities.reports) {
    out << "identity " << to_string(r.id) << " (" << r.points.size() << " points)\n";
    for (const auto& v : r.verdicts) line(v.pair, v.expected, v.holds, v.max_residual, v.tol);
  }
  std::string section;
  for (const auto& c : rep.checks) {
    if (c.section != section) {
      section = c.section;
      out << section << '\n';
    }
    line(c.name, c.expected, c.holds, c.max_residual, c.tol);
  }
  out << "tail convention matching the double sum: " << to_string(rep.fisher_convention) << '\n';
  out << (rep.passed() ? "PASSED" : "FAILED") << '\n';
}

}  // namespace nbreg
