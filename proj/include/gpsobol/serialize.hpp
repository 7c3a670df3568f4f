#pragma once

#include <Eigen/Core>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "json.hpp"

#include "gpsobol/errors.hpp"
#include "gpsobol/kriging.hpp"
#include "gpsobol/kriging_sobol.hpp"
#include "gpsobol/multifidelity.hpp"

namespace gpsobol {

using json = nlohmann::json;

inline constexpr int kModelSchemaVersion = 1;

namespace detail {

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw input_error("expected array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = rows ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      throw input_error("ragged matrix rows");
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] =
      j[i].get<double>();
  return v;
}

}  // namespace detail

inline json to_json(const KrigingModel& model) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["type"] = "kriging";
  j["design"] = detail::to_json(model.design.points);
  j["z"] = detail::to_json(model.z);
  j["kernel"] = {{"family", to_string(model.kernel.family)},
                 {"length_scales", detail::to_json(
                      Eigen::VectorXd(model.kernel.length_scales))}};
  j["nugget"] = model.nugget;
  j["trend"] = to_string(model.trend.kind);
  j["beta"] = detail::to_json(model.beta);
  j["sigma2"] = model.sigma2;
  return j;
}

inline KrigingModel kriging_from_json(const json& j) {
  if (j.value("schema_version", 0) != kModelSchemaVersion)
    throw input_error("unsupported model schema version");
  if (j.value("type", "") != "kriging")
    throw input_error("expected a kriging model document");
  Design d{detail::matrix_from_json(j.at("design"))};
  Eigen::VectorXd z = detail::vector_from_json(j.at("z"));
  TrendBasis trend{trend_from_string(j.at("trend").get<std::string>())};
  FitOptions opt;
  opt.family = kernel_family_from_string(
      j.at("kernel").at("family").get<std::string>());
  opt.fixed_length_scales = detail::vector_from_json(
      j.at("kernel").at("length_scales"));
  opt.nugget = j.at("nugget").get<double>();
  KrigingModel model = fit(d, z, trend, opt);
  // beta / sigma2 are recomputed by the fit; document values are kept as
  // a consistency record, not trusted blindly.
  return model;
}

inline json to_json(const MultiFidelityModel& model) {
  json j = to_json(model.base);
  j["type"] = "multifidelity";
  json levels = json::array();
  for (const CokrigingLevel& lvl : model.upper) {
    json l;
    l["design"] = detail::to_json(lvl.design.points);
    l["z"] = detail::to_json(lvl.z);
    l["kernel"] = {{"family", to_string(lvl.kernel.family)},
                   {"length_scales", detail::to_json(
                        Eigen::VectorXd(lvl.kernel.length_scales))}};
    l["nugget"] = lvl.nugget;
    l["trend"] = to_string(lvl.trend.kind);
    l["coef"] = detail::to_json(lvl.coef);
    l["sigma2"] = lvl.sigma2;
    l["rho2hat"] = lvl.rho2hat;
    levels.push_back(std::move(l));
  }
  j["levels"] = std::move(levels);
  return j;
}

inline MultiFidelityModel multifidelity_from_json(const json& j) {
  if (j.value("schema_version", 0) != kModelSchemaVersion)
    throw input_error("unsupported model schema version");
  if (j.value("type", "") != "multifidelity")
    throw input_error("expected a multifidelity model document");

  std::vector<Design> designs{Design{detail::matrix_from_json(j.at("design"))}};
  std::vector<Eigen::VectorXd> obs{detail::vector_from_json(j.at("z"))};
  std::vector<TrendBasis> trends{
      TrendBasis{trend_from_string(j.at("trend").get<std::string>())}};
  FitOptions base_opt;
  base_opt.family = kernel_family_from_string(
      j.at("kernel").at("family").get<std::string>());
  base_opt.fixed_length_scales =
      detail::vector_from_json(j.at("kernel").at("length_scales"));
  base_opt.nugget = j.at("nugget").get<double>();
  std::vector<FitOptions> opts{base_opt};

  for (const json& l : j.at("levels")) {
    designs.push_back(Design{detail::matrix_from_json(l.at("design"))});
    obs.push_back(detail::vector_from_json(l.at("z")));
    trends.push_back(TrendBasis{trend_from_string(
        l.at("trend").get<std::string>())});
    FitOptions o;
    o.family = kernel_family_from_string(
        l.at("kernel").at("family").get<std::string>());
    o.fixed_length_scales = detail::vector_from_json(
        l.at("kernel").at("length_scales"));
    o.nugget = l.at("nugget").get<double>();
    opts.push_back(o);
  }
  return mf_fit(designs, obs, trends, opts);
}

// ---- CSV ----

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream oss;
  oss << std::setprecision(17) << v;
  return oss.str();
}

}  // namespace detail

inline void write_design_csv(std::ostream& os, const Eigen::MatrixXd& points) {
  for (int i = 0; i < points.rows(); ++i) {
    for (int j = 0; j < points.cols(); ++j) {
      if (j) os << ',';
      os << detail::fmt(points(i, j));
    }
    os << '\n';
  }
}

inline Eigen::MatrixXd read_design_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw input_error("ragged CSV rows");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return m;
}

inline void write_index_samples_csv(std::ostream& os,
                                    const IndexSampleMatrix& s) {
  os << "k,l,value\n";
  for (int k = 0; k < s.n_z(); ++k)
    for (int l = 0; l < s.b(); ++l)
      os << k << ',' << l << ',' << detail::fmt(s.values(k, l)) << '\n';
}

inline void write_budget_trace_csv(
    std::ostream& os,
    const std::vector<std::pair<int, UncertaintyBudget>>& trace) {
  os << "m,var_meta,var_mc,regime\n";
  for (const auto& [m, b] : trace)
    os << m << ',' << detail::fmt(b.var_metamodel) << ','
       << detail::fmt(b.var_mc) << ',' << to_string(b.regime) << '\n';
}

inline void write_paths_csv(std::ostream& os, const Eigen::MatrixXd& points,
                            const Eigen::MatrixXd& values) {
  for (int i = 0; i < points.rows(); ++i) {
    for (int j = 0; j < points.cols(); ++j) {
      if (j) os << ',';
      os << detail::fmt(points(i, j));
    }
    for (int k = 0; k < values.cols(); ++k)
      os << ',' << detail::fmt(values(i, k));
    os << '\n';
  }
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw input_error("cannot open for writing: " + path);
  os << content;
}

}  // namespace gpsobol
