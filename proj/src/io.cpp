#include "bpca/io.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bpca {

using nlohmann::json;

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::invalid_argument("matrix_from_json: expected array of rows");
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols)
      throw std::invalid_argument("matrix_from_json: ragged rows");
    for (size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json to_json(const VariationalState& state) {
  return json{{"mu_w", to_json(state.q_w.mean)},
              {"sigma_w", to_json(state.q_w.row_cov)},
              {"mu_z", to_json(state.q_z.mean)},
              {"sigma_z", to_json(state.q_z.row_cov)}};
}

VariationalState state_from_json(const json& j) {
  VariationalState state;
  state.q_w.mean = matrix_from_json(j.at("mu_w"));
  state.q_w.row_cov = matrix_from_json(j.at("sigma_w"));
  state.q_z.mean = matrix_from_json(j.at("mu_z"));
  state.q_z.row_cov = matrix_from_json(j.at("sigma_z"));
  state.validate();
  return state;
}

json to_json(const FixedPointReport& report) {
  json candidates = json::array();
  for (const auto& c : report.candidates) {
    candidates.push_back(json{{"a", c.a},
                              {"b", c.b},
                              {"verified", c.verified},
                              {"jacobian_eig_mags",
                               {c.jacobian_eig_mags[0], c.jacobian_eig_mags[1]}},
                              {"elbo", c.elbo}});
  }
  json j{{"poly_coeffs",
          {report.poly_coeffs[0], report.poly_coeffs[1], report.poly_coeffs[2]}},
         {"positive_roots_u", report.positive_roots_u},
         {"candidates", std::move(candidates)},
         {"status", report.status}};
  if (report.alpha_beta) {
    j["alpha_beta"] = {report.alpha_beta->first, report.alpha_beta->second};
  } else if (report.alpha_beta_complex) {
    j["alpha_beta"] = "complex";
  }
  return j;
}

json to_json(const GCorrReport& report) {
  return json{{"terms",
               {report.terms[0], report.terms[1], report.terms[2],
                report.terms[3]}},
              {"gamma0", report.gamma0},
              {"max_index", report.max_index},
              {"max_value", report.max_value},
              {"satisfied", report.satisfied},
              {"r0_note", report.r0_note}};
}

json to_json(const HessianReport& report) {
  std::vector<double> eigs(report.eigvals.data(),
                           report.eigvals.data() + report.eigvals.size());
  return json{{"eigvals", eigs},
              {"min_abs_over_max_abs", report.min_abs_over_max_abs},
              {"singular_flag", report.singular_flag},
              {"grad_norm_at_point", report.grad_norm_at_point}};
}

json to_json(const AuxInequalityReport& report) {
  json suites = json::array();
  for (const auto& s : report.suites) {
    suites.push_back(json{{"name", s.name},
                          {"trials", s.trials},
                          {"passes", s.passes},
                          {"failures", s.failures}});
  }
  return json{{"suites", std::move(suites)}, {"all_ok", report.all_ok()}};
}

void write_trace_jsonl(const TraceLog& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& e : trace.entries) {
    json j{{"t", e.t},
           {"elbo", e.elbo},
           {"delta_rel", e.delta_rel},
           {"mu_z_norm", e.mu_z_norm},
           {"mu_w_norm", e.mu_w_norm}};
    out << j.dump() << '\n';
  }
}

CaviConfig cavi_config_from_json(const json& j, const Hyper& hyper) {
  CaviConfig config = default_cavi_config(hyper);
  if (j.contains("epsilon")) config.epsilon = j.at("epsilon").get<double>();
  if (j.contains("max_iters"))
    config.max_iters = j.at("max_iters").get<long>();
  if (j.contains("init")) {
    const json& init = j.at("init");
    if (init.contains("mu_z")) {
      const json& mz = init.at("mu_z");
      if (mz.is_string()) {
        const std::string init_string = mz.get<std::string>();
        if (init_string.rfind("random(", 0) == 0 && init_string.back() == ')') {
          const std::uint64_t seed =
              std::stoull(init_string.substr(7, init_string.size() - 8));
          Rng rng(seed);
          config.mu_z0 = rng.gaussian_matrix(hyper.n, hyper.k);
        } else {
          throw std::invalid_argument(
              "init.mu_z string must be \"random(<seed>)\"");
        }
      } else if (mz.is_number()) {
        config.mu_z0 =
            Eigen::MatrixXd::Constant(hyper.n, hyper.k, mz.get<double>());
      } else {
        config.mu_z0 = matrix_from_json(mz);
      }
    }
    if (init.contains("sigma_z")) {
      const json& sz = init.at("sigma_z");
      if (sz.is_string()) {
        if (sz.get<std::string>() != "identity")
          throw std::invalid_argument(
              "init.sigma_z string must be \"identity\"");
        config.sigma_z0 = Eigen::MatrixXd::Identity(hyper.k, hyper.k);
      } else if (sz.is_number()) {
        config.sigma_z0 = sz.get<double>() *
                          Eigen::MatrixXd::Identity(hyper.k, hyper.k);
      } else {
        config.sigma_z0 = matrix_from_json(sz);
      }
    }
  }
  config.validate(hyper);
  return config;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  in >> j;
  return j;
}

void write_text_file(const std::string& text, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace bpca
