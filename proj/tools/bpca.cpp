// bpca: simulate | fit | analyze-k1 | gcorr | stationary | verify
//
// Every command takes --config <json> and --out <dir> (default: the
// BPCA_OUT_ROOT environment variable, else "."). Outputs are deterministic
// given the config, so reruns overwrite byte-identical files.
//
// Exit codes: 0 success, 2 config/schema error, 3 numerical abort,
// 4 property-suite failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bpca/cavi.hpp"
#include "bpca/dataset.hpp"
#include "bpca/divergence.hpp"
#include "bpca/io.hpp"
#include "bpca/k1.hpp"
#include "bpca/spectral.hpp"
#include "bpca/stationary.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_keys(const json& config, const std::set<std::string>& required,
                  const std::set<std::string>& optional) {
  for (const auto& key : required)
    if (!config.contains(key))
      throw SchemaError("config missing required key \"" + key + "\"");
  for (const auto& [key, value] : config.items()) {
    if (!required.contains(key) && !optional.contains(key))
      throw SchemaError("config has unknown key \"" + key + "\"");
  }
}

int get_int(const json& config, const std::string& key) {
  if (!config.at(key).is_number_integer())
    throw SchemaError("config key \"" + key + "\" must be an integer");
  return config.at(key).get<int>();
}

double get_double(const json& config, const std::string& key) {
  if (!config.at(key).is_number())
    throw SchemaError("config key \"" + key + "\" must be a number");
  return config.at(key).get<double>();
}

bpca::Hyper hyper_from_config(const json& config, int n, int d) {
  const int k = get_int(config, "k");
  const double tau0 = get_double(config, "tau0");
  Eigen::VectorXd lam;
  if (config.contains("lambda_diag")) {
    const auto& jl = config.at("lambda_diag");
    if (!jl.is_array())
      throw SchemaError("lambda_diag must be an array of positive numbers");
    lam.resize(jl.size());
    for (size_t i = 0; i < jl.size(); ++i) lam(i) = jl[i].get<double>();
  } else {
    lam = Eigen::VectorXd::Ones(k);
  }
  try {
    return bpca::make_hyper(n, d, k, tau0, lam);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_simulate(const json& config, const fs::path& out) {
  require_keys(config, {"n", "d", "k", "tau0", "seed"},
               {"lambda_diag", "w0", "name"});
  const int n = get_int(config, "n");
  const int d = get_int(config, "d");
  const bpca::Hyper hyper = hyper_from_config(config, n, d);

  Eigen::MatrixXd w0 = Eigen::MatrixXd::Ones(hyper.d, hyper.k);
  if (config.contains("w0")) {
    if (config.at("w0").is_string()) {
      if (config.at("w0").get<std::string>() != "ones")
        throw SchemaError("w0 must be \"ones\" or a d x k matrix");
    } else {
      w0 = bpca::matrix_from_json(config.at("w0"));
    }
  }

  const auto seed = config.at("seed").get<std::uint64_t>();
  const auto [data, draw] = bpca::sample_dataset(hyper, w0, seed);
  bpca::store_csv(data.x, (out / "X.csv").string());
  bpca::store_generative_sidecar(data, hyper, (out / "generative.json").string());
  std::printf("simulate: wrote %dx%d X.csv (seed %llu)\n", hyper.n, hyper.d,
              static_cast<unsigned long long>(seed));
  return 0;
}

std::pair<bpca::DataMatrix, bpca::Hyper> load_data_and_hyper(
    const json& config) {
  const std::string path = config.at("data").get<std::string>();
  bpca::DataMatrix data = bpca::load_data_csv(path);
  return {data, hyper_from_config(config, data.n(), data.d())};
}

int cmd_fit(const json& config, const fs::path& out) {
  require_keys(config, {"data", "k", "tau0"},
               {"lambda_diag", "epsilon", "max_iters", "init", "name"});
  const auto [data, hyper] = load_data_and_hyper(config);
  bpca::CaviConfig cavi_config;
  try {
    cavi_config = bpca::cavi_config_from_json(config, hyper);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  const auto [state, trace] = bpca::run_cavi(data, hyper, cavi_config);

  bpca::write_trace_jsonl(trace, (out / "trace.jsonl").string());
  json final_state = bpca::to_json(state);
  final_state["status"] = trace.status == bpca::TraceLog::Status::converged
                              ? "converged"
                              : "max_iters";
  final_state["sweeps"] = trace.total_sweeps;
  final_state["mu_z_norm"] = state.q_z.mean.norm();
  bpca::write_json_file(final_state, (out / "final_state.json").string());
  std::printf("fit: %s after %ld sweeps, |mu_Z| = %s\n",
              final_state["status"].get<std::string>().c_str(),
              trace.total_sweeps, fmt17(state.q_z.mean.norm()).c_str());
  return 0;
}

int cmd_analyze_k1(const json& config, const fs::path& out) {
  require_keys(config, {"data", "tau0"},
               {"lambda_diag", "k", "epsilon", "max_iters", "init", "name"});
  json augmented = config;
  augmented["k"] = config.contains("k") ? config.at("k") : json(1);
  const auto [data, hyper] = load_data_and_hyper(augmented);
  if (hyper.k != 1) throw SchemaError("analyze-k1 requires k = 1");

  bpca::CaviConfig cavi_config;
  try {
    cavi_config = bpca::cavi_config_from_json(augmented, hyper);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  cavi_config.record_states = true;

  const bpca::SpectralDecomposition spectral = bpca::spectral_decompose(data);
  const auto [state, trace] = bpca::run_cavi(data, hyper, cavi_config);
  const bpca::RateBoundReport rate =
      bpca::direction_rate_report(spectral, cavi_config.mu_z0.col(0), hyper);

  // Direction-error series: observed errors against the rate bounds.
  {
    const Eigen::VectorXd target_z =
        rate.sign_i_star * spectral.eigvecs_left.col(rate.i_star);
    const Eigen::VectorXd target_w =
        rate.sign_i_star * spectral.eigvecs_right.col(rate.i_star);
    std::string csv = "t,observed_z,bound_z,observed_w,bound_w\n";
    for (long t = 1; t <= trace.total_sweeps; ++t) {
      const auto& snap = trace.states[t - 1];
      const double err_z =
          (snap.q_z.mean.col(0).normalized() - target_z).norm();
      const double err_w =
          (snap.q_w.mean.col(0).normalized() - target_w).norm();
      const auto [bound_z, bound_w] = bpca::direction_error_bound(rate, t);
      csv += std::to_string(t) + "," + fmt17(err_z) + "," + fmt17(bound_z) +
             "," + fmt17(err_w) + "," + fmt17(bound_w) + "\n";
    }
    bpca::write_text_file(csv, (out / "direction_error.csv").string());
  }

  // Fixed points from the data's top eigenvalue.
  const bpca::FixedPointReport fp =
      bpca::solve_fixed_points(spectral.eigvals(0), hyper);
  bpca::write_json_file(bpca::to_json(fp),
                        (out / "fixed_point.json").string());

  // Scaling-error series along the trace, when a verified fixed
  // point exists.
  if (!fp.candidates.empty()) {
    const auto& cand = fp.candidates.front();
    std::string csv = "t,abs_err_a,abs_err_b\n";
    for (const auto& entry : trace.entries) {
      csv += std::to_string(entry.t) + "," +
             fmt17(std::abs(entry.mu_z_norm - cand.a)) + "," +
             fmt17(std::abs(entry.sigma_z_fro - cand.b)) + "\n";
    }
    bpca::write_text_file(csv, (out / "scaling_error.csv").string());
  }
  std::printf("analyze-k1: %ld sweeps, lambda1 = %s, %zu fixed-point "
              "candidate(s)\n",
              trace.total_sweeps, fmt17(spectral.eigvals(0)).c_str(),
              fp.candidates.size());
  return 0;
}

bpca::VariationalState state_for_analysis(const json& config,
                                          const bpca::DataMatrix& data,
                                          const bpca::Hyper& hyper) {
  if (config.contains("state")) {
    const bpca::VariationalState state = bpca::state_from_json(
        bpca::read_json_file(config.at("state").get<std::string>()));
    if (state.q_w.rows() != hyper.d || state.q_z.rows() != hyper.n ||
        state.k() != hyper.k)
      throw SchemaError("state file dimensions do not match data/config");
    return state;
  }
  bpca::CaviConfig cavi_config = bpca::cavi_config_from_json(config, hyper);
  return bpca::run_cavi(data, hyper, cavi_config).first;
}

int cmd_gcorr(const json& config, const fs::path& out) {
  require_keys(config, {"data", "k", "tau0"},
               {"lambda_diag", "state", "refine", "newton_tol", "epsilon",
                "max_iters", "init", "name"});
  const auto [data, hyper] = load_data_and_hyper(config);
  bpca::VariationalState state = state_for_analysis(config, data, hyper);
  if (!config.contains("refine") || config.at("refine").get<bool>()) {
    const double tol = config.contains("newton_tol")
                           ? get_double(config, "newton_tol")
                           : 1e-12;
    state = bpca::newton_refine(state, data, hyper, tol).state;
  }
  const bpca::GCorrReport report = bpca::gcorr_condition(state, data, hyper);
  bpca::write_json_file(bpca::to_json(report), (out / "gcorr.json").string());
  std::printf("gcorr: max term #%d = %s (%s)\n", report.max_index + 1,
              fmt17(report.max_value).c_str(),
              report.satisfied ? "condition holds" : "condition fails");
  return 0;
}

int cmd_stationary(const json& config, const fs::path& out) {
  require_keys(config, {"data", "k", "tau0"},
               {"lambda_diag", "state", "newton_tol", "epsilon", "max_iters",
                "init", "name"});
  const auto [data, hyper] = load_data_and_hyper(config);
  const bpca::VariationalState start = state_for_analysis(config, data, hyper);
  const double tol = config.contains("newton_tol")
                         ? get_double(config, "newton_tol")
                         : 1e-12;
  const bpca::NewtonResult result =
      bpca::newton_refine(start, data, hyper, tol);

  bpca::write_json_file(bpca::to_json(result.report),
                        (out / "hessian.json").string());
  std::string csv = "index,eigenvalue\n";
  for (int i = 0; i < result.report.eigvals.size(); ++i)
    csv += std::to_string(i) + "," + fmt17(result.report.eigvals(i)) + "\n";
  bpca::write_text_file(csv, (out / "eigvals.csv").string());
  bpca::write_json_file(bpca::to_json(result.state),
                        (out / "refined_state.json").string());
  std::printf("stationary: grad %.3e, min|eig|/max|eig| = %.3e (%s)\n",
              result.report.grad_norm_at_point,
              result.report.min_abs_over_max_abs,
              result.report.singular_flag ? "singular" : "non-singular");
  return 0;
}

int cmd_verify(const json& config, const fs::path& out) {
  require_keys(config, {"trials", "seed"}, {"dim", "name"});
  const long trials = config.at("trials").get<long>();
  const int dim = config.contains("dim") ? get_int(config, "dim") : 3;
  const auto seed = config.at("seed").get<std::uint64_t>();

  const bpca::AuxInequalityReport report =
      bpca::check_aux_inequalities(trials, dim, seed);
  bpca::write_json_file(bpca::to_json(report), (out / "verify.json").string());
  for (const auto& suite : report.suites)
    std::printf("verify: %-22s %ld/%ld\n", suite.name.c_str(), suite.passes,
                suite.trials);
  return report.all_ok() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAVI for Bayesian probabilistic PCA with convergence "
               "diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  const char* env_root = std::getenv("BPCA_OUT_ROOT");

  auto add = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory");
    return sub;
  };
  add("simulate", "draw a dataset from the generative model");
  add("fit", "run CAVI and log the trace");
  add("analyze-k1", "power-iteration bounds and fixed-point analysis (k=1)");
  add("gcorr", "evaluate the generalized-correlation condition");
  add("stationary", "Newton refinement and Hessian spectrum");
  add("verify", "randomized verification of the inequality toolkit");

  CLI11_PARSE(app, argc, argv);

  try {
    const json config = bpca::read_json_file(config_path);
    fs::path out = out_dir.empty()
                       ? fs::path(env_root ? env_root : ".")
                       : fs::path(out_dir);
    fs::create_directories(out);

    if (app.got_subcommand("simulate")) return cmd_simulate(config, out);
    if (app.got_subcommand("fit")) return cmd_fit(config, out);
    if (app.got_subcommand("analyze-k1")) return cmd_analyze_k1(config, out);
    if (app.got_subcommand("gcorr")) return cmd_gcorr(config, out);
    if (app.got_subcommand("stationary")) return cmd_stationary(config, out);
    if (app.got_subcommand("verify")) return cmd_verify(config, out);
    return 2;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  }
}
