#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "bpca/cavi.hpp"
#include "bpca/divergence.hpp"
#include "bpca/k1.hpp"
#include "bpca/stationary.hpp"

namespace bpca {

// JSON shapes for the reports the CLI emits. Matrices are nested arrays of
// rows; every number round-trips exactly through nlohmann's writer.

nlohmann::json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const VariationalState& state);
VariationalState state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FixedPointReport& report);
nlohmann::json to_json(const GCorrReport& report);
nlohmann::json to_json(const HessianReport& report);
nlohmann::json to_json(const AuxInequalityReport& report);

// One JSONL record per sweep:
// {"t":..,"elbo":..,"delta_rel":..,"mu_z_norm":..,"mu_w_norm":..}
void write_trace_jsonl(const TraceLog& trace, const std::string& path);

// CaviConfig from {"epsilon":..,"max_iters":..,
//   "init":{"mu_z":"value"|"random(seed)","sigma_z":"identity"|"value", ...}}.
CaviConfig cavi_config_from_json(const nlohmann::json& j, const Hyper& hyper);

void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& text, const std::string& path);

}  // namespace bpca
