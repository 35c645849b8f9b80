#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "bpca/hyper.hpp"

namespace bpca {

// Matrices W (d x k), Z (n x k) and E (n x d) as drawn by the simulator;
// X = Z W' + E holds exactly for the paired DataMatrix.
struct GenerativeDraw {
  Eigen::MatrixXd w0;
  Eigen::MatrixXd z0;
  Eigen::MatrixXd e;
};

struct DataMatrix {
  Eigen::MatrixXd x;  // n x d

  struct Simulated {
    std::uint64_t seed = 0;
    Eigen::MatrixXd w0;
    bool zero_noise = false;
  };
  std::optional<Simulated> simulated;
  std::optional<std::string> loaded_path;

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }
};

enum class NoiseMode { standard, zero };

// Draws Z with standard-normal entries and E with variance 1/tau0, then
// forms X = Z w0' + E. Deterministic given (hyper, w0, seed).
// NoiseMode::zero forces E = 0 (the tau0 -> infinity limit, used in tests).
std::pair<DataMatrix, GenerativeDraw> sample_dataset(
    const Hyper& hyper, const Eigen::MatrixXd& w0, std::uint64_t seed,
    NoiseMode noise = NoiseMode::standard);

// Unnormalized log posterior of (W, Z) given X,
//   tau0 tr(W Z' X) - (tau0/2) tr(W Z' Z W') - (1/2) tr(W Lambda W')
//     - (1/2) tr(Z Z'),
// with the parameter-free additive constant dropped.
double log_posterior_unnorm(const Eigen::MatrixXd& w, const Eigen::MatrixXd& z,
                            const DataMatrix& data, const Hyper& hyper);

// Headerless CSV, one observation (row of X) per line, dimensions inferred
// on load. Values are written with 17 significant digits so that
// store/load round-trips bit-exactly.
void store_csv(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd load_csv(const std::string& path);

DataMatrix load_data_csv(const std::string& path);

// JSON sidecar {seed, w0, dims} from which the full draw can be regenerated.
void store_generative_sidecar(const DataMatrix& data, const Hyper& hyper,
                              const std::string& path);

}  // namespace bpca
