#include "bpca/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "bpca/rng.hpp"

namespace bpca {

std::pair<DataMatrix, GenerativeDraw> sample_dataset(const Hyper& hyper,
                                                     const Eigen::MatrixXd& w0,
                                                     std::uint64_t seed,
                                                     NoiseMode noise) {
  hyper.validate();
  if (w0.rows() != hyper.d || w0.cols() != hyper.k)
    throw std::invalid_argument("sample_dataset: w0 must be d x k");
  if (!w0.allFinite())
    throw std::invalid_argument("sample_dataset: w0 has non-finite entries");

  Rng rng(seed);
  GenerativeDraw draw;
  draw.w0 = w0;
  draw.z0 = rng.gaussian_matrix(hyper.n, hyper.k);
  if (noise == NoiseMode::zero) {
    draw.e = Eigen::MatrixXd::Zero(hyper.n, hyper.d);
  } else {
    draw.e = rng.gaussian_matrix(hyper.n, hyper.d) / std::sqrt(hyper.tau0);
  }

  DataMatrix data;
  data.x = draw.z0 * draw.w0.transpose() + draw.e;
  data.simulated =
      DataMatrix::Simulated{seed, w0, noise == NoiseMode::zero};
  return {std::move(data), std::move(draw)};
}

double log_posterior_unnorm(const Eigen::MatrixXd& w, const Eigen::MatrixXd& z,
                            const DataMatrix& data, const Hyper& hyper) {
  if (w.rows() != hyper.d || w.cols() != hyper.k || z.rows() != hyper.n ||
      z.cols() != hyper.k || data.x.rows() != hyper.n ||
      data.x.cols() != hyper.d)
    throw std::invalid_argument("log_posterior_unnorm: dimension mismatch");

  const double tau0 = hyper.tau0;
  const Eigen::MatrixXd ztz = z.transpose() * z;  // k x k
  const double data_term = (w * (z.transpose() * data.x)).trace();
  const double quad_term = (w * ztz * w.transpose()).trace();
  const double prior_w =
      (w * hyper.lambda_diag.asDiagonal() * w.transpose()).trace();
  const double prior_z = z.squaredNorm();
  return tau0 * data_term - 0.5 * tau0 * quad_term - 0.5 * prior_w -
         0.5 * prior_z;
}

void store_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
      if (j + 1 < m.cols()) out << ',';
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Eigen::MatrixXd load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      // strtod instead of stod: subnormal magnitudes are valid cells.
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw std::runtime_error("bad CSV cell '" + cell + "' in " + path);
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty CSV: " + path);
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows.front().size(); ++j) m(i, j) = rows[i][j];
  return m;
}

DataMatrix load_data_csv(const std::string& path) {
  DataMatrix data;
  data.x = load_csv(path);
  data.loaded_path = path;
  return data;
}

void store_generative_sidecar(const DataMatrix& data, const Hyper& hyper,
                              const std::string& path) {
  if (!data.simulated)
    throw std::invalid_argument("sidecar requires a simulated DataMatrix");
  nlohmann::json j;
  j["seed"] = data.simulated->seed;
  j["zero_noise"] = data.simulated->zero_noise;
  j["dims"] = {{"n", hyper.n}, {"d", hyper.d}, {"k", hyper.k}};
  j["tau0"] = hyper.tau0;
  std::vector<std::vector<double>> w0(hyper.d, std::vector<double>(hyper.k));
  for (int i = 0; i < hyper.d; ++i)
    for (int c = 0; c < hyper.k; ++c) w0[i][c] = data.simulated->w0(i, c);
  j["w0"] = w0;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace bpca
