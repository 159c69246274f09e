#pragma once

#include "jointmix/simulation.hpp"
#include "jointmix/types.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

namespace test_support {

using namespace jointmix;

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("jointmix_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline SimulatedData simulate(int n, std::uint64_t seed, int groups = 2) {
  SimDesign d = default_design();
  d.n = n;
  d.seed = seed;
  if (groups == 1) {
    d.groups = 1;
    d.truth.theta = Eigen::VectorXd::Zero(1);
    d.truth.pi = Eigen::VectorXd::Ones(1);
    d.truth.survival.delta0 = 0.0;
  }
  return generate_dataset(d);
}

// Random parameters of the given shape with strictly increasing phi.
inline ModelParams random_params(int groups, int levels, int items, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  ModelParams p;
  p.theta.resize(groups);
  p.theta[0] = 0.0;
  for (int r = 1; r < groups; ++r) p.theta[r] = p.theta[r - 1] + u(rng);
  p.pi = Eigen::VectorXd::Constant(groups, 1.0 / groups);
  p.ordinal.a.resize(levels);
  p.ordinal.phi.resize(levels);
  p.ordinal.b.resize(items);
  p.ordinal.a[0] = 0.0;
  p.ordinal.phi[0] = 0.0;
  for (int l = 1; l < levels; ++l) {
    p.ordinal.a[l] = 0.5 * z(rng);
    p.ordinal.phi[l] = p.ordinal.phi[l - 1] + u(rng);
  }
  p.ordinal.phi /= p.ordinal.phi[levels - 1];
  p.ordinal.b[0] = 0.0;
  for (int j = 1; j < items; ++j) p.ordinal.b[j] = 0.5 * z(rng);
  p.survival = {groups > 1 ? 0.5 * z(rng) : 0.0, 0.5 * z(rng)};
  return p;
}

// Random responsibilities with rows on the simplex.
inline Posterior random_posterior(std::size_t n, int groups, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Posterior post;
  post.gamma.resize(static_cast<Eigen::Index>(n), groups);
  for (Eigen::Index i = 0; i < post.gamma.rows(); ++i) {
    for (int r = 0; r < groups; ++r) post.gamma(i, r) = g(rng) + 1e-3;
    post.gamma.row(i) /= post.gamma.row(i).sum();
  }
  return post;
}

// Central differences of f at x with step h * max(1, |x_k|).
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double step = h * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd hi = x;
    Eigen::VectorXd lo = x;
    hi[k] += step;
    lo[k] -= step;
    g[k] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

}  // namespace test_support
