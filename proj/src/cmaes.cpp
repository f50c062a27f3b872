#include "rigidgraph/cmaes.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <future>
#include <random>

namespace rigidgraph {

namespace {

VecX to_box(const VecX& z, const VecX& lower, const VecX& upper) {
  VecX x(z.size());
  for (int i = 0; i < z.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    x[i] = lower[i] + (upper[i] - lower[i]) * s;
  }
  return x;
}

double penalized(const std::function<double(const VecX&)>& objective, const VecX& x) {
  double f;
  try {
    f = objective(x);
  } catch (const std::exception&) {
    return 1e12;
  }
  return std::isfinite(f) ? f : 1e12;
}

}  // namespace

int cmaes_default_lambda(int n) { return 4 + static_cast<int>(std::floor(3.0 * std::log(n))); }

CmaesResult cmaes_minimize(const std::function<double(const VecX&)>& objective,
                           const VecX& lower, const VecX& upper, int budget,
                           unsigned long seed, int lambda) {
  const int n = static_cast<int>(lower.size());
  if (n < 1 || upper.size() != n) throw InvalidInput("cmaes_minimize: bad bounds");
  for (int i = 0; i < n; ++i) {
    if (!(lower[i] < upper[i])) throw InvalidInput("cmaes_minimize: lower must be < upper");
  }
  if (lambda <= 0) lambda = cmaes_default_lambda(n);
  if (budget < lambda) throw InvalidInput("cmaes_minimize: budget below population size");

  // Standard strategy parameters (rank-1 and rank-mu update, default rates).
  const int mu = lambda / 2;
  VecX weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();
  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                              ((n + 2.0) * (n + 2.0) + mu_eff));
  const double chi_n = std::sqrt(1.0 * n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  VecX mean = VecX::Zero(n);  // logit of the box center
  double sigma = 1.0;
  MatX cov = MatX::Identity(n, n);
  VecX p_sigma = VecX::Zero(n), p_c = VecX::Zero(n);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  CmaesResult result;
  result.x = to_box(mean, lower, upper);
  result.loss = penalized(objective, result.x);
  int evals = 1;

  while (evals + lambda <= budget) {
    Eigen::SelfAdjointEigenSolver<MatX> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalFailure("cmaes_minimize: eigensolve failed");
    const VecX eigvals = eig.eigenvalues().cwiseMax(1e-20);
    const MatX B = eig.eigenvectors();
    const VecX D = eigvals.cwiseSqrt();
    const MatX BD = B * D.asDiagonal();
    const MatX inv_sqrt_cov = B * D.cwiseInverse().asDiagonal() * B.transpose();

    std::vector<VecX> zs(lambda), ys(lambda);
    std::vector<double> fs(lambda);
    for (int k = 0; k < lambda; ++k) {
      VecX z(n);
      for (int i = 0; i < n; ++i) z[i] = gauss(rng);
      zs[k] = z;
      ys[k] = BD * z;
    }
    {
      std::vector<std::future<double>> futs(lambda);
      for (int k = 0; k < lambda; ++k) {
        futs[k] = std::async(std::launch::async, [&, k] {
          return penalized(objective, to_box(mean + sigma * ys[k], lower, upper));
        });
      }
      for (int k = 0; k < lambda; ++k) fs[k] = futs[k].get();
    }
    evals += lambda;

    std::vector<int> order(lambda);
    for (int k = 0; k < lambda; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    if (fs[order[0]] < result.loss) {
      result.loss = fs[order[0]];
      result.x = to_box(mean + sigma * ys[order[0]], lower, upper);
    }

    VecX y_w = VecX::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += weights[i] * ys[order[i]];
    mean += sigma * y_w;

    p_sigma = (1.0 - c_sigma) * p_sigma +
              std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * (inv_sqrt_cov * y_w);
    const int gen = static_cast<int>(result.history.size()) + 1;
    const double h_sigma_thresh =
        (1.4 + 2.0 / (n + 1.0)) * chi_n *
        std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * gen));
    const double h_sigma = p_sigma.norm() < h_sigma_thresh ? 1.0 : 0.0;
    p_c = (1.0 - c_c) * p_c + h_sigma * std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w;

    MatX rank_mu = MatX::Zero(n, n);
    for (int i = 0; i < mu; ++i) rank_mu += weights[i] * ys[order[i]] * ys[order[i]].transpose();
    cov = (1.0 - c_1 - c_mu) * cov +
          c_1 * (p_c * p_c.transpose() + (1.0 - h_sigma) * c_c * (2.0 - c_c) * cov) +
          c_mu * rank_mu;
    cov = 0.5 * (cov + cov.transpose());

    sigma *= std::exp((c_sigma / d_sigma) * (p_sigma.norm() / chi_n - 1.0));
    result.history.push_back(result.loss);
  }
  return result;
}

}  // namespace rigidgraph
