#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qparisi/quantum.hpp"
#include "qparisi/rsb.hpp"

namespace qparisi {

namespace {

std::int64_t ipow(std::int64_t base, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

std::int64_t factorial(int n) {
  std::int64_t r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// elementary symmetric polynomial of degree p in n_plus (+1)'s and n_minus (-1)'s
std::int64_t elementary_symmetric(int p, int n_plus, int n_minus) {
  std::int64_t acc = 0;
  for (int j = 0; j <= std::min(p, n_minus); ++j) {
    if (p - j > n_plus) continue;
    const auto term = static_cast<std::int64_t>(binomial(n_minus, j) * binomial(n_plus, p - j));
    acc += (j % 2 == 0) ? term : -term;
  }
  return acc;
}

}  // namespace

std::vector<CovarianceRow> pspin_covariance_check(int p, int n_spins, std::size_t n_samples, std::uint64_t seed,
                                                  std::vector<double> rhos, int workers) {
  if (p < 2 || p % 2 != 0) throw std::invalid_argument("pspin_covariance_check: p must be even and >= 2");
  if (n_spins < p || n_spins > 16) throw std::invalid_argument("pspin_covariance_check: need p <= N <= 16");
  if (n_samples < 2) throw std::invalid_argument("pspin_covariance_check: need at least 2 samples");

  // overlap rho = (N - 2d)/N, realised by flipping the first d spins of the all-up state
  std::vector<int> flips;
  if (rhos.empty()) {
    for (int d = 0; d <= n_spins; ++d) flips.push_back(d);
  } else {
    for (double rho : rhos) {
      const double d = 0.5 * n_spins * (1.0 - rho);
      const double dr = std::round(d);
      if (std::abs(d - dr) > 1e-9 || dr < 0 || dr > n_spins)
        throw std::invalid_argument("pspin_covariance_check: overlap not reachable at this N");
      flips.push_back(static_cast<int>(dr));
    }
  }

  const auto tuples = index_tuples(n_spins, p);
  const double scale = static_cast<double>(factorial(p)) / (2.0 * std::pow(static_cast<double>(n_spins), p));
  std::vector<std::vector<double>> per_sample(flips.size(), std::vector<double>(n_samples));
  const RngStream root(seed);
  parallel_for(n_samples, workers, [&](std::size_t s) {
    const auto g = gaussian_samples(root.child(s), tuples.size());
    const double u_up = std::accumulate(g.begin(), g.end(), 0.0);
    for (std::size_t a = 0; a < flips.size(); ++a) {
      const int d = flips[a];
      double u_flip = 0.0;
      for (std::size_t t = 0; t < tuples.size(); ++t) {
        int flipped = 0;
        for (int i : tuples[t]) flipped += i < d ? 1 : 0;
        u_flip += (flipped % 2 == 0) ? g[t] : -g[t];
      }
      per_sample[a][s] = scale * u_up * u_flip;
    }
  });

  std::vector<CovarianceRow> rows;
  const std::int64_t denom = 2 * ipow(n_spins, p);
  for (std::size_t a = 0; a < flips.size(); ++a) {
    const int d = flips[a];
    const int n_plus = n_spins - d;
    CovarianceRow row;
    row.rho = static_cast<double>(n_spins - 2 * d) / n_spins;
    const auto est = mc_estimate(per_sample[a]);
    row.empirical = est.mean;
    row.std_error = est.std_error;
    const std::int64_t exact_num = factorial(p) * elementary_symmetric(p, n_plus, d);
    row.exact = static_cast<double>(exact_num) / static_cast<double>(denom);
    row.xi = 0.5 * std::pow(row.rho, p);
    row.correction_numerator = exact_num - ipow(n_plus - d, p);
    row.correction_denominator = denom;
    const std::int64_t gcd = std::gcd(row.correction_numerator, row.correction_denominator);
    if (gcd > 1) {
      row.correction_numerator /= gcd;
      row.correction_denominator /= gcd;
    }
    row.correction = static_cast<double>(row.correction_numerator) / static_cast<double>(row.correction_denominator);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qparisi
