#include "qparisi/stochastics.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <limits>
#include <memory>

namespace qparisi {

MCEstimate mc_estimate(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("mc_estimate needs at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = pairwise_sum(values) / n;
  KahanSum ss;
  for (double v : values) ss.add((v - mean) * (v - mean));
  const double var = ss.value() / (n - 1.0);
  return {mean, std::sqrt(var / n), values.size()};
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::vector<std::uint64_t> path)
    : seed_(seed), path_(std::move(path)) {
  std::uint64_t h = mix64(seed ^ 0x5157a1f0c0ffee00ULL);
  for (std::uint64_t label : path_) h = mix64(h ^ mix64(label + 0x632be59bd9b4e019ULL));
  key_ = h;
}

RngStream RngStream::child(std::uint64_t label) const {
  auto p = path_;
  p.push_back(label);
  return RngStream(seed_, std::move(p));
}

RngStream::Engine RngStream::engine() const {
  std::seed_seq seq{static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)};
  return Engine(seq);
}

std::vector<double> gaussian_samples(const RngStream& stream, std::size_t count) {
  auto eng = stream.engine();
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(count);
  for (auto& z : out) z = normal(eng);
  return out;
}

namespace {

struct FixedWorkspaceDeleter {
  void operator()(gsl_integration_fixed_workspace* w) const { gsl_integration_fixed_free(w); }
};

}  // namespace

QuadratureRule gauss_hermite(int n_nodes) {
  if (n_nodes < 2 || n_nodes > 128) throw std::invalid_argument("gauss_hermite: n_nodes out of [2,128]");
  // weight exp(-b (x-a)^2) with b = 1/2 is the unnormalised standard normal density
  std::unique_ptr<gsl_integration_fixed_workspace, FixedWorkspaceDeleter> ws(
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, static_cast<std::size_t>(n_nodes), 0.0,
                                  0.5, 0.0, 0.0));
  if (!ws) throw std::runtime_error("gauss_hermite: GSL allocation failed");
  QuadratureRule rule;
  const double* x = gsl_integration_fixed_nodes(ws.get());
  const double* w = gsl_integration_fixed_weights(ws.get());
  rule.nodes.assign(x, x + n_nodes);
  rule.weights.assign(w, w + n_nodes);
  const double total = pairwise_sum(rule.weights);
  for (auto& wi : rule.weights) wi /= total;
  // symmetrise to kill the last-ulp asymmetry in GSL's eigen-solve
  for (int i = 0, j = n_nodes - 1; i < j; ++i, --j) {
    const double xn = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double wn = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -xn;
    rule.nodes[j] = xn;
    rule.weights[i] = rule.weights[j] = wn;
  }
  if (n_nodes % 2 == 1) rule.nodes[n_nodes / 2] = 0.0;
  return rule;
}

QuadratureRule gauss_legendre_unit(int n_nodes) {
  if (n_nodes < 1) throw std::invalid_argument("gauss_legendre_unit: n_nodes < 1");
  std::unique_ptr<gsl_integration_fixed_workspace, FixedWorkspaceDeleter> ws(gsl_integration_fixed_alloc(
      gsl_integration_fixed_legendre, static_cast<std::size_t>(n_nodes), 0.0, 1.0, 0.0, 0.0));
  if (!ws) throw std::runtime_error("gauss_legendre_unit: GSL allocation failed");
  QuadratureRule rule;
  const double* x = gsl_integration_fixed_nodes(ws.get());
  const double* w = gsl_integration_fixed_weights(ws.get());
  rule.nodes.assign(x, x + n_nodes);
  rule.weights.assign(w, w + n_nodes);
  return rule;
}

void LogSumExp::add(double log_term) {
  if (std::isnan(log_term)) throw EstimatorFailure("LogSumExp: NaN term");
  if (log_term == -std::numeric_limits<double>::infinity()) return;
  if (log_term > max_) {
    if (!empty()) {
      const double rescale = std::exp(max_ - log_term);
      KahanSum s;
      s.add(scaled_.value() * rescale);
      scaled_ = s;
    }
    max_ = log_term;
  }
  scaled_.add(std::exp(log_term - max_));
}

double LogSumExp::value() const {
  if (empty()) return -std::numeric_limits<double>::infinity();
  return max_ + std::log(scaled_.value());
}

double log_sum_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  KahanSum s;
  for (double x : xs) s.add(std::exp(x - mx));
  return mx + std::log(s.value());
}

double log_sum_exp_weighted(std::span<const double> log_weights, std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) mx = std::max(mx, log_weights[i] + xs[i]);
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  KahanSum s;
  for (std::size_t i = 0; i < xs.size(); ++i) s.add(std::exp(log_weights[i] + xs[i] - mx));
  return mx + std::log(s.value());
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 16) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace qparisi
