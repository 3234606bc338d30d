#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace qparisi {

// Thrown when an estimator detects a condition it must not silently ignore
// (non-positive averages, vanished denominators, non-finite logs).
class EstimatorFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

MCEstimate mc_estimate(std::span<const double> values);

// Deterministic stream identified by a root seed and a path of labels.
// Children are derived by hashing, so sample i of a loop gets the same
// numbers no matter which worker evaluates it.
class RngStream {
 public:
  using Engine = std::mt19937_64;

  explicit RngStream(std::uint64_t seed, std::vector<std::uint64_t> path = {});

  RngStream child(std::uint64_t label) const;
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }
  std::uint64_t key() const { return key_; }
  Engine engine() const;

 private:
  std::uint64_t seed_;
  std::vector<std::uint64_t> path_;
  std::uint64_t key_;
};

std::uint64_t mix64(std::uint64_t x);

std::vector<double> gaussian_samples(const RngStream& stream, std::size_t count);

// Standard-normal expectations: E f(z) ~ sum_j weights[j] f(nodes[j]).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

QuadratureRule gauss_hermite(int n_nodes);
QuadratureRule gauss_legendre_unit(int n_nodes);  // on [0,1]

class KahanSum {
 public:
  void add(double x) {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Streaming log(sum exp(x_i)) with a running shift and compensated sum.
class LogSumExp {
 public:
  void add(double log_term);
  double value() const;
  bool empty() const { return max_ == -std::numeric_limits<double>::infinity(); }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  KahanSum scaled_;
};

double log_sum_exp(std::span<const double> xs);
double log_sum_exp_weighted(std::span<const double> log_weights, std::span<const double> xs);

double pairwise_sum(std::span<const double> xs);

// Runs body(i) for i in [0, n). Each index owns its output slot, so results
// never depend on the worker count.
template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  const std::size_t w = workers <= 1 ? 1 : static_cast<std::size_t>(workers);
  if (w == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace qparisi
