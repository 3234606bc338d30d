#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qparisi/kernel.hpp"
#include "qparisi/quantum.hpp"

namespace qparisi {

inline constexpr int kMaxGrayPathSpins = 24;

// beta*K with tanh(beta K) = exp(-2 beta b / M). std::nullopt marks the
// classical case b = 0, where K diverges and all slices lock together.
std::optional<double> trotter_coupling(double beta, double b, int m_slices);

// log C_{M,N} = (M N / 2) log(sinh(2 beta b / M) / 2); nullopt when b = 0.
std::optional<double> log_prefactor(double beta, double b, int m_slices, int n_spins);

struct TrotterConfig {
  int m_slices = 2;
  double beta = 1.0;
  double beta_k = 0.0;
  double log_prefactor = 0.0;
  bool classical = false;

  static TrotterConfig make(double beta, double b, int m_slices, int n_spins);
  double coupling() const { return beta_k / beta; }
};

class PathConfiguration {
 public:
  PathConfiguration(int m_slices, int n_spins);
  static PathConfiguration from_index(int m_slices, int n_spins, std::uint64_t index);

  int m_slices() const { return m_; }
  int n_spins() const { return n_; }
  // Trotter index is taken modulo M.
  int operator()(int l, int i) const { return spins_[static_cast<std::size_t>(wrap(l) * n_ + i)]; }
  void set(int l, int i, int value);
  void flip(int l, int i) { spins_[static_cast<std::size_t>(wrap(l) * n_ + i)] *= -1; }
  PathConfiguration flipped() const;

 private:
  int wrap(int l) const {
    const int r = l % m_;
    return r < 0 ? r + m_ : r;
  }
  int m_;
  int n_;
  std::vector<std::int8_t> spins_;
};

double path_energy(const PathConfiguration& config, const DisorderSample& sample, const ModelParams& params,
                   const TrotterConfig& trotter);

double effective_path_energy(const PathConfiguration& config, const DisorderSample& sample,
                             const ModelParams& params, const TrotterConfig& trotter, double t,
                             const SelfOverlapKernel& kernel);

double self_overlap(const PathConfiguration& a, const PathConfiguration& b, int l, int lp);

// log C_{M,N} + log sum_sigma exp(-beta H_{M,N}(sigma)). Gray-code enumeration
// for M*N <= 24; beyond that the identical sum is taken through the 2^N
// transfer matrix. b = 0 returns the classical log Z.
double enumerate_log_partition(const ModelParams& params, const DisorderSample& sample, int m_slices);
double gray_code_log_partition(const ModelParams& params, const DisorderSample& sample, int m_slices);
double transfer_matrix_log_partition(const ModelParams& params, const DisorderSample& sample, int m_slices);

// log sum_sigma exp(-beta H^eff(sigma; t, y)), prefactor excluded.
double effective_log_sum(const ModelParams& params, const DisorderSample& sample, const TrotterConfig& trotter,
                         double t, const SelfOverlapKernel& kernel);

struct IdentityCheck {
  double lhs = 0.0;
  double lhs_std_error = 0.0;
  double rhs = 0.0;
  double gap = 0.0;  // (lhs - rhs) / lhs_std_error
  std::size_t n_mc = 0;
};

// Annealing identity: E_1 sum_sigma exp(-beta H_{M,N}(sigma, g + i g1)) against
// exp(beta^2/4) sum_sigma exp(-beta H^eff(sigma)). imag_scale shrinks g1 (0 is the
// degenerate negative control).
IdentityCheck corrected_identity_check(const ModelParams& params, const DisorderSample& sample, int m_slices,
                                       std::size_t n_mc, const RngStream& stream, double imag_scale = 1.0);

struct ConvergenceRow {
  int n_spins = 0;
  int m_slices = 0;
  double beta = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::uint64_t seed = 0;
  double log_z_trotter = 0.0;
  double log_z_exact = 0.0;
  double abs_error = 0.0;
};

std::vector<ConvergenceRow> trotter_convergence(const ModelParams& params, const std::vector<int>& m_list,
                                                std::uint64_t seed);

}  // namespace qparisi
