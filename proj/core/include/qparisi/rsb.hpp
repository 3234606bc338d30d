#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qparisi/kernel.hpp"
#include "qparisi/stochastics.hpp"

namespace qparisi {

// 0 = m_0 < m_1 <= ... <= m_k = 1 and 0 = q_0 <= ... <= q_k <= 1, q_{k+1} = 0.
struct RsbParams {
  int k = 1;
  std::vector<double> m;  // m_0..m_k
  std::vector<double> q;  // q_0..q_{k+1}

  // q_levels holds q_1..q_k, m_levels holds m_1..m_{k-1} (m_k = 1 implied).
  static RsbParams make(std::vector<double> m_levels, std::vector<double> q_levels);
  static RsbParams replica_symmetric(double q1);
  void validate() const;
  // Copy of q_r inserted as a new level r+1; m_new in [m_{r-1}, m_r] becomes the
  // exponent of the zero-width level r.
  RsbParams with_duplicated_level(int r, double m_new) const;
};

struct MixtureFunction {
  int p = 2;

  explicit MixtureFunction(int order = 2);
  double xi(double q) const;
  double dxi(double q) const;
  double theta(double q) const { return q * dxi(q) - xi(q); }
};

struct QuadratureSpec {
  enum class Mode { GaussHermite, MonteCarlo };
  Mode mode = Mode::GaussHermite;
  int nodes = 24;
  int samples = 2000;
  std::uint64_t seed = 0;

  static QuadratureSpec for_depth(int k);
  void validate() const;
  // Rule used at a given recursion level (identical across calls).
  QuadratureRule level_rule(int level) const;
};

// Single-site Trotter path model feeding zeta. Pre-tabulates the field-free
// part of the 2^M path sum by total magnetisation.
class SingleSiteModel {
 public:
  SingleSiteModel(double beta, double b, double c, int m_slices, SelfOverlapKernel kernel);

  double beta() const { return beta_; }
  double b() const { return b_; }
  double c() const { return c_; }
  int m_slices() const { return m_; }
  bool classical() const { return classical_; }
  double beta_k() const { return beta_k_; }
  const SelfOverlapKernel& kernel() const { return kernel_; }
  double log_prefactor() const { return log_prefactor_; }

  // log zeta for total field h and xi'(q_k) (level-k integrated analytically)
  double log_zeta(double h, double dxi_top) const;

 private:
  double beta_, b_, c_;
  int m_;
  bool classical_ = false;
  double beta_k_ = 0.0;
  double log_prefactor_ = 0.0;
  SelfOverlapKernel kernel_;
  std::vector<int> magnetisation_;
  std::vector<double> log_weight_;
};

inline constexpr int kMaxSingleSiteSlices = 14;

double zeta_initial(std::span<const double> z_fields, const RsbParams& rsb, const MixtureFunction& mix,
                    const SingleSiteModel& site);
double log_zeta_initial(std::span<const double> z_fields, const RsbParams& rsb, const MixtureFunction& mix,
                        const SingleSiteModel& site);
double elog_zeta0(const RsbParams& rsb, const MixtureFunction& mix, const SingleSiteModel& site,
                  const QuadratureSpec& quad);
double parisi_functional(const RsbParams& rsb, const MixtureFunction& mix, const SingleSiteModel& site,
                         const QuadratureSpec& quad);

struct RsbOptimum {
  RsbParams params;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

RsbOptimum optimize_rsb(int k, const MixtureFunction& mix, const SingleSiteModel& site, const QuadratureSpec& quad,
                        int opt_budget = 600, std::uint64_t restart_seed = 0,
                        const std::optional<RsbParams>& warm_start = std::nullopt);

struct StationarityReport {
  std::vector<double> residuals;  // dP/dq_r, r = 1..k
  std::vector<bool> one_sided;
};

StationarityReport stationarity_residual(const RsbParams& rsb, const MixtureFunction& mix,
                                         const SingleSiteModel& site, const QuadratureSpec& quad,
                                         double step = 1e-4);

// Hopf-Lax layer.
using KernelObjective = std::function<double(const SelfOverlapKernel&)>;

struct KernelSup {
  double value = 0.0;
  SelfOverlapKernel argmax;
  int evaluations = 0;
  bool converged = false;
};

// Cyclic Brent line searches over the reduced profile coordinates in [lo, hi].
KernelSup maximise_over_kernels(int m_slices, const KernelObjective& objective, std::vector<double> start,
                                int max_sweeps = 12, double lo = 0.0, double hi = 1.0);

struct HopfLaxResult {
  double value = 0.0;
  SelfOverlapKernel x;
  RsbOptimum inner;
  int evaluations = 0;
  bool converged = false;
};

// sup_x [ -beta^2/(4M^2) sum x^2 + inf_{m,q} P_k(x) ]
HopfLaxResult hopf_lax_sup(int k, const MixtureFunction& mix, double beta, double b, double c, int m_slices,
                           const QuadratureSpec& quad, int opt_budget = 400, int max_sweeps = 8);

// sup_x [ beta^2/(4M^2 (t-1)) sum (x-y)^2 + phi(x) ]; t = 1 returns phi(y).
KernelSup hopf_lax_chi_generic(double t, const SelfOverlapKernel& y, double beta, const KernelObjective& phi,
                               int max_sweeps = 12);
double hopf_lax_chi(double t, const SelfOverlapKernel& y, int k, const MixtureFunction& mix, double beta, double b,
                    double c, const QuadratureSpec& quad, int opt_budget = 400);

struct PdeResidual {
  double residual = 0.0;
  double dchi_dt = 0.0;
  double grad_sq = 0.0;  // sum_{l,l'} (d chi / d y_{l,l'})^2
  bool converged = true;
};

PdeResidual hopf_lax_pde_residual(double t, const SelfOverlapKernel& y, double beta, const KernelObjective& phi,
                                  double step);

struct CovarianceRow {
  double rho = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
  double exact = 0.0;       // (1/N) E U(s1) U(s2)
  double xi = 0.0;          // rho^p / 2
  double correction = 0.0;  // exact - xi
  std::int64_t correction_numerator = 0;
  std::int64_t correction_denominator = 1;
};

// rho grid defaults to every overlap reachable at size N.
std::vector<CovarianceRow> pspin_covariance_check(int p, int n_spins, std::size_t n_samples, std::uint64_t seed,
                                                  std::vector<double> rhos = {}, int workers = 1);

}  // namespace qparisi
