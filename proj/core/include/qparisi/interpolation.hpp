#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "qparisi/config_space.hpp"
#include "qparisi/kernel.hpp"
#include "qparisi/quantum.hpp"
#include "qparisi/rsb.hpp"
#include "qparisi/stochastics.hpp"
#include "qparisi/trotter.hpp"

namespace qparisi {

struct InterpPoint {
  double s = 1.0;
  double t = 1.0;
  void validate() const;
};

// n_p = m_p / 2 below level r, m_p from r on.
struct NSequence {
  int r = 1;
  std::vector<double> n;

  static NSequence make(const RsbParams& rsb, int r);
  void validate() const;
};

struct TiltParams {
  int r = 1;
  double u = 0.0;
  double lambda = 0.0;
  void validate() const;
};

// Real cavity fields z^p_i, p = 0..k-1, for one replica. Level k is annealed
// analytically and never sampled.
struct GaussianLevels {
  std::vector<std::vector<double>> z;

  static GaussianLevels draw(int k, int n_spins, const RngStream& stream);
  // Two replicas sharing levels p < r (level 0 is always shared).
  static std::pair<GaussianLevels, GaussianLevels> draw_pair(int k, int n_spins, int r, const RngStream& stream);
};

// Everything that fixes the interpolated model apart from (s, t) and the disorder.
struct InterpModel {
  ModelParams params;  // beta, b, c, N
  int m_slices = 2;
  RsbParams rsb;
  SelfOverlapKernel kernel;
  QuadratureSpec quad;

  static InterpModel make(const ModelParams& params, int m_slices, RsbParams rsb, SelfOverlapKernel kernel,
                          QuadratureSpec quad = {});
  void validate() const;
};

inline constexpr int kMaxLevelNodes = 4096;

// log of the interpolated path weight with both imaginary families integrated
// out, without the log C prefactor. At b = 0 non-uniform paths get -inf.
double interp_log_weight(const InterpPoint& point, const PathConfiguration& config, const DisorderSample& g,
                         const GaussianLevels& levels, const InterpModel& model);

// Shared per-(model, point) tables: structural path weights and the grouping of
// paths by their column sums (S_1..S_N), which is all the fields couple to.
class InterpLayout {
 public:
  InterpLayout(const InterpModel& model, const InterpPoint& point);

  const InterpModel& model() const { return model_; }
  const InterpPoint& point() const { return point_; }
  const PathSpace& space() const { return space_; }
  int n_classes() const { return n_classes_; }
  std::uint32_t class_of(std::uint64_t x) const { return class_of_[x]; }
  int class_sum(int c, int i) const { return class_sums_[static_cast<std::size_t>(c) * space_.n() + i]; }
  double pair_scale() const { return pair_scale_; }
  double level_amplitude(int p) const { return level_amp_[p]; }
  double field_base() const { return field_base_; }
  double log_prefactor() const { return log_prefactor_; }
  const std::vector<double>& structural() const { return structural_; }

  // path log weights for one disorder sample, cavity fields excluded
  std::vector<double> path_log_weights(const DisorderSample& g) const;

  struct LevelNodes {
    std::vector<double> log_w;
    std::vector<std::vector<double>> z;  // each of length dim
  };
  // Nodes for inner level p (1..k-1) in dim = N (shared) or 2N (independent replicas).
  const LevelNodes& level_nodes(int p, bool paired) const;

 private:
  InterpModel model_;
  InterpPoint point_;
  PathSpace space_;
  int n_classes_ = 0;
  std::vector<std::uint32_t> class_of_;
  std::vector<int> class_sums_;
  std::vector<double> structural_;
  double pair_scale_ = 0.0;
  std::vector<double> level_amp_;
  double field_base_ = 0.0;
  double log_prefactor_ = 0.0;
  std::vector<LevelNodes> single_nodes_;
  std::vector<LevelNodes> paired_nodes_;
};

// One disorder realisation (g, z^0) of the interpolated model: nested
// partition functions and modified expectations.
class InterpolationState {
 public:
  InterpolationState(std::shared_ptr<const InterpLayout> layout, const DisorderSample& g, std::span<const double> z0,
                     bool pair_moments = false);

  const InterpLayout& layout() const { return *layout_; }
  double log_z0() const;
  // class log weights log sum_{x in c} w(x)
  const std::vector<double>& class_log_weights() const { return class_logw_; }
  // modified class marginal after descending every inner level
  std::vector<double> marginal() const;
  // single-replica [<f>]_0 for a class observable
  double single_bracket(std::span<const double> f_by_class) const;
  // two-replica [<f>]_0^r, where f only enters through the common class marginal of
  // the replicas after the independent levels r..k have been averaged out
  double pair_bracket(int r, const std::function<double(std::span<const double>)>& pair_value) const;
  // (1/M^2) sum_{l,l'} [<(R^{12}_{l,l'} - q_r)^2>]_0^r with two-time replica overlaps
  double overlap_deviation(int r) const;
  // sum over the pair of classes of mu(c1) mu(c2) table[c1 * n_classes + c2]
  double pair_table_bracket(int r, std::span<const double> table) const;

 private:
  struct Descent {
    double log_z;
    std::vector<double> mu;
  };
  std::vector<double> field0() const;
  double leaf_log_z(std::span<const double> h) const;
  std::vector<double> posterior(std::span<const double> h) const;
  Descent descend(int level, const std::vector<double>& h) const;
  std::pair<double, double> shared(int level, const std::vector<double>& h, int r,
                                   const std::function<double(std::span<const double>)>& f) const;

  std::shared_ptr<const InterpLayout> layout_;
  std::vector<double> z0_;
  std::vector<double> class_logw_;
  std::vector<double> pair_means_;  // E[sum_l s_li s_lj | class], i<j packed
};

// (1/N) E log Z_{M,N,0}(s, t) over g and z^0.
MCEstimate phi_estimate(const InterpPoint& point, const InterpModel& model, std::size_t n_disorder,
                        std::uint64_t seed, int workers = 1);

struct GuerraResidual {
  double lhs = 0.0;  // phi(1, t)
  double lhs_std_error = 0.0;
  double rhs = 0.0;
  double parisi = 0.0;
  double remainder = 0.0;   // overlap-deviation term, >= 0
  double t_integral = 0.0;  // self-overlap term over [t, 1]
  double gap = 0.0;         // (lhs - rhs) / std_error of the per-sample difference
  double std_error = 0.0;
  std::size_t n = 0;
};

GuerraResidual guerra_identity_residual(double t, const InterpModel& model, std::size_t n_disorder,
                                        std::uint64_t seed, int workers = 1, int gl_nodes = 8);

double psi(double s, const RsbParams& rsb, const MixtureFunction& mix, const SingleSiteModel& site,
           const QuadratureSpec& quad);

// (1/M) sum_l (rho_l^{12} - q_r)^2 with same-time overlaps
double deviation_moment(const PathConfiguration& a, const PathConfiguration& b, double q_r);

struct TiltedResult {
  MCEstimate log_w;  // (1/N) E log W_0, -inf when the event never fires
  MCEstimate log_v;  // (1/N) E log V_0
  std::size_t w_zero_samples = 0;
};

TiltedResult tilted_partitions(double s, const TiltParams& tilt, const InterpModel& model, std::size_t n_disorder,
                               std::uint64_t seed, int workers = 1);

struct ConcentrationRow {
  int n_spins = 0;
  MCEstimate probability;
  bool zero_events = false;
};

struct ConcentrationScan {
  std::vector<ConcentrationRow> rows;
  double slope = 0.0;  // least-squares d log P / d N over rows with events
  bool slope_valid = false;
};

// [<I(D_r^2 >= u)>_{s,1}]_0^r for each N in sizes (model.params.n_spins is overridden).
ConcentrationScan concentration_scan(double u, int r, double s, const std::vector<int>& sizes,
                                     const InterpModel& model, std::size_t n_disorder, std::uint64_t seed,
                                     int workers = 1);

struct VarianceDiag {
  double intra = 0.0;
  double intra_std_error = 0.0;
  double inter = 0.0;
  double total = 0.0;
};

VarianceDiag selfoverlap_variance_diag(double t, const ModelParams& params, int m_slices,
                                       const SelfOverlapKernel& kernel, std::size_t n_disorder, std::uint64_t seed,
                                       int workers = 1);

}  // namespace qparisi
