#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qparisi/kernel.hpp"
#include "qparisi/quantum.hpp"

namespace qparisi {

inline constexpr int kMaxStoredPathSpins = 20;

// All spin fields on M Trotter slices x N sites. Configuration x stores
// sigma_{l,i} in bit l*N + i (set bit = spin down).
class PathSpace {
 public:
  PathSpace(int m_slices, int n_spins);

  int m() const { return m_; }
  int n() const { return n_; }
  std::uint64_t size() const { return size_; }
  std::uint32_t slice(std::uint64_t x, int l) const {
    return static_cast<std::uint32_t>((x >> (l * n_)) & slice_mask_);
  }
  int spin(std::uint64_t x, int l, int i) const { return 1 - 2 * static_cast<int>((x >> (l * n_ + i)) & 1U); }
  // sum_l sigma_{l,i}
  int column_sum(std::uint64_t x, int i) const { return column_sums_[x * n_ + i]; }
  // sum_i sigma_{l,i} sigma_{l',i}
  int slice_overlap(std::uint64_t x, int l, int lp) const;

 private:
  int m_;
  int n_;
  std::uint64_t size_;
  std::uint32_t slice_mask_;
  std::vector<std::int8_t> column_sums_;
};

// Coefficients of the g- and field-independent part of a path log-weight:
//   bond * sum_{l,i} s_{l,i} s_{l+1,i}
// + kernel_coeff * sum_{l,l'} y(l,l') sum_i s_{l,i} s_{l',i}
// + overlap_sq * sum_{l,l'} (sum_i s_{l,i} s_{l',i})^2
// + column_sq * sum_i (sum_l s_{l,i})^2 + constant
struct StructuralTerms {
  double bond = 0.0;
  double kernel_coeff = 0.0;
  const SelfOverlapKernel* kernel = nullptr;
  double overlap_sq = 0.0;
  double column_sq = 0.0;
  double constant = 0.0;
};

std::vector<double> structural_log_weights(const PathSpace& space, const StructuralTerms& terms);

// sum_{i<j} g_ij s_i s_j for each slice state of N spins
std::vector<double> slice_pair_sums(const DisorderSample& g);

// logw[x] += scale * sum_l table[slice(x, l)]
void add_slice_term(const PathSpace& space, std::span<const double> table, double scale, std::span<double> logw);
// logw[x] += sum_i h[i] * column_sum(x, i)
void add_column_field(const PathSpace& space, std::span<const double> h, std::span<double> logw);

// Normalised Gibbs probabilities and log partition sum of a log-weight vector.
double normalise_log_weights(std::span<const double> logw, std::vector<double>& prob);

}  // namespace qparisi
