#pragma once

#include <span>
#include <vector>

namespace qparisi {

// Symmetric, translation-invariant matrix on Trotter time stored as a
// distance profile: y(l, l') = profile[(l - l') mod M], profile[d] = profile[M - d].
class SelfOverlapKernel {
 public:
  SelfOverlapKernel() = default;
  SelfOverlapKernel(int m_slices, std::vector<double> profile);

  static SelfOverlapKernel zero(int m_slices);
  static SelfOverlapKernel constant(int m_slices, double value);
  // Build from the free coordinates d = 0..floor(M/2).
  static SelfOverlapKernel from_reduced(int m_slices, std::span<const double> reduced);

  int m_slices() const { return m_slices_; }
  const std::vector<double>& profile() const { return profile_; }
  std::vector<double> reduced() const;
  static int reduced_size(int m_slices) { return m_slices / 2 + 1; }
  // Number of (l, l') entries carried by reduced coordinate j.
  int reduced_multiplicity(int j) const;

  double operator()(int l, int lp) const;
  // sum_{l,l'} y(l,l')^2 = M sum_d profile[d]^2
  double frobenius_sq() const;
  double entry_sum() const;
  bool in_unit_box(double tol = 0.0) const;

 private:
  int m_slices_ = 0;
  std::vector<double> profile_;
};

}  // namespace qparisi
