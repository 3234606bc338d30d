#include "qparisi/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace qparisi {

SelfOverlapKernel::SelfOverlapKernel(int m_slices, std::vector<double> profile)
    : m_slices_(m_slices), profile_(std::move(profile)) {
  if (m_slices < 1) throw std::invalid_argument("SelfOverlapKernel: M must be >= 1");
  if (static_cast<int>(profile_.size()) != m_slices)
    throw std::invalid_argument("SelfOverlapKernel: profile length must equal M");
  for (int d = 1; d < m_slices; ++d) {
    if (std::abs(profile_[d] - profile_[m_slices - d]) > 1e-14)
      throw std::invalid_argument("SelfOverlapKernel: profile must satisfy y(d) = y(M-d)");
  }
}

SelfOverlapKernel SelfOverlapKernel::zero(int m_slices) { return constant(m_slices, 0.0); }

SelfOverlapKernel SelfOverlapKernel::constant(int m_slices, double value) {
  return SelfOverlapKernel(m_slices, std::vector<double>(static_cast<std::size_t>(m_slices), value));
}

SelfOverlapKernel SelfOverlapKernel::from_reduced(int m_slices, std::span<const double> reduced) {
  if (static_cast<int>(reduced.size()) != reduced_size(m_slices))
    throw std::invalid_argument("SelfOverlapKernel::from_reduced: expected floor(M/2)+1 values");
  std::vector<double> p(static_cast<std::size_t>(m_slices));
  for (int d = 0; d < m_slices; ++d) p[d] = reduced[d <= m_slices / 2 ? d : m_slices - d];
  return SelfOverlapKernel(m_slices, std::move(p));
}

std::vector<double> SelfOverlapKernel::reduced() const {
  return {profile_.begin(), profile_.begin() + reduced_size(m_slices_)};
}

int SelfOverlapKernel::reduced_multiplicity(int j) const {
  const bool self_paired = (j == 0) || (2 * j == m_slices_);
  return m_slices_ * (self_paired ? 1 : 2);
}

double SelfOverlapKernel::operator()(int l, int lp) const {
  int d = (l - lp) % m_slices_;
  if (d < 0) d += m_slices_;
  return profile_[d];
}

double SelfOverlapKernel::frobenius_sq() const {
  double s = 0.0;
  for (double v : profile_) s += v * v;
  return m_slices_ * s;
}

double SelfOverlapKernel::entry_sum() const {
  double s = 0.0;
  for (double v : profile_) s += v;
  return m_slices_ * s;
}

bool SelfOverlapKernel::in_unit_box(double tol) const {
  for (double v : profile_)
    if (v < -tol || v > 1.0 + tol) return false;
  return true;
}

}  // namespace qparisi
