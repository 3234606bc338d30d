#include "qparisi/config_space.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "qparisi/stochastics.hpp"

namespace qparisi {

PathSpace::PathSpace(int m_slices, int n_spins) : m_(m_slices), n_(n_spins) {
  if (m_slices < 1 || n_spins < 1) throw std::invalid_argument("PathSpace: M and N must be >= 1");
  if (m_slices * n_spins > kMaxStoredPathSpins)
    throw std::invalid_argument("PathSpace: M*N=" + std::to_string(m_slices * n_spins) + " exceeds cap " +
                                std::to_string(kMaxStoredPathSpins));
  size_ = std::uint64_t{1} << (m_ * n_);
  slice_mask_ = (std::uint32_t{1} << n_) - 1;
  column_sums_.resize(size_ * static_cast<std::uint64_t>(n_));
  for (std::uint64_t x = 0; x < size_; ++x) {
    for (int i = 0; i < n_; ++i) {
      int s = 0;
      for (int l = 0; l < m_; ++l) s += spin(x, l, i);
      column_sums_[x * n_ + i] = static_cast<std::int8_t>(s);
    }
  }
}

int PathSpace::slice_overlap(std::uint64_t x, int l, int lp) const {
  return n_ - 2 * std::popcount(slice(x, l) ^ slice(x, lp));
}

std::vector<double> structural_log_weights(const PathSpace& space, const StructuralTerms& terms) {
  const int m = space.m();
  const int n = space.n();
  if (terms.kernel && terms.kernel->m_slices() != m)
    throw std::invalid_argument("structural_log_weights: kernel dimension must equal M");
  std::vector<double> logw(space.size());
  std::vector<int> ov(static_cast<std::size_t>(m * m));
  for (std::uint64_t x = 0; x < space.size(); ++x) {
    for (int l = 0; l < m; ++l)
      for (int lp = l; lp < m; ++lp) ov[l * m + lp] = ov[lp * m + l] = space.slice_overlap(x, l, lp);
    double acc = terms.constant;
    if (terms.bond != 0.0) {
      int bonds = 0;
      for (int l = 0; l < m; ++l) bonds += ov[l * m + (l + 1) % m];
      acc += terms.bond * bonds;
    }
    if (terms.kernel && terms.kernel_coeff != 0.0) {
      double k = 0.0;
      for (int l = 0; l < m; ++l)
        for (int lp = 0; lp < m; ++lp) k += (*terms.kernel)(l, lp) * ov[l * m + lp];
      acc += terms.kernel_coeff * k;
    }
    if (terms.overlap_sq != 0.0) {
      double q = 0.0;
      for (int v : ov) q += static_cast<double>(v) * v;
      acc += terms.overlap_sq * q;
    }
    if (terms.column_sq != 0.0) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) {
        const int s = space.column_sum(x, i);
        q += static_cast<double>(s) * s;
      }
      acc += terms.column_sq * q;
    }
    logw[x] = acc;
  }
  return logw;
}

std::vector<double> slice_pair_sums(const DisorderSample& g) {
  const int n = g.n_spins;
  std::vector<double> table(std::size_t{1} << n);
  for (std::uint64_t s = 0; s < table.size(); ++s) {
    double acc = 0.0;
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) acc += g.values[idx++] * spin_of(s, i) * spin_of(s, j);
    table[s] = acc;
  }
  return table;
}

void add_slice_term(const PathSpace& space, std::span<const double> table, double scale, std::span<double> logw) {
  const int m = space.m();
  for (std::uint64_t x = 0; x < space.size(); ++x) {
    double acc = 0.0;
    for (int l = 0; l < m; ++l) acc += table[space.slice(x, l)];
    logw[x] += scale * acc;
  }
}

void add_column_field(const PathSpace& space, std::span<const double> h, std::span<double> logw) {
  const int n = space.n();
  for (std::uint64_t x = 0; x < space.size(); ++x) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += h[i] * space.column_sum(x, i);
    logw[x] += acc;
  }
}

double normalise_log_weights(std::span<const double> logw, std::vector<double>& prob) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logw) mx = std::max(mx, v);
  prob.resize(logw.size());
  KahanSum s;
  for (std::size_t x = 0; x < logw.size(); ++x) {
    prob[x] = std::exp(logw[x] - mx);
    s.add(prob[x]);
  }
  const double total = s.value();
  for (auto& p : prob) p /= total;
  return mx + std::log(total);
}

}  // namespace qparisi
