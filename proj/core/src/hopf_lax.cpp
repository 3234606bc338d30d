#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "qparisi/rsb.hpp"

namespace qparisi {

KernelSup maximise_over_kernels(int m_slices, const KernelObjective& objective, std::vector<double> start,
                                int max_sweeps, double lo, double hi) {
  const int dim = SelfOverlapKernel::reduced_size(m_slices);
  if (static_cast<int>(start.size()) != dim)
    throw std::invalid_argument("maximise_over_kernels: start must have floor(M/2)+1 reduced entries");
  if (!(lo < hi)) throw std::invalid_argument("maximise_over_kernels: empty box");
  for (auto& v : start) v = std::clamp(v, lo, hi);

  KernelSup out;
  auto eval = [&](const std::vector<double>& x) {
    ++out.evaluations;
    return objective(SelfOverlapKernel::from_reduced(m_slices, x));
  };
  std::vector<double> x = start;
  double best = eval(x);
  const int bits = std::numeric_limits<double>::digits / 2;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double before = best;
    for (int j = 0; j < dim; ++j) {
      std::vector<double> trial = x;
      std::uintmax_t iters = 200;
      const auto [arg, neg] = boost::math::tools::brent_find_minima(
          [&](double v) {
            trial[j] = v;
            return -eval(trial);
          },
          lo, hi, bits, iters);
      // Brent never probes the exact endpoints, and the sup often sits on one
      double cand_x = arg;
      double cand = -neg;
      for (double edge : {lo, hi}) {
        trial[j] = edge;
        const double v = eval(trial);
        if (v > cand) {
          cand = v;
          cand_x = edge;
        }
      }
      if (cand > best) {
        best = cand;
        x[j] = cand_x;
      }
    }
    if (best - before <= 1e-13 * (1.0 + std::abs(best))) {
      out.converged = true;
      break;
    }
  }
  out.value = best;
  out.argmax = SelfOverlapKernel::from_reduced(m_slices, x);
  return out;
}

HopfLaxResult hopf_lax_sup(int k, const MixtureFunction& mix, double beta, double b, double c, int m_slices,
                           const QuadratureSpec& quad, int opt_budget, int max_sweeps) {
  if (m_slices < 1 || m_slices > 12) throw std::invalid_argument("hopf_lax_sup: M must be in [1, 12]");
  HopfLaxResult res;
  std::optional<RsbParams> warm;
  bool inner_ok = true;
  const double pen = beta * beta / (4.0 * m_slices * m_slices);
  auto objective = [&](const SelfOverlapKernel& x) {
    const SingleSiteModel site(beta, b, c, m_slices, x);
    const auto opt = optimize_rsb(k, mix, site, quad, opt_budget, 0, warm);
    warm = opt.params;
    res.evaluations += opt.evaluations;
    inner_ok = inner_ok && opt.converged;
    return -pen * x.frobenius_sq() + opt.value;
  };
  const std::vector<double> start(static_cast<std::size_t>(SelfOverlapKernel::reduced_size(m_slices)), 0.5);
  const auto sup = maximise_over_kernels(m_slices, objective, start, max_sweeps);
  res.value = sup.value;
  res.x = sup.argmax;
  // re-solve at the argmax so the reported inner optimum matches the value
  const SingleSiteModel site(beta, b, c, m_slices, res.x);
  res.inner = optimize_rsb(k, mix, site, quad, opt_budget, 0, warm);
  res.value = std::max(res.value, -pen * res.x.frobenius_sq() + res.inner.value);
  res.converged = sup.converged && inner_ok;
  return res;
}

KernelSup hopf_lax_chi_generic(double t, const SelfOverlapKernel& y, double beta, const KernelObjective& phi,
                               int max_sweeps) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("hopf_lax_chi: t must be in [0, 1]");
  const int m = y.m_slices();
  if (t == 1.0) {
    KernelSup out;
    out.value = phi(y);
    out.argmax = y;
    out.evaluations = 1;
    out.converged = true;
    return out;
  }
  const double coeff = beta * beta / (4.0 * m * m * (t - 1.0));
  const auto yr = y.reduced();
  auto objective = [&](const SelfOverlapKernel& x) {
    const auto xr = x.reduced();
    double dist = 0.0;
    for (std::size_t j = 0; j < xr.size(); ++j)
      dist += x.reduced_multiplicity(static_cast<int>(j)) * (xr[j] - yr[j]) * (xr[j] - yr[j]);
    return coeff * dist + phi(x);
  };
  std::vector<double> start = yr;
  for (auto& v : start) v = std::clamp(v, 0.0, 1.0);
  return maximise_over_kernels(m, objective, start, max_sweeps);
}

double hopf_lax_chi(double t, const SelfOverlapKernel& y, int k, const MixtureFunction& mix, double beta, double b,
                    double c, const QuadratureSpec& quad, int opt_budget) {
  std::optional<RsbParams> warm;
  KernelObjective phi = [&](const SelfOverlapKernel& x) {
    const SingleSiteModel site(beta, b, c, x.m_slices(), x);
    const auto opt = optimize_rsb(k, mix, site, quad, opt_budget, 0, warm);
    warm = opt.params;
    return opt.value;
  };
  return hopf_lax_chi_generic(t, y, beta, phi).value;
}

PdeResidual hopf_lax_pde_residual(double t, const SelfOverlapKernel& y, double beta, const KernelObjective& phi,
                                  double step) {
  if (!(t > step && t + step < 1.0)) throw std::invalid_argument("hopf_lax_pde_residual: t must be interior");
  if (!(step > 0.0)) throw std::invalid_argument("hopf_lax_pde_residual: step must be > 0");
  const int m = y.m_slices();
  PdeResidual out;
  auto chi = [&](double tt, const SelfOverlapKernel& yy) {
    const auto r = hopf_lax_chi_generic(tt, yy, beta, phi);
    out.converged = out.converged && r.converged;
    return r.value;
  };
  out.dchi_dt = (chi(t + step, y) - chi(t - step, y)) / (2.0 * step);
  const auto yr = y.reduced();
  double grad_sq = 0.0;
  for (std::size_t j = 0; j < yr.size(); ++j) {
    auto up = yr;
    auto dn = yr;
    up[j] += step;
    dn[j] -= step;
    const double g = (chi(t, SelfOverlapKernel::from_reduced(m, up)) - chi(t, SelfOverlapKernel::from_reduced(m, dn))) /
                     (2.0 * step);
    // moving reduced coordinate j moves mult_j entries of y together
    grad_sq += g * g / y.reduced_multiplicity(static_cast<int>(j));
  }
  out.grad_sq = grad_sq;
  out.residual = std::abs(out.dchi_dt + (static_cast<double>(m) * m / (beta * beta)) * grad_sq);
  return out;
}

}  // namespace qparisi
