#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qparisi/rsb.hpp"

using namespace qparisi;

namespace {

// phi(x) = a + (v/M^2) sum x - (w/M^2) sum x^2, separable over kernel entries
struct QuadraticProxy {
  double a = 0.3, v = 0.4, w = 0.25;

  double operator()(const SelfOverlapKernel& x) const {
    const double m2 = static_cast<double>(x.m_slices()) * x.m_slices();
    return a + (v * x.entry_sum() - w * x.frobenius_sq()) / m2;
  }

  // per-entry maximiser of -A (x - y)^2 + (v x - w x^2)/M^2 with A M^2 = beta^2 / (4 (1 - t))
  double argmax(double t, double y, double beta) const {
    const double alpha = beta * beta / (4.0 * (1.0 - t));
    return (2.0 * alpha * y + v) / (2.0 * alpha + 2.0 * w);
  }

  double chi(double t, const SelfOverlapKernel& y, double beta) const {
    const int m = y.m_slices();
    const double m2 = static_cast<double>(m) * m;
    const double big_a = beta * beta / (4.0 * m2 * (1.0 - t));
    double acc = a;
    for (int l = 0; l < m; ++l)
      for (int lp = 0; lp < m; ++lp) {
        const double yy = y(l, lp);
        const double x = argmax(t, yy, beta);
        acc += -big_a * (x - yy) * (x - yy) + (v * x - w * x * x) / m2;
      }
    return acc;
  }
};

SelfOverlapKernel test_kernel() { return SelfOverlapKernel::from_reduced(4, std::vector<double>{0.5, 0.3, 0.2}); }

}  // namespace

TEST(MaximiseOverKernels, LinearProxyClosedForm) {
  // uniform slope v: sup = a + v^2 / beta^2 at x = 2 v / beta^2
  const double beta = 1.0, a = 0.2, v = 0.3;
  const int m = 4;
  KernelObjective objective = [&](const SelfOverlapKernel& x) {
    return -beta * beta / (4.0 * m * m) * x.frobenius_sq() + a + v * x.entry_sum() / (m * m);
  };
  const auto res = maximise_over_kernels(m, objective, std::vector<double>(3, 0.5));
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.value, a + v * v / (beta * beta), 1e-10);
  for (double p : res.argmax.profile()) EXPECT_NEAR(p, 2 * v / (beta * beta), 1e-6);
}

TEST(MaximiseOverKernels, FindsBoxEndpoint) {
  KernelObjective objective = [](const SelfOverlapKernel& x) { return x.entry_sum(); };
  const auto res = maximise_over_kernels(3, objective, std::vector<double>(2, 0.2));
  EXPECT_NEAR(res.value, 9.0, 1e-12);
}

TEST(MaximiseOverKernels, RejectsWrongStart) {
  KernelObjective objective = [](const SelfOverlapKernel&) { return 0.0; };
  EXPECT_THROW(maximise_over_kernels(4, objective, {0.1, 0.2}), std::invalid_argument);
}

TEST(HopfLaxSup, ClassicalRecovery) {
  const auto res = hopf_lax_sup(1, MixtureFunction(2), 0.8, 0.0, 0.0, 2, {});
  EXPECT_NEAR(res.value, std::numbers::ln2 + 0.16, 1e-3);
  EXPECT_TRUE(res.converged);
}

TEST(HopfLaxSup, HighTemperature) {
  const auto res = hopf_lax_sup(1, MixtureFunction(2), 0.05, 0.3, 0.0, 2, {});
  EXPECT_NEAR(res.value, std::numbers::ln2, 2e-3);
}

TEST(HopfLaxChi, TerminalConditionAndSyntheticOracle) {
  const QuadraticProxy phi;
  const double beta = 1.0;
  const auto y = test_kernel();
  EXPECT_EQ(hopf_lax_chi_generic(1.0, y, beta, phi).value, phi(y));
  for (double t : {0.0, 0.3, 0.5, 0.9}) {
    const auto res = hopf_lax_chi_generic(t, y, beta, phi);
    EXPECT_NEAR(res.value, phi.chi(t, y, beta), 1e-6) << t;
    EXPECT_TRUE(res.converged);
  }
}

TEST(HopfLaxChi, ApproachesTerminalValue) {
  const QuadraticProxy phi;
  const auto y = test_kernel();
  const double near_one = hopf_lax_chi_generic(1.0 - 1e-6, y, 1.0, phi).value;
  EXPECT_NEAR(near_one, phi(y), 1e-5);
}

TEST(HopfLaxChi, ZeroTimeZeroKernelIsSup) {
  const MixtureFunction mix(2);
  const double chi = hopf_lax_chi(0.0, SelfOverlapKernel::zero(2), 1, mix, 0.8, 0.0, 0.0, {});
  const auto sup = hopf_lax_sup(1, mix, 0.8, 0.0, 0.0, 2, {});
  EXPECT_NEAR(chi, sup.value, 1e-6);
}

TEST(HopfLaxPde, SyntheticResidualAndOrder) {
  const QuadraticProxy phi;
  const auto y = test_kernel();
  const double beta = 1.0, t = 0.5;
  const auto coarse = hopf_lax_pde_residual(t, y, beta, phi, 1e-3);
  const auto fine = hopf_lax_pde_residual(t, y, beta, phi, 5e-4);
  EXPECT_TRUE(coarse.converged);
  EXPECT_LT(coarse.residual, 1e-4);
  const double ratio = coarse.residual / fine.residual;
  EXPECT_GE(ratio, 3.5);
  EXPECT_LE(ratio, 4.5);
}

TEST(HopfLaxPde, GradientMatchesMoreauFormula) {
  // d chi / d y_{l,l'} = -(beta^2 / (2 M^2 (t - 1))) (x* - y)
  const QuadraticProxy phi;
  const auto y = test_kernel();
  const double beta = 1.0, t = 0.4, h = 1e-4;
  const int m = y.m_slices();
  const auto red = y.reduced();
  for (std::size_t j = 0; j < red.size(); ++j) {
    auto up = red, dn = red;
    up[j] += h;
    dn[j] -= h;
    const double fd = (hopf_lax_chi_generic(t, SelfOverlapKernel::from_reduced(m, up), beta, phi).value -
                       hopf_lax_chi_generic(t, SelfOverlapKernel::from_reduced(m, dn), beta, phi).value) /
                      (2 * h);
    const double per_entry = fd / y.reduced_multiplicity(static_cast<int>(j));
    const double x = phi.argmax(t, red[j], beta);
    EXPECT_NEAR(per_entry, -(beta * beta / (2.0 * m * m * (t - 1.0))) * (x - red[j]), 1e-7) << j;
  }
}

TEST(HopfLaxPde, RejectsEndpoints) {
  const QuadraticProxy phi;
  EXPECT_THROW(hopf_lax_pde_residual(1.0, test_kernel(), 1.0, phi, 1e-3), std::invalid_argument);
  EXPECT_THROW(hopf_lax_pde_residual(0.0, test_kernel(), 1.0, phi, 1e-3), std::invalid_argument);
}
