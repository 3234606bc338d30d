// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <fmt/core.h>

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "qparisi/interpolation.hpp"
#include "qparisi/quantum.hpp"
#include "qparisi/rsb.hpp"
#include "qparisi/trotter.hpp"

using namespace qparisi;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, std::string note) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "" : "!! ") + std::move(note));
  }
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

// ---------------------------------------------------------------------------

Outcome trotter_convergence_grid() {
  Outcome out;
  // c != 0: at N = 1, c = 0 the splitting is exact and the error is pure rounding
  const double c = 0.3;
  for (int n : {1, 2, 3})
    for (double b : {0.5, 1.0})
      for (double beta : {0.5, 1.0}) {
        const auto rows = trotter_convergence(ModelParams{beta, b, c, n}, {4, 8, 16}, 1000 + n);
        bool mono = true;
        for (std::size_t i = 1; i < rows.size(); ++i) mono = mono && rows[i].abs_error < rows[i - 1].abs_error;
        out.check(mono, fmt::format("N={} b={} beta={} err(4,8,16)=({:.2e},{:.2e},{:.2e})", n, b, beta,
                                    rows[0].abs_error, rows[1].abs_error, rows[2].abs_error));
        if (n == 1) out.check(rows[2].abs_error < 5e-3, fmt::format("  N=1 M=16 err {:.2e} < 5e-3", rows[2].abs_error));
      }
  return out;
}

Outcome selfoverlap_identity() {
  Outcome out;
  int good = 0;
  for (double beta : {0.4, 0.8})
    for (std::uint64_t d = 0; d < 3; ++d) {
      const ModelParams p{beta, 0.5, 0.0, 2};
      const auto g = DisorderSample::draw(2, 2, RngStream(2000).child(d));
      const auto r = corrected_identity_check(p, g, 2, 10000, RngStream(2100).child(d));
      const bool ok = std::abs(r.gap) < 3.0;
      good += ok;
      out.notes.push_back(fmt::format("beta={} sample={} lhs={:.6f} rhs={:.6f} gap={:+.2f}", beta, d, r.lhs, r.rhs, r.gap));
    }
  out.check(good >= 5, fmt::format("{}/6 cells within 3 stderr (need 5)", good));
  return out;
}

Outcome classical_recovery() {
  Outcome out;
  const MixtureFunction mix(2);
  const QuadratureSpec quad;
  const auto low = hopf_lax_sup(1, mix, 0.8, 0.0, 0.0, 2, quad);
  const double target = std::numbers::ln2 + 0.8 * 0.8 / 4.0;
  out.check(std::abs(low.value - target) <= 1e-3,
            fmt::format("beta=0.8 k=1 value {:.6f} vs {:.6f} (tol 1e-3)", low.value, target));

  const double beta = 1.5;
  const auto k1 = hopf_lax_sup(1, mix, beta, 0.0, 0.0, 2, quad);
  const auto k2 = hopf_lax_sup(2, mix, beta, 0.0, 0.0, 2, quad);
  out.check(k2.value <= k1.value, fmt::format("beta=1.5 k=2 {:.6f} <= k=1 {:.6f}", k2.value, k1.value));
  for (int n : {4, 6, 8}) {
    const auto ed = quenched_free_energy(ModelParams{beta, 0.0, 0.0, n}, 400, 3000 + n);
    const double bound = k2.value + beta * beta / (4.0 * n) + 3.0 * ed.std_error;
    out.check(ed.mean <= bound, fmt::format("N={} (1/N)E log Z {:.5f} +- {:.5f} <= {:.5f}", n, ed.mean,
                                            ed.std_error, bound));
  }
  return out;
}

Outcome guerra_bound() {
  Outcome out;
  const int n = 4, m = 4;
  const double beta = 0.7, b = 0.6;
  const MixtureFunction mix(2);
  for (std::uint64_t c = 0; c < 5; ++c) {
    auto eng = RngStream(4000).child(c).engine();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int k = 1 + static_cast<int>(c % 2);
    std::vector<double> q;
    for (int l = 0; l < k; ++l) q.push_back(u(eng));
    std::sort(q.begin(), q.end());
    std::vector<double> ml;
    for (int l = 1; l < k; ++l) ml.push_back(0.1 + 0.8 * u(eng));
    std::vector<double> red(static_cast<std::size_t>(SelfOverlapKernel::reduced_size(m)));
    for (auto& v : red) v = u(eng);
    const auto rsb = RsbParams::make(ml, q);
    const auto y = SelfOverlapKernel::from_reduced(m, red);
    const auto model = InterpModel::make(ModelParams{beta, b, 0.0, n}, m, rsb, y);
    const auto phi = phi_estimate({1.0, 1.0}, model, 200, 4100 + c);
    const double par = parisi_functional(rsb, mix, SingleSiteModel(beta, b, 0.0, m, y), model.quad);
    const double bound = par + beta * beta / (4.0 * n) + 3.0 * phi.std_error;
    out.check(phi.mean <= bound, fmt::format("case {} k={} phi(1,1) {:.5f} +- {:.5f} <= P + b^2/4N + 3se = {:.5f}",
                                             c, k, phi.mean, phi.std_error, bound));
  }
  return out;
}

Outcome untilted_pair_partition() {
  Outcome out;
  const auto rsb = RsbParams::make({0.5}, {0.25, 0.6});
  const auto model =
      InterpModel::make(ModelParams{0.8, 0.5, 0.1, 2}, 2, rsb, SelfOverlapKernel::from_reduced(2, std::vector{0.7, 0.4}));
  for (double s : {0.3, 0.7})
    for (int r : {1, 2}) {
      const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(10 * s) + r;
      const auto v = tilted_partitions(s, TiltParams{r, 0.5, 0.0}, model, 400, seed);
      const auto phi = phi_estimate({s, 1.0}, model, 400, seed);
      const double se = std::hypot(v.log_v.std_error, 2.0 * phi.std_error);
      const double diff = v.log_v.mean - 2.0 * phi.mean;
      out.check(std::abs(diff) <= 3.0 * se, fmt::format("s={} r={} log V {:.6f} vs 2 phi {:.6f} diff {:.1e} (3se {:.1e})",
                                                        s, r, v.log_v.mean, 2.0 * phi.mean, diff, 3.0 * se));
    }
  return out;
}

Outcome superadditivity() {
  Outcome out;
  for (int ms : {2, 3})
    for (double beta : {0.3, 0.6}) {
      const auto g = superadditivity_gap(2, ms, beta, 0.5, 0.0, 200, 200, 6000 + ms);
      out.check(g.mean >= -3.0 * g.std_error,
                fmt::format("(2,{}) beta={} gap {:.5f} +- {:.5f}", ms, beta, g.mean, g.std_error));
    }
  return out;
}

Outcome hopf_lax_pde() {
  Outcome out;
  // phi(x) = a + (v sum x - w sum x^2) / M^2
  const double a = 0.3, v = 0.4, w = 0.25;
  KernelObjective phi = [=](const SelfOverlapKernel& x) {
    const double m2 = static_cast<double>(x.m_slices()) * x.m_slices();
    return a + (v * x.entry_sum() - w * x.frobenius_sq()) / m2;
  };
  const auto y = SelfOverlapKernel::from_reduced(4, std::vector<double>{0.5, 0.3, 0.2});
  for (double t : {0.3, 0.5, 0.8}) {
    const auto coarse = hopf_lax_pde_residual(t, y, 1.0, phi, 1e-3);
    const auto fine = hopf_lax_pde_residual(t, y, 1.0, phi, 5e-4);
    const double ratio = coarse.residual / fine.residual;
    out.check(coarse.residual < 1e-4 && ratio >= 3.5 && ratio <= 4.5,
              fmt::format("t={} residual {:.2e} halved {:.2e} ratio {:.2f}", t, coarse.residual, fine.residual, ratio));
  }
  return out;
}

Outcome pspin_covariance() {
  Outcome out;
  for (int p : {2, 4})
    for (int n : {8, 16}) {
      const auto rows = pspin_covariance_check(p, n, 20000, 7000 + 10 * p + n, {1.0});
      const auto& r = rows.at(0);
      out.check(std::abs(r.empirical - r.exact) <= 3.0 * r.std_error,
                fmt::format("p={} N={} rho=1 empirical {:.5f} +- {:.5f} exact {:.5f}", p, n, r.empirical,
                            r.std_error, r.exact));
      if (p == 2)
        out.check(r.correction_numerator == -1 && r.correction_denominator == 2 * n,
                  fmt::format("  correction {}/{}", r.correction_numerator, r.correction_denominator));
    }
  return out;
}

Outcome invariants() {
  Outcome out;
  const MixtureFunction mix(2);
  const QuadratureSpec quad;
  const SingleSiteModel site(1.3, 0.5, 0.1, 4, SelfOverlapKernel::from_reduced(4, std::vector{0.6, 0.4, 0.3}));

  double worst = 0.0;
  for (const auto& rsb : {RsbParams::replica_symmetric(0.4), RsbParams::make({0.4}, {0.2, 0.7})})
    for (int r = 1; r <= rsb.k; ++r) {
      const double m_new = 0.5 * (rsb.m[r - 1] + rsb.m[r]);
      const double base = parisi_functional(rsb, mix, site, quad);
      const double ins = parisi_functional(rsb.with_duplicated_level(r, m_new), mix, site, quad);
      worst = std::max(worst, std::abs(ins - base));
    }
  out.check(worst <= 1e-8, fmt::format("level insertion max change {:.1e}", worst));

  const auto o1 = optimize_rsb(1, mix, site, quad);
  const auto o2 = optimize_rsb(2, mix, site, quad, 600, 0, o1.params.with_duplicated_level(1, 0.5));
  out.check(o2.value <= o1.value, fmt::format("k-monotonicity {:.8f} <= {:.8f}", o2.value, o1.value));

  double zmin = INFINITY;
  const auto rsb2 = RsbParams::make({0.4}, {0.2, 0.7});
  for (double z0 = -8.0; z0 <= 8.0; z0 += 0.5)
    for (double z1 = -8.0; z1 <= 8.0; z1 += 0.5) zmin = std::min(zmin, zeta_initial(std::vector{z0, z1}, rsb2, mix, site));
  out.check(zmin > 0.0, fmt::format("zeta positivity, min {:.3e}", zmin));

  const ModelParams hp{0.9, 0.6, 0.0, 3};
  const auto g = DisorderSample::draw(2, 3, RngStream(8000));
  const auto h = build_sk_hamiltonian(hp, g);
  const auto spec = spectral_decompose(h);
  const Eigen::MatrixXd a = sz_operator(3, 0) + 0.5 * sx_operator(3, 1);
  const Eigen::MatrixXd bop = sz_operator(3, 1) * sz_operator(3, 2) - sx_operator(3, 2);
  const double ab = duhamel(a, bop, spec, hp.beta), ba = duhamel(bop, a, spec, hp.beta);
  const double aa = duhamel(a, a, spec, hp.beta);
  out.check(std::abs(ab - ba) < 1e-12 && aa > 0.0,
            fmt::format("Duhamel (A,B)-(B,A) {:.1e}, (A,A) {:.4f}", std::abs(ab - ba), aa));

  Eigen::MatrixXd flip = Eigen::MatrixXd::Identity(8, 8);
  for (int i = 0; i < 3; ++i) flip = flip * sx_operator(3, i);
  const double asym = (flip * h * flip - h).cwiseAbs().maxCoeff();
  const auto tr = TrotterConfig::make(hp.beta, hp.b, 3, 3);
  double path_asym = 0.0;
  for (std::uint64_t x = 0; x < 512; ++x) {
    const auto cfg = PathConfiguration::from_index(3, 3, x);
    path_asym = std::max(path_asym, std::abs(path_energy(cfg, g, hp, tr) - path_energy(cfg.flipped(), g, hp, tr)));
  }
  out.check(asym < 1e-12 && path_asym < 1e-12, fmt::format("Z2 at c=0: operator {:.1e}, paths {:.1e}", asym, path_asym));

  bool same = true;
  const auto q1 = quenched_free_energy(ModelParams{0.8, 0.5, 0.1, 4}, 24, 81, 1);
  const auto q3 = quenched_free_energy(ModelParams{0.8, 0.5, 0.1, 4}, 24, 81, 3);
  same = same && q1.mean == q3.mean && q1.std_error == q3.std_error;
  const auto model = InterpModel::make(ModelParams{0.8, 0.5, 0.1, 2}, 2, rsb2, SelfOverlapKernel::constant(2, 0.4));
  const auto p1 = phi_estimate({0.5, 0.5}, model, 16, 82, 1);
  const auto p3 = phi_estimate({0.5, 0.5}, model, 16, 82, 3);
  same = same && p1.mean == p3.mean && p1.std_error == p3.std_error;
  const auto c1 = pspin_covariance_check(4, 8, 200, 83, {}, 1);
  const auto c3 = pspin_covariance_check(4, 8, 200, 83, {}, 3);
  for (std::size_t i = 0; i < c1.size(); ++i) same = same && c1[i].empirical == c3[i].empirical;
  const auto s1 = superadditivity_gap(2, 2, 0.5, 0.5, 0.0, 8, 20, 84, 1);
  const auto s3 = superadditivity_gap(2, 2, 0.5, 0.5, 0.0, 8, 20, 84, 3);
  same = same && s1.mean == s3.mean;
  out.check(same, "bitwise determinism across worker counts 1 and 3");
  return out;
}

Outcome gradient_checks() {
  Outcome out;
  const MixtureFunction mix(2);
  const QuadratureSpec quad;
  const SingleSiteModel classical(1.5, 0.0, 0.0, 1, SelfOverlapKernel::zero(1));
  const SingleSiteModel quantum(2.0, 0.3, 0.0, 4, SelfOverlapKernel::constant(4, 0.8));
  for (const auto* site : {&classical, &quantum}) {
    const auto opt = optimize_rsb(1, mix, *site, quad);
    const auto rep = stationarity_residual(opt.params, mix, *site, quad);
    const bool interior = opt.params.q[1] > 0.05 && opt.params.q[1] < 0.95;
    out.check(interior && std::abs(rep.residuals[0]) < 1e-3,
              fmt::format("b={} optimum q={:.4f} dP/dq {:.1e}", site->b(), opt.params.q[1], rep.residuals[0]));
  }

  const int m = 4, n = 3;
  const ModelParams p{0.7, 0.4, 0.1, n};
  const auto g = DisorderSample::draw(2, n, RngStream(9000));
  const auto tr = TrotterConfig::make(p.beta, p.b, m, n);
  const std::vector<double> red{0.3, 0.5, 0.1};
  double worst = 0.0;
  for (std::uint64_t x : {0x000ULL, 0xA5BULL, 0x3C1ULL, 0xFFEULL}) {
    const auto cfg = PathConfiguration::from_index(m, n, x);
    for (std::size_t j = 0; j < red.size(); ++j) {
      const double step = 1e-3;
      auto up = red, dn = red;
      up[j] += step;
      dn[j] -= step;
      const double fd = (effective_path_energy(cfg, g, p, tr, 0.5, SelfOverlapKernel::from_reduced(m, up)) -
                         effective_path_energy(cfg, g, p, tr, 0.5, SelfOverlapKernel::from_reduced(m, dn))) /
                        (2 * step);
      double rho = 0.0;
      for (int l = 0; l < m; ++l)
        for (int lp = 0; lp < m; ++lp) {
          const int d = ((l - lp) % m + m) % m;
          if (d == static_cast<int>(j) || m - d == static_cast<int>(j)) rho += self_overlap(cfg, cfg, l, lp);
        }
      const double analytic = -(p.beta * n / (2.0 * m * m)) * rho;
      worst = std::max(worst, std::abs(fd - analytic) / std::max(1.0, std::abs(analytic)));
    }
  }
  out.check(worst < 1e-6, fmt::format("dE/dy vs -(beta N / 2M^2) rho: max rel err {:.1e}", worst));
  return out;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Trotter convergence", trotter_convergence_grid},
      {2, "self-overlap annealing identity", selfoverlap_identity},
      {3, "classical Parisi recovery and finite-N bound", classical_recovery},
      {4, "interpolation upper bound", guerra_bound},
      {5, "untilted pair partition equals twice phi", untilted_pair_partition},
      {6, "superadditivity", superadditivity},
      {7, "Hopf-Lax PDE residual", hopf_lax_pde},
      {8, "p-spin covariance", pspin_covariance},
      {9, "invariants", invariants},
      {10, "gradient checks", gradient_checks},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& note : o.notes) fmt::print("    {}\n", note);
    fmt::print("{} [{}] {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
