#include "qparisi/rsb.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "qparisi/trotter.hpp"

namespace qparisi {

RsbParams RsbParams::make(std::vector<double> m_levels, std::vector<double> q_levels) {
  RsbParams r;
  r.k = static_cast<int>(q_levels.size());
  if (r.k < 1) throw std::invalid_argument("RsbParams: need at least one q level");
  if (static_cast<int>(m_levels.size()) != r.k - 1)
    throw std::invalid_argument("RsbParams: expected k-1 free m values (m_k = 1 is implied)");
  r.m.push_back(0.0);
  r.m.insert(r.m.end(), m_levels.begin(), m_levels.end());
  r.m.push_back(1.0);
  r.q.push_back(0.0);
  r.q.insert(r.q.end(), q_levels.begin(), q_levels.end());
  r.q.push_back(0.0);
  r.validate();
  return r;
}

RsbParams RsbParams::replica_symmetric(double q1) { return make({}, {q1}); }

void RsbParams::validate() const {
  if (k < 1) throw std::invalid_argument("RsbParams: k must be >= 1");
  if (static_cast<int>(m.size()) != k + 1 || static_cast<int>(q.size()) != k + 2)
    throw std::invalid_argument("RsbParams: m needs k+1 entries and q needs k+2 entries");
  if (m[0] != 0.0 || m[k] != 1.0) throw std::invalid_argument("RsbParams: m_0 = 0 and m_k = 1 required");
  if (k >= 1 && !(m[1] > 0.0)) throw std::invalid_argument("RsbParams: m_1 must be > 0");
  for (int p = 1; p <= k; ++p)
    if (m[p] < m[p - 1]) throw std::invalid_argument("RsbParams: m must be nondecreasing");
  if (q[0] != 0.0 || q[k + 1] != 0.0) throw std::invalid_argument("RsbParams: q_0 = q_{k+1} = 0 required");
  for (int p = 1; p <= k; ++p)
    if (q[p] < q[p - 1]) throw std::invalid_argument("RsbParams: q must be nondecreasing");
  if (q[k] > 1.0) throw std::invalid_argument("RsbParams: q_k must be <= 1");
}

RsbParams RsbParams::with_duplicated_level(int r, double m_new) const {
  if (r < 1 || r > k) throw std::invalid_argument("with_duplicated_level: r out of range");
  // the new zero-width level r sits between m_{r-1} and m_r; anything else
  // would re-pair the remaining exponents with different levels
  if (!(m_new > 0.0) || m_new < m[r - 1] || m_new > m[r])
    throw std::invalid_argument("with_duplicated_level: m_new must lie in [m_{r-1}, m_r]");
  RsbParams out = *this;
  out.k = k + 1;
  out.q.insert(out.q.begin() + r + 1, q[r]);
  out.m.insert(out.m.begin() + r, m_new);
  out.validate();
  return out;
}

MixtureFunction::MixtureFunction(int order) : p(order) {
  if (order < 2 || order % 2 != 0) throw std::invalid_argument("MixtureFunction: p must be even and >= 2");
}

double MixtureFunction::xi(double q) const { return 0.5 * std::pow(q, p); }
double MixtureFunction::dxi(double q) const { return p == 2 ? q : 0.5 * p * std::pow(q, p - 1); }

QuadratureSpec QuadratureSpec::for_depth(int k) {
  QuadratureSpec s;
  if (k > 3) {
    s.mode = Mode::MonteCarlo;
    s.samples = 48;
  }
  return s;
}

void QuadratureSpec::validate() const {
  if (mode == Mode::GaussHermite && (nodes < 2 || nodes > 128))
    throw std::invalid_argument("QuadratureSpec: nodes must be in [2, 128]");
  if (mode == Mode::MonteCarlo && (samples < 2 || samples % 2 != 0))
    throw std::invalid_argument("QuadratureSpec: samples must be even and >= 2");
}

QuadratureRule QuadratureSpec::level_rule(int level) const {
  validate();
  if (mode == Mode::GaussHermite) return gauss_hermite(nodes);
  const auto half = gaussian_samples(RngStream(seed).child(0x51ULL).child(static_cast<std::uint64_t>(level)),
                                     static_cast<std::size_t>(samples / 2));
  QuadratureRule rule;
  for (double z : half) {
    rule.nodes.push_back(z);
    rule.nodes.push_back(-z);
  }
  rule.weights.assign(rule.nodes.size(), 1.0 / static_cast<double>(rule.nodes.size()));
  return rule;
}

SingleSiteModel::SingleSiteModel(double beta, double b, double c, int m_slices, SelfOverlapKernel kernel)
    : beta_(beta), b_(b), c_(c), m_(m_slices), kernel_(std::move(kernel)) {
  if (!(beta > 0.0)) throw std::invalid_argument("SingleSiteModel: beta must be > 0");
  if (b < 0.0) throw std::invalid_argument("SingleSiteModel: b must be >= 0");
  if (m_slices < 1 || m_slices > kMaxSingleSiteSlices)
    throw std::invalid_argument("SingleSiteModel: M must be in [1, " + std::to_string(kMaxSingleSiteSlices) + "]");
  if (kernel_.m_slices() != m_slices) throw std::invalid_argument("SingleSiteModel: kernel dimension != M");
  const double mm = static_cast<double>(m_slices);
  const double ycoef = beta * beta / (2.0 * mm * mm);
  if (b == 0.0) {
    // slices locked: only the two uniform paths survive
    classical_ = true;
    magnetisation_ = {-m_slices, m_slices};
    const double w = ycoef * kernel_.entry_sum();
    log_weight_ = {w, w};
    return;
  }
  if (m_slices < 2) throw std::invalid_argument("SingleSiteModel: quantum case needs M >= 2");
  beta_k_ = *trotter_coupling(beta, b, m_slices);
  log_prefactor_ = *qparisi::log_prefactor(beta, b, m_slices, 1);
  std::vector<LogSumExp> by_mag(static_cast<std::size_t>(m_slices + 1));
  for (std::uint32_t x = 0; x < (1U << m_slices); ++x) {
    auto s = [&](int l) { return 1 - 2 * static_cast<int>((x >> (((l % m_slices) + m_slices) % m_slices)) & 1U); };
    double yy = 0.0;
    int bonds = 0;
    int mag = 0;
    for (int l = 0; l < m_slices; ++l) {
      mag += s(l);
      bonds += s(l) * s(l + 1);
      for (int lp = 0; lp < m_slices; ++lp) yy += kernel_(l, lp) * s(l) * s(lp);
    }
    by_mag[static_cast<std::size_t>((mag + m_slices) / 2)].add(ycoef * yy + beta_k_ * bonds);
  }
  for (int j = 0; j <= m_slices; ++j) {
    if (by_mag[j].empty()) continue;
    magnetisation_.push_back(2 * j - m_slices);
    log_weight_.push_back(by_mag[j].value());
  }
}

double SingleSiteModel::log_zeta(double h, double dxi_top) const {
  const double mm = static_cast<double>(m_);
  const double field = beta_ * h / mm;
  const double quad = beta_ * beta_ * dxi_top / (2.0 * mm * mm);
  double mx = -std::numeric_limits<double>::infinity();
  double terms[kMaxSingleSiteSlices + 1];
  const std::size_t n = magnetisation_.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double s = magnetisation_[j];
    terms[j] = log_weight_[j] + field * s - quad * s * s;
    mx = std::max(mx, terms[j]);
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += std::exp(terms[j] - mx);
  return log_prefactor_ + mx + std::log(acc);
}

namespace {

double cavity_field(std::span<const double> z_fields, const RsbParams& rsb, const MixtureFunction& mix, double c) {
  double h = c;
  for (int p = 0; p < rsb.k; ++p)
    h += std::sqrt(std::max(0.0, mix.dxi(rsb.q[p + 1]) - mix.dxi(rsb.q[p]))) * z_fields[p];
  return h;
}

}  // namespace

double log_zeta_initial(std::span<const double> z_fields, const RsbParams& rsb, const MixtureFunction& mix,
                        const SingleSiteModel& site) {
  rsb.validate();
  if (static_cast<int>(z_fields.size()) != rsb.k)
    throw std::invalid_argument("zeta_initial: expected k real Gaussian fields z^0..z^{k-1}");
  return site.log_zeta(cavity_field(z_fields, rsb, mix, site.c()), mix.dxi(rsb.q[rsb.k]));
}

double zeta_initial(std::span<const double> z_fields, const RsbParams& rsb, const MixtureFunction& mix,
                    const SingleSiteModel& site) {
  return std::exp(log_zeta_initial(z_fields, rsb, mix, site));
}

namespace {

// (1/m) log sum_j w_j exp(m f_j), written around the mean so that small m
// does not cancel to zero
double power_mean_log(std::span<const double> w, std::span<const double> f, double m) {
  KahanSum mean;
  for (std::size_t j = 0; j < f.size(); ++j) mean.add(w[j] * f[j]);
  const double fbar = mean.value();
  double top = 0.0;
  for (double v : f) top = std::max(top, m * (v - fbar));
  if (top > 30.0) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < f.size(); ++j) mx = std::max(mx, std::log(w[j]) + m * f[j]);
    KahanSum acc;
    for (std::size_t j = 0; j < f.size(); ++j) acc.add(std::exp(std::log(w[j]) + m * f[j] - mx));
    return (mx + std::log(acc.value())) / m;
  }
  KahanSum acc;
  for (std::size_t j = 0; j < f.size(); ++j) acc.add(w[j] * std::expm1(m * (f[j] - fbar)));
  return fbar + std::log1p(acc.value()) / m;
}

struct ZetaRecursion {
  const RsbParams& rsb;
  const SingleSiteModel& site;
  std::vector<QuadratureRule> rules;
  std::vector<double> amplitude;
  double dxi_top;

  // log zeta_l with the field accumulated through level l
  double level(int l, double h) const {
    if (l == rsb.k - 1) return site.log_zeta(h, dxi_top);
    const int next = l + 1;
    if (amplitude[next] == 0.0) return level(next, h);
    const double m = rsb.m[next];
    const auto& rule = rules[next];
    double terms[128];
    std::vector<double> big;
    double* t = terms;
    if (rule.size() > 128) {
      big.resize(rule.size());
      t = big.data();
    }
    for (std::size_t j = 0; j < rule.size(); ++j) t[j] = level(next, h + amplitude[next] * rule.nodes[j]);
    return power_mean_log(rule.weights, std::span<const double>(t, rule.size()), m);
  }
};

}  // namespace

double elog_zeta0(const RsbParams& rsb, const MixtureFunction& mix, const SingleSiteModel& site,
                  const QuadratureSpec& quad) {
  rsb.validate();
  for (int l = 1; l <= rsb.k; ++l)
    if (!(rsb.m[l] > 0.0)) throw std::invalid_argument("elog_zeta0: m_l must be > 0 inside the recursion");
  ZetaRecursion rec{rsb, site, {}, {}, mix.dxi(rsb.q[rsb.k])};
  for (int l = 0; l < rsb.k; ++l) {
    rec.rules.push_back(quad.level_rule(l));
    rec.amplitude.push_back(std::sqrt(std::max(0.0, mix.dxi(rsb.q[l + 1]) - mix.dxi(rsb.q[l]))));
  }
  if (rec.amplitude[0] == 0.0) return rec.level(0, site.c());
  KahanSum acc;
  const auto& outer = rec.rules[0];
  for (std::size_t j = 0; j < outer.size(); ++j)
    acc.add(outer.weights[j] * rec.level(0, site.c() + rec.amplitude[0] * outer.nodes[j]));
  return acc.value();
}

double parisi_functional(const RsbParams& rsb, const MixtureFunction& mix, const SingleSiteModel& site,
                         const QuadratureSpec& quad) {
  const double beta = site.beta();
  double corr = 0.0;
  for (int l = 1; l <= rsb.k; ++l) corr += rsb.m[l] * (mix.theta(rsb.q[l + 1]) - mix.theta(rsb.q[l]));
  return elog_zeta0(rsb, mix, site, quad) - 0.5 * beta * beta * corr;
}

// ---------------------------------------------------------------------------
// optimisation

namespace {

constexpr double kMinGap = 1e-12;

// softmax over (u_0..u_{n-2}, 0)
std::vector<double> softmax_with_anchor(const double* u, int n) {
  std::vector<double> e(static_cast<std::size_t>(n));
  double mx = 0.0;
  for (int i = 0; i + 1 < n; ++i) mx = std::max(mx, u[i]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    e[i] = std::exp((i + 1 < n ? u[i] : 0.0) - mx);
    total += e[i];
  }
  for (auto& v : e) v /= total;
  return e;
}

struct Reparam {
  int k;
  int dim() const { return 2 * k - 1; }

  RsbParams decode(const double* u) const {
    const auto qgap = softmax_with_anchor(u, k + 1);
    std::vector<double> q_levels(static_cast<std::size_t>(k));
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      acc += qgap[j];
      q_levels[j] = std::min(acc, 1.0);
    }
    std::vector<double> m_levels;
    if (k > 1) {
      const auto mgap = softmax_with_anchor(u + k, k);
      double macc = 0.0;
      for (int j = 0; j + 1 < k; ++j) {
        macc += mgap[j];
        m_levels.push_back(std::min(macc, 1.0));
      }
    }
    return RsbParams::make(std::move(m_levels), std::move(q_levels));
  }

  std::vector<double> encode(const RsbParams& r) const {
    std::vector<double> u(static_cast<std::size_t>(dim()));
    const double last_q = std::max(1.0 - r.q[k], kMinGap);
    for (int i = 0; i < k; ++i) u[i] = std::log(std::max(r.q[i + 1] - r.q[i], kMinGap)) - std::log(last_q);
    if (k > 1) {
      const double last_m = std::max(r.m[k] - r.m[k - 1], kMinGap);
      for (int j = 1; j < k; ++j) u[k + j - 1] = std::log(std::max(r.m[j] - r.m[j - 1], kMinGap)) - std::log(last_m);
    }
    return u;
  }
};

struct NmContext {
  const Reparam* rep;
  const MixtureFunction* mix;
  const SingleSiteModel* site;
  const QuadratureSpec* quad;
  int evaluations = 0;
};

double nm_objective(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<NmContext*>(params);
  ++ctx->evaluations;
  try {
    const auto r = ctx->rep->decode(x->data);
    const double v = parisi_functional(r, *ctx->mix, *ctx->site, *ctx->quad);
    return std::isfinite(v) ? v : GSL_POSINF;
  } catch (const std::invalid_argument&) {
    return GSL_POSINF;
  }
}

double nm_objective_value(NmContext& ctx, const std::vector<double>& x) {
  gsl_vector_const_view v = gsl_vector_const_view_array(x.data(), x.size());
  return nm_objective(&v.vector, &ctx);
}

struct NmRun {
  std::vector<double> x;
  double f;
  bool converged;
};

NmRun run_simplex(NmContext& ctx, std::vector<double> x0, double step, int budget) {
  const int n = ctx.rep->dim();
  gsl_multimin_function fn{&nm_objective, static_cast<std::size_t>(n), &ctx};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (int i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0[i]);
    gsl_vector_set(ss, i, step);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  const int start_evals = ctx.evaluations;
  bool converged = false;
  double best = s->fval;
  int stale = 0;
  while (ctx.evaluations - start_evals < budget) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-8) == GSL_SUCCESS) {
      converged = true;
      break;
    }
    if (s->fval < best - 1e-14 * (1.0 + std::abs(best))) {
      best = s->fval;
      stale = 0;
    } else if (++stale > 40 * n) {
      // creeping towards a boundary (e.g. q -> 0) with no measurable gain
      converged = true;
      break;
    }
  }
  NmRun out{std::vector<double>(s->x->data, s->x->data + n), s->fval, converged};
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return out;
}

}  // namespace

RsbOptimum optimize_rsb(int k, const MixtureFunction& mix, const SingleSiteModel& site, const QuadratureSpec& quad,
                        int opt_budget, std::uint64_t restart_seed, const std::optional<RsbParams>& warm_start) {
  if (k < 1) throw std::invalid_argument("optimize_rsb: k must be >= 1");
  if (opt_budget < 10) throw std::invalid_argument("optimize_rsb: budget too small");
  gsl_set_error_handler_off();
  const Reparam rep{k};
  NmContext ctx{&rep, &mix, &site, &quad};

  std::vector<std::vector<double>> starts;
  if (warm_start && warm_start->k == k) starts.push_back(rep.encode(*warm_start));
  int nested_evals = 0;
  if (k >= 2 && !(warm_start && warm_start->k == k)) {
    const std::optional<RsbParams> lower_warm =
        warm_start && warm_start->k == k - 1 ? warm_start : std::optional<RsbParams>{};
    const auto lower = optimize_rsb(k - 1, mix, site, quad, opt_budget / 2, restart_seed, lower_warm);
    nested_evals = lower.evaluations;
    const double m_new = 0.5 * (lower.params.m[k - 2] + 1.0);
    starts.push_back(rep.encode(lower.params.with_duplicated_level(k - 1, m_new)));
  }
  {
    std::vector<double> q_levels, m_levels;
    for (int j = 1; j <= k; ++j) q_levels.push_back(static_cast<double>(j) / (k + 1));
    for (int j = 1; j < k; ++j) m_levels.push_back(static_cast<double>(j) / k);
    starts.push_back(rep.encode(RsbParams::make(m_levels, q_levels)));
  }
  if (restart_seed != 0) {
    auto jitter = gaussian_samples(RngStream(restart_seed).child(static_cast<std::uint64_t>(k)),
                                   static_cast<std::size_t>(rep.dim()));
    auto s = starts.back();
    for (int i = 0; i < rep.dim(); ++i) s[i] += jitter[i];
    starts.push_back(s);
  }

  const int per_start = std::max(10, (opt_budget - nested_evals) / static_cast<int>(starts.size()));
  RsbOptimum best;
  best.value = std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
  bool any_converged = false;
  for (const auto& x0 : starts) {
    const double f0 = nm_objective_value(ctx, x0);
    if (f0 < best.value) {
      best.value = f0;
      best_x = x0;
    }
    auto run = run_simplex(ctx, x0, 1.0, per_start / 2);
    // restart from the best vertex with a smaller simplex
    for (double step : {0.5, 0.1}) {
      if (ctx.evaluations - nested_evals >= opt_budget) break;
      auto again = run_simplex(ctx, run.x, step, per_start / 4);
      const bool gained = again.f < run.f - 1e-13 * (1.0 + std::abs(run.f));
      if (again.f <= run.f) run = again;
      if (!gained) {
        // a fresh simplex at the incumbent found nothing better
        run.converged = true;
        break;
      }
    }
    any_converged = any_converged || run.converged;
    if (run.f < best.value) {
      best.value = run.f;
      best_x = run.x;
    }
  }
  best.params = rep.decode(best_x.data());
  best.value = parisi_functional(best.params, mix, site, quad);
  best.evaluations = ctx.evaluations + nested_evals;
  best.converged = any_converged;
  return best;
}

StationarityReport stationarity_residual(const RsbParams& rsb, const MixtureFunction& mix,
                                         const SingleSiteModel& site, const QuadratureSpec& quad, double step) {
  rsb.validate();
  StationarityReport rep;
  for (int r = 1; r <= rsb.k; ++r) {
    const double lo = rsb.q[r - 1];
    const double hi = r < rsb.k ? rsb.q[r + 1] : 1.0;
    auto at = [&](double qr) {
      RsbParams p = rsb;
      p.q[r] = qr;
      return parisi_functional(p, mix, site, quad);
    };
    const double q = rsb.q[r];
    double d;
    bool one_sided = false;
    if (q - step >= lo && q + step <= hi) {
      d = (at(q + step) - at(q - step)) / (2.0 * step);
    } else if (q + step <= hi) {
      d = (at(q + step) - at(q)) / step;
      one_sided = true;
    } else {
      d = (at(q) - at(q - step)) / step;
      one_sided = true;
    }
    rep.residuals.push_back(d);
    rep.one_sided.push_back(one_sided);
  }
  return rep;
}

}  // namespace qparisi
