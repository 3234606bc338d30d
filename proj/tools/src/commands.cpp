#include "commands.hpp"

#include <fmt/format.h>

#include <iostream>

#include "qparisi/interpolation.hpp"
#include "qparisi/quantum.hpp"
#include "qparisi/rsb.hpp"
#include "qparisi/trotter.hpp"

namespace qparisi::cli {

namespace {

std::vector<OptionSpec> run_options(const std::string& format) {
  return {{"seed", "1", "root seed"},
          {"workers", "1", "worker threads (results do not depend on it)"},
          {"out", "", "output path (stdout when empty)"},
          {"format", format, "csv or json"},
          {"manifest", "", "manifest path (default <out>.manifest.json or ./<command>.manifest.json)"}};
}

std::vector<OptionSpec> join(std::vector<OptionSpec> a, const std::vector<OptionSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<OptionSpec> field_options(const std::string& beta, const std::string& b) {
  return {{"beta", beta, "inverse temperature"}, {"b", b, "transverse field"}, {"c", "0", "longitudinal field"}};
}

std::vector<OptionSpec> rsb_options() {
  return {{"k", "1", "RSB depth"},
          {"m-levels", "", "m_1..m_{k-1}, comma separated"},
          {"q-levels", "", "q_1..q_k, comma separated"},
          {"y", "", "kernel profile: one value (uniform) or floor(M/2)+1 reduced values"},
          {"quad", "gh", "gh (nested Gauss-Hermite) or mc"},
          {"nodes", "24", "Gauss-Hermite nodes per level"},
          {"inner-samples", "2000", "Monte Carlo samples per level when --quad mc"}};
}

int positive(const Settings& s, const std::string& key) {
  const int v = s.integer(key);
  if (v < 1) throw UsageError("--" + key + " must be >= 1");
  return v;
}

std::size_t count(const Settings& s, const std::string& key, std::size_t min = 2) {
  const int v = s.integer(key);
  if (v < static_cast<int>(min)) throw UsageError("--" + key + " must be >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

ModelParams model_params(const Settings& s, int n_spins) {
  ModelParams p{s.number("beta"), s.number("b"), s.number("c"), n_spins};
  if (!(p.beta > 0.0)) throw UsageError("--beta must be > 0");
  p.validate();
  return p;
}

QuadratureSpec quad_spec(const Settings& s) {
  QuadratureSpec q;
  const auto mode = s.text("quad");
  if (mode == "gh") {
    q.mode = QuadratureSpec::Mode::GaussHermite;
  } else if (mode == "mc") {
    q.mode = QuadratureSpec::Mode::MonteCarlo;
  } else {
    throw UsageError("--quad must be gh or mc");
  }
  q.nodes = s.integer("nodes");
  q.samples = s.integer("inner-samples");
  q.seed = s.seed("seed");
  q.validate();
  return q;
}

RsbParams rsb_params(const Settings& s) {
  const int k = positive(s, "k");
  auto q = s.numbers("q-levels");
  auto m = s.numbers("m-levels");
  if (q.empty())
    for (int j = 1; j <= k; ++j) q.push_back(static_cast<double>(j) / (k + 1));
  if (m.empty())
    for (int j = 1; j < k; ++j) m.push_back(static_cast<double>(j) / k);
  if (static_cast<int>(q.size()) != k) throw UsageError("--q-levels needs exactly k values");
  if (static_cast<int>(m.size()) != k - 1) throw UsageError("--m-levels needs exactly k-1 values");
  return RsbParams::make(m, q);
}

SelfOverlapKernel kernel_from(const Settings& s, int m_slices) {
  const auto y = s.numbers("y");
  if (y.empty()) return SelfOverlapKernel::zero(m_slices);
  if (y.size() == 1) return SelfOverlapKernel::constant(m_slices, y[0]);
  if (static_cast<int>(y.size()) != SelfOverlapKernel::reduced_size(m_slices))
    throw UsageError("--y needs 1 or floor(M/2)+1 values");
  return SelfOverlapKernel::from_reduced(m_slices, y);
}

Json to_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json quad_json(const QuadratureSpec& q) {
  return Json{{"mode", q.mode == QuadratureSpec::Mode::GaussHermite ? "gh" : "mc"},
              {"nodes", q.nodes},
              {"samples", q.samples},
              {"seed", q.seed}};
}

Json parisi_record(const Settings& s, const RsbParams& rsb, const SelfOverlapKernel& kernel, int p, double value,
                   const StationarityReport& st, const QuadratureSpec& quad, int budget_used) {
  Json one_sided = Json::array();
  for (bool b : st.one_sided) one_sided.push_back(b);
  return Json{{"k", rsb.k},
              {"m", to_json(rsb.m)},
              {"q", to_json(rsb.q)},
              {"y_profile", to_json(kernel.profile())},
              {"beta", s.number("beta")},
              {"b", s.number("b")},
              {"c", s.number("c")},
              {"M", kernel.m_slices()},
              {"p", p},
              {"value", value},
              {"residuals", to_json(st.residuals)},
              {"residuals_one_sided", one_sided},
              {"quad", quad_json(quad)},
              {"budget_used", budget_used},
              {"seed", s.seed("seed")}};
}

InterpModel interp_model(const Settings& s, int n_spins) {
  const int m = positive(s, "m-slices");
  return InterpModel::make(model_params(s, n_spins), m, rsb_params(s), kernel_from(s, m), quad_spec(s));
}

// --------------------------------------------------------------------------

CommandOutput cmd_ed(const Settings& s) {
  const int n = positive(s, "n");
  const auto samples = count(s, "samples");
  const auto seed = s.seed("seed");
  const int workers = positive(s, "workers");
  Table t{{"n", "beta", "b", "c", "samples", "seed", "mean", "stderr"}, {}};
  const auto betas = s.numbers("beta");
  const auto bs = s.numbers("b");
  if (betas.empty() || bs.empty()) throw UsageError("--beta and --b need at least one value");
  for (double beta : betas) {
    if (!(beta > 0.0)) throw UsageError("--beta must be > 0");
    for (double b : bs) {
      const ModelParams p{beta, b, s.number("c"), n};
      const auto est = quenched_free_energy(p, samples, seed, workers);
      t.add(Json{{"n", n}, {"beta", beta}, {"b", b}, {"c", p.c}, {"samples", samples}, {"seed", seed},
                 {"mean", est.mean}, {"stderr", est.std_error}});
    }
  }
  return t;
}

CommandOutput cmd_pspin(const Settings& s) {
  const int p = s.integer("p");
  const int n = positive(s, "n");
  const auto samples = count(s, "samples");
  const auto seed = s.seed("seed");
  const auto rows = pspin_covariance_check(p, n, samples, seed, s.numbers("rho"), positive(s, "workers"));
  Table t{{"p", "n", "rho", "empirical", "stderr", "exact", "xi", "correction", "correction_num", "correction_den",
           "samples", "seed"},
          {}};
  for (const auto& r : rows)
    t.add(Json{{"p", p}, {"n", n}, {"rho", r.rho}, {"empirical", r.empirical}, {"stderr", r.std_error},
               {"exact", r.exact}, {"xi", r.xi}, {"correction", r.correction},
               {"correction_num", r.correction_numerator}, {"correction_den", r.correction_denominator},
               {"samples", samples}, {"seed", seed}});
  return t;
}

CommandOutput cmd_trotter_check(const Settings& s) {
  const auto seed = s.seed("seed");
  const auto ns = s.integers("n");
  const auto ms = s.integers("m-slices");
  if (ns.empty() || ms.empty()) throw UsageError("--n and --m-slices need at least one value");
  if (s.number("b") == 0.0)
    std::cerr << "note: b = 0, Trotter slices lock and every M reproduces the classical log Z exactly\n";
  Table t{{"n", "m_slices", "beta", "b", "c", "seed", "log_z_trotter", "log_z_exact", "abs_error"}, {}};
  for (int n : ns) {
    if (n < 1) throw UsageError("--n values must be >= 1");
    for (const auto& r : trotter_convergence(model_params(s, n), ms, seed))
      t.add(Json{{"n", r.n_spins}, {"m_slices", r.m_slices}, {"beta", r.beta}, {"b", r.b}, {"c", r.c},
                 {"seed", r.seed}, {"log_z_trotter", r.log_z_trotter}, {"log_z_exact", r.log_z_exact},
                 {"abs_error", r.abs_error}});
  }
  return t;
}

CommandOutput cmd_selfoverlap_check(const Settings& s) {
  const int n = positive(s, "n");
  const int m = s.integer("m-slices");
  const auto p = model_params(s, n);
  const auto samples = count(s, "samples", 1);
  const auto inner = count(s, "inner-samples", 4);
  const auto seed = s.seed("seed");
  const double scale = s.number("imag-scale");
  Table t{{"n", "m_slices", "beta", "b", "c", "sample", "seed", "lhs", "lhs_stderr", "rhs", "gap", "n_mc"}, {}};
  const RngStream root(seed);
  for (std::size_t d = 0; d < samples; ++d) {
    const auto g = DisorderSample::draw(2, n, root.child(d).child(0));
    const auto r = corrected_identity_check(p, g, m, inner, root.child(d).child(1), scale);
    t.add(Json{{"n", n}, {"m_slices", m}, {"beta", p.beta}, {"b", p.b}, {"c", p.c}, {"sample", d}, {"seed", seed},
               {"lhs", r.lhs}, {"lhs_stderr", r.lhs_std_error}, {"rhs", r.rhs}, {"gap", r.gap}, {"n_mc", r.n_mc}});
  }
  return t;
}

CommandOutput cmd_parisi_eval(const Settings& s) {
  const int m = positive(s, "m-slices");
  const int p = s.integer("p");
  const MixtureFunction mix(p);
  const auto rsb = rsb_params(s);
  const auto kernel = kernel_from(s, m);
  const auto quad = quad_spec(s);
  const SingleSiteModel site(s.number("beta"), s.number("b"), s.number("c"), m, kernel);
  const double value = parisi_functional(rsb, mix, site, quad);
  const auto st = stationarity_residual(rsb, mix, site, quad);
  return parisi_record(s, rsb, kernel, p, value, st, quad, 1);
}

CommandOutput cmd_parisi_opt(const Settings& s) {
  const int m = positive(s, "m-slices");
  const int p = s.integer("p");
  const MixtureFunction mix(p);
  const auto kernel = kernel_from(s, m);
  const auto quad = quad_spec(s);
  const SingleSiteModel site(s.number("beta"), s.number("b"), s.number("c"), m, kernel);
  const auto opt = optimize_rsb(positive(s, "k"), mix, site, quad, s.integer("budget"), s.seed("seed"));
  const auto st = stationarity_residual(opt.params, mix, site, quad);
  auto rec = parisi_record(s, opt.params, kernel, p, opt.value, st, quad, opt.evaluations);
  rec["converged"] = opt.converged;
  return rec;
}

CommandOutput cmd_hopflax(const Settings& s) {
  const int m = positive(s, "m-slices");
  const int p = s.integer("p");
  const MixtureFunction mix(p);
  const auto quad = quad_spec(s);
  const auto r = hopf_lax_sup(positive(s, "k"), mix, s.number("beta"), s.number("b"), s.number("c"), m, quad,
                              s.integer("budget"), positive(s, "sweeps"));
  const SingleSiteModel site(s.number("beta"), s.number("b"), s.number("c"), m, r.x);
  const auto st = stationarity_residual(r.inner.params, mix, site, quad);
  auto rec = parisi_record(s, r.inner.params, r.x, p, r.value, st, quad, r.evaluations);
  rec["inner_value"] = r.inner.value;
  rec["converged"] = r.converged;
  return rec;
}

CommandOutput cmd_interp_guerra(const Settings& s) {
  const int n = positive(s, "n");
  const auto model = interp_model(s, n);
  const auto samples = count(s, "samples");
  const auto seed = s.seed("seed");
  const double t = s.number("t");
  const auto r = guerra_identity_residual(t, model, samples, seed, positive(s, "workers"), positive(s, "gl-nodes"));
  return Json{{"t", t},
              {"N", n},
              {"M", model.m_slices},
              {"k", model.rsb.k},
              {"m", to_json(model.rsb.m)},
              {"q", to_json(model.rsb.q)},
              {"y_profile", to_json(model.kernel.profile())},
              {"beta", model.params.beta},
              {"b", model.params.b},
              {"c", model.params.c},
              {"quad", quad_json(model.quad)},
              {"n_samples", samples},
              {"seed", seed},
              {"lhs", r.lhs},
              {"lhs_stderr", r.lhs_std_error},
              {"rhs", r.rhs},
              {"parisi", r.parisi},
              {"remainder", r.remainder},
              {"t_integral", r.t_integral},
              {"gap", r.gap},
              {"stderr", r.std_error}};
}

CommandOutput cmd_interp_concentration(const Settings& s) {
  const auto sizes = s.integers("n");
  if (sizes.empty()) throw UsageError("--n needs at least one value");
  const auto model = interp_model(s, sizes.front());
  const auto samples = count(s, "samples");
  const auto seed = s.seed("seed");
  const int workers = positive(s, "workers");
  const double u = s.number("u");
  const int r = positive(s, "r");
  const double sp = s.number("s");
  const auto scan = concentration_scan(u, r, sp, sizes, model, samples, seed, workers);
  Table t{{"quantity", "s", "t", "N", "M", "k", "r", "u", "lambda", "estimate", "stderr", "n_samples", "seed"}, {}};
  auto row = [&](const char* what, int n, double lambda, double est, double se) {
    t.add(Json{{"quantity", what}, {"s", sp}, {"t", 1.0}, {"N", n}, {"M", model.m_slices}, {"k", model.rsb.k},
               {"r", r}, {"u", u}, {"lambda", lambda}, {"estimate", est}, {"stderr", se}, {"n_samples", samples},
               {"seed", seed}});
  };
  for (const auto& c : scan.rows) {
    row("probability", c.n_spins, 0.0, c.probability.mean, c.probability.std_error);
    if (c.zero_events) std::cerr << "note: no events at N=" << c.n_spins << "\n";
  }
  if (scan.slope_valid) row("log_probability_slope", 0, 0.0, scan.slope, 0.0);
  if (s.has("lambda")) {
    const double lambda = s.number("lambda");
    for (int n : sizes) {
      auto mdl = model;
      mdl.params.n_spins = n;
      const auto tp = tilted_partitions(sp, TiltParams{r, std::min(u, 4.0), lambda}, mdl, samples, seed, workers);
      row("log_v", n, lambda, tp.log_v.mean, tp.log_v.std_error);
      row("log_w", n, lambda, tp.log_w.mean, tp.log_w.std_error);
      if (lambda == 0.0) {
        const auto phi = phi_estimate(InterpPoint{sp, 1.0}, mdl, samples, seed ^ 0x9e3779b97f4a7c15ULL, workers);
        row("two_phi", n, lambda, 2.0 * phi.mean, 2.0 * phi.std_error);
      }
    }
  }
  return t;
}

CommandOutput cmd_interp_variance(const Settings& s) {
  const auto sizes = s.integers("n");
  if (sizes.empty()) throw UsageError("--n needs at least one value");
  const int m = positive(s, "m-slices");
  const auto kernel = kernel_from(s, m);
  const auto samples = count(s, "samples");
  const auto seed = s.seed("seed");
  const double t = s.number("t");
  Table tab{{"t", "N", "M", "intra", "intra_stderr", "inter", "total", "n_samples", "seed"}, {}};
  for (int n : sizes) {
    const auto d = selfoverlap_variance_diag(t, model_params(s, n), m, kernel, samples, seed, positive(s, "workers"));
    tab.add(Json{{"t", t}, {"N", n}, {"M", m}, {"intra", d.intra}, {"intra_stderr", d.intra_std_error},
                 {"inter", d.inter}, {"total", d.total}, {"n_samples", samples}, {"seed", seed}});
  }
  return tab;
}

}  // namespace

const std::vector<Command>& all_commands() {
  static const std::vector<Command> commands = [] {
    std::vector<Command> c;
    c.push_back({"ed", "quenched free energy (1/N) E log Z by exact diagonalisation over a (beta, b) grid",
                 join(join({{"n", "4", "number of spins"}, {"samples", "200", "disorder samples"}},
                           field_options("1.0", "0.5")),
                      run_options("csv")),
                 cmd_ed});
    c.push_back({"pspin", "p-spin covariance against the exact finite-N value",
                 join({{"p", "2", "interaction order (even)"},
                       {"n", "8", "number of spins"},
                       {"samples", "2000", "disorder samples"},
                       {"rho", "", "overlaps to test (default: all reachable)"}},
                      run_options("csv")),
                 cmd_pspin});
    c.push_back({"trotter-check", "Trotter path-sum log Z against exact diagonalisation as M grows",
                 join(join({{"n", "1,2,3", "spin counts"}, {"m-slices", "4,8,16", "Trotter slice counts"}},
                           field_options("1.0", "0.5")),
                      run_options("csv")),
                 cmd_trotter_check});
    c.push_back({"selfoverlap-check", "annealed self-overlap identity on the Trotter path space",
                 join(join({{"n", "2", "number of spins"},
                            {"m-slices", "2", "Trotter slices"},
                            {"samples", "1", "disorder samples"},
                            {"inner-samples", "10000", "imaginary-coupling samples (even)"},
                            {"imag-scale", "1", "scale of the imaginary coupling"}},
                           field_options("0.8", "0.5")),
                      run_options("csv")),
                 cmd_selfoverlap_check});
    const auto parisi_base = join(join({{"p", "2", "interaction order (even)"}, {"m-slices", "4", "Trotter slices"}},
                                       field_options("0.8", "0")),
                                  rsb_options());
    c.push_back({"parisi-eval", "Parisi functional at given (m, q, y)", join(parisi_base, run_options("json")),
                 cmd_parisi_eval});
    c.push_back({"parisi-opt", "minimise the Parisi functional over (m, q) at fixed y",
                 join(join(parisi_base, {{"budget", "600", "functional evaluations"}}), run_options("json")),
                 cmd_parisi_opt});
    c.push_back({"hopflax", "sup over kernels of the penalised optimum (quantum Parisi value)",
                 join(join(parisi_base, {{"budget", "400", "evaluations per inner optimisation"},
                                         {"sweeps", "8", "coordinate sweeps over the kernel profile"}}),
                      run_options("json")),
                 cmd_hopflax});
    const auto interp_base =
        join(join({{"m-slices", "2", "Trotter slices"}}, field_options("0.7", "0.6")), rsb_options());
    c.push_back({"interp-guerra", "Guerra identity residual at tiny sizes",
                 join(join(interp_base, {{"n", "2", "number of spins"},
                                         {"t", "1", "self-overlap interpolation parameter"},
                                         {"samples", "200", "disorder samples"},
                                         {"gl-nodes", "8", "Gauss-Legendre nodes for the s and t integrals"}}),
                      run_options("json")),
                 cmd_interp_guerra});
    c.push_back({"interp-concentration", "replica deviation tail probabilities as N grows",
                 join(join(interp_base, {{"n", "2,3,4", "spin counts"},
                                         {"u", "1.5", "deviation threshold"},
                                         {"r", "1", "overlap level"},
                                         {"s", "0", "interpolation parameter"},
                                         {"samples", "200", "disorder samples"},
                                         {"lambda", "", "also report tilted partitions at this tilt"}}),
                      run_options("csv")),
                 cmd_interp_concentration});
    c.push_back({"interp-variance", "thermal and disorder variance of the self-overlap",
                 join(join({{"m-slices", "2", "Trotter slices"},
                            {"n", "2,3,4", "spin counts"},
                            {"t", "1", "self-overlap interpolation parameter"},
                            {"y", "", "kernel profile"},
                            {"samples", "200", "disorder samples"}},
                           field_options("0.7", "0.6")),
                      run_options("csv")),
                 cmd_interp_variance});
    return c;
  }();
  return commands;
}

}  // namespace qparisi::cli
