#include "qparisi/trotter.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qparisi/config_space.hpp"

namespace qparisi {

namespace {

void check_slices(int m_slices) {
  if (m_slices < 2) throw std::invalid_argument("Trotter representation needs M >= 2");
}

void require_quantum(const TrotterConfig& trotter, const char* what) {
  if (trotter.classical)
    throw std::invalid_argument(std::string(what) + ": b = 0 is classical; use the N-spin classical energy");
}

void check_shapes(const PathConfiguration& config, const DisorderSample& sample, const ModelParams& params,
                  const TrotterConfig& trotter) {
  if (config.n_spins() != params.n_spins || sample.n_spins != params.n_spins || sample.order != 2)
    throw std::invalid_argument("path energy: inconsistent N or coupling order");
  if (config.m_slices() != trotter.m_slices) throw std::invalid_argument("path energy: inconsistent M");
}

double classical_log_partition(const ModelParams& params, const DisorderSample& sample) {
  LogSumExp lse;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << params.n_spins); ++s)
    lse.add(-params.beta * classical_sk_energy(s, sample, params.c));
  return lse.value();
}

}  // namespace

std::optional<double> trotter_coupling(double beta, double b, int m_slices) {
  check_slices(m_slices);
  if (!(beta > 0.0)) throw std::invalid_argument("trotter_coupling: beta must be > 0");
  if (b == 0.0) return std::nullopt;
  if (b < 0.0) throw std::invalid_argument("trotter_coupling: b must be >= 0");
  return std::atanh(std::exp(-2.0 * beta * b / m_slices));
}

std::optional<double> log_prefactor(double beta, double b, int m_slices, int n_spins) {
  check_slices(m_slices);
  if (b == 0.0) return std::nullopt;
  if (b < 0.0) throw std::invalid_argument("log_prefactor: b must be >= 0");
  const double a = 2.0 * beta * b / m_slices;
  return 0.5 * m_slices * n_spins * std::log(0.5 * std::sinh(a));
}

TrotterConfig TrotterConfig::make(double beta, double b, int m_slices, int n_spins) {
  TrotterConfig t;
  t.m_slices = m_slices;
  t.beta = beta;
  const auto k = trotter_coupling(beta, b, m_slices);
  if (!k) {
    t.classical = true;
    return t;
  }
  t.beta_k = *k;
  t.log_prefactor = *qparisi::log_prefactor(beta, b, m_slices, n_spins);
  return t;
}

PathConfiguration::PathConfiguration(int m_slices, int n_spins)
    : m_(m_slices), n_(n_spins), spins_(static_cast<std::size_t>(m_slices * n_spins), 1) {
  if (m_slices < 1 || n_spins < 1) throw std::invalid_argument("PathConfiguration: M and N must be >= 1");
}

PathConfiguration PathConfiguration::from_index(int m_slices, int n_spins, std::uint64_t index) {
  PathConfiguration c(m_slices, n_spins);
  for (int l = 0; l < m_slices; ++l)
    for (int i = 0; i < n_spins; ++i) c.set(l, i, 1 - 2 * static_cast<int>((index >> (l * n_spins + i)) & 1U));
  return c;
}

void PathConfiguration::set(int l, int i, int value) {
  if (value != 1 && value != -1) throw std::invalid_argument("PathConfiguration: spins must be +1 or -1");
  spins_[static_cast<std::size_t>(wrap(l) * n_ + i)] = static_cast<std::int8_t>(value);
}

PathConfiguration PathConfiguration::flipped() const {
  PathConfiguration c = *this;
  for (auto& s : c.spins_) s = static_cast<std::int8_t>(-s);
  return c;
}

double path_energy(const PathConfiguration& config, const DisorderSample& sample, const ModelParams& params,
                   const TrotterConfig& trotter) {
  require_quantum(trotter, "path_energy");
  check_shapes(config, sample, params, trotter);
  const int m = trotter.m_slices;
  const int n = params.n_spins;
  const double pair_scale = 1.0 / (m * std::sqrt(static_cast<double>(n)));
  const double k = trotter.coupling();
  double e = 0.0;
  for (int l = 0; l < m; ++l) {
    double pair = 0.0;
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pair += sample.values[idx++] * config(l, i) * config(l, j);
    double field = 0.0;
    double bond = 0.0;
    for (int i = 0; i < n; ++i) {
      field += config(l, i);
      bond += config(l, i) * config(l + 1, i);
    }
    e -= pair_scale * pair + params.c / m * field + k * bond;
  }
  return e;
}

double self_overlap(const PathConfiguration& a, const PathConfiguration& b, int l, int lp) {
  if (a.n_spins() != b.n_spins()) throw std::invalid_argument("self_overlap: N mismatch");
  double s = 0.0;
  for (int i = 0; i < a.n_spins(); ++i) s += a(l, i) * b(lp, i);
  return s / a.n_spins();
}

double effective_path_energy(const PathConfiguration& config, const DisorderSample& sample,
                             const ModelParams& params, const TrotterConfig& trotter, double t,
                             const SelfOverlapKernel& kernel) {
  if (kernel.m_slices() != trotter.m_slices) throw std::invalid_argument("effective_path_energy: kernel size != M");
  const double base = path_energy(config, sample, params, trotter);
  const int m = trotter.m_slices;
  double penalty = 0.0;
  for (int l = 0; l < m; ++l) {
    for (int lp = 0; lp < m; ++lp) {
      const double rho = self_overlap(config, config, l, lp);
      penalty += t * rho * rho - 2.0 * rho * kernel(l, lp);
    }
  }
  return base + params.beta * params.n_spins / (4.0 * m * m) * penalty;
}

double gray_code_log_partition(const ModelParams& params, const DisorderSample& sample, int m_slices) {
  params.validate();
  const auto trotter = TrotterConfig::make(params.beta, params.b, m_slices, params.n_spins);
  if (trotter.classical) return classical_log_partition(params, sample);
  const int n = params.n_spins;
  const int bits = m_slices * n;
  if (bits > kMaxGrayPathSpins)
    throw std::invalid_argument("gray_code_log_partition: M*N=" + std::to_string(bits) + " exceeds cap " +
                                std::to_string(kMaxGrayPathSpins));
  PathConfiguration config(m_slices, n);
  // symmetric coupling matrix for local fields
  std::vector<double> g(static_cast<std::size_t>(n * n), 0.0);
  {
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) g[i * n + j] = g[j * n + i] = sample.values[idx++];
  }
  const double pair_scale = 1.0 / (m_slices * std::sqrt(static_cast<double>(n)));
  const double field = params.c / m_slices;
  const double k = trotter.coupling();
  double energy = path_energy(config, sample, params, trotter);
  LogSumExp lse;
  lse.add(-params.beta * energy);
  const std::uint64_t total = std::uint64_t{1} << bits;
  for (std::uint64_t step = 1; step < total; ++step) {
    const int bit = std::countr_zero(step);
    const int l = bit / n;
    const int i = bit % n;
    double h = field + k * (config(l - 1, i) + config(l + 1, i));
    for (int j = 0; j < n; ++j)
      if (j != i) h += pair_scale * g[i * n + j] * config(l, j);
    energy += 2.0 * config(l, i) * h;
    config.flip(l, i);
    if ((step & 0xFFFF) == 0) energy = path_energy(config, sample, params, trotter);
    lse.add(-params.beta * energy);
  }
  return trotter.log_prefactor + lse.value();
}

double transfer_matrix_log_partition(const ModelParams& params, const DisorderSample& sample, int m_slices) {
  params.validate();
  const auto trotter = TrotterConfig::make(params.beta, params.b, m_slices, params.n_spins);
  if (trotter.classical) return classical_log_partition(params, sample);
  const int n = params.n_spins;
  if (n > kDefaultMaxSpins) throw std::invalid_argument("transfer_matrix_log_partition: N exceeds dense cap");
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  Eigen::VectorXd half(dim);
  for (Eigen::Index s = 0; s < dim; ++s)
    half(s) = -0.5 * params.beta * classical_sk_energy(static_cast<std::uint64_t>(s), sample, params.c) / m_slices;
  Eigen::MatrixXd t(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    for (Eigen::Index sp = 0; sp < dim; ++sp) {
      const int overlap = n - 2 * std::popcount(static_cast<std::uint64_t>(s ^ sp));
      t(s, sp) = std::exp(half(s) + half(sp) + trotter.beta_k * overlap);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t, Eigen::EigenvaluesOnly);
  const auto& lam = solver.eigenvalues();
  std::vector<double> logs(static_cast<std::size_t>(dim));
  for (Eigen::Index a = 0; a < dim; ++a) {
    if (!(lam(a) > 0.0)) throw EstimatorFailure("transfer matrix lost positive definiteness");
    logs[static_cast<std::size_t>(a)] = m_slices * std::log(lam(a));
  }
  return trotter.log_prefactor + log_sum_exp(logs);
}

double enumerate_log_partition(const ModelParams& params, const DisorderSample& sample, int m_slices) {
  check_slices(m_slices);
  if (m_slices * params.n_spins <= kMaxGrayPathSpins) return gray_code_log_partition(params, sample, m_slices);
  return transfer_matrix_log_partition(params, sample, m_slices);
}

double effective_log_sum(const ModelParams& params, const DisorderSample& sample, const TrotterConfig& trotter,
                         double t, const SelfOverlapKernel& kernel) {
  require_quantum(trotter, "effective_log_sum");
  const int m = trotter.m_slices;
  const int n = params.n_spins;
  const double beta = params.beta;
  PathSpace space(m, n);
  StructuralTerms terms;
  terms.bond = trotter.beta_k;
  terms.kernel = &kernel;
  terms.kernel_coeff = beta * beta / (2.0 * m * m);
  terms.overlap_sq = -beta * beta * t / (4.0 * m * m * n);
  auto logw = structural_log_weights(space, terms);
  add_slice_term(space, slice_pair_sums(sample), beta / (m * std::sqrt(static_cast<double>(n))), logw);
  std::vector<double> h(static_cast<std::size_t>(n), beta * params.c / m);
  add_column_field(space, h, logw);
  return log_sum_exp(logw);
}

IdentityCheck corrected_identity_check(const ModelParams& params, const DisorderSample& sample, int m_slices,
                                       std::size_t n_mc, const RngStream& stream, double imag_scale) {
  params.validate();
  if (n_mc < 4 || n_mc % 2 != 0) throw std::invalid_argument("corrected_identity_check: n_mc must be even, >= 4");
  const int n = params.n_spins;
  if (m_slices * n > 16) throw std::invalid_argument("corrected_identity_check: M*N must be <= 16");
  const auto trotter = TrotterConfig::make(params.beta, params.b, m_slices, n);
  require_quantum(trotter, "corrected_identity_check");
  const double beta = params.beta;
  const double pair_scale = beta / (m_slices * std::sqrt(static_cast<double>(n)));

  PathSpace space(m_slices, n);
  StructuralTerms terms;
  terms.bond = trotter.beta_k;
  auto real_logw = structural_log_weights(space, terms);
  add_slice_term(space, slice_pair_sums(sample), pair_scale, real_logw);
  std::vector<double> h(static_cast<std::size_t>(n), beta * params.c / m_slices);
  add_column_field(space, h, real_logw);
  std::vector<double> weight(space.size());
  for (std::size_t x = 0; x < weight.size(); ++x) weight[x] = std::exp(real_logw[x]);

  const std::size_t pairs = n_mc / 2;
  std::vector<double> pair_means(pairs);
  std::vector<double> phase(space.size());
  for (std::size_t k = 0; k < pairs; ++k) {
    auto g1 = DisorderSample::draw(2, n, stream.child(k));
    for (auto& v : g1.values) v *= imag_scale;
    const auto table = slice_pair_sums(g1);
    std::fill(phase.begin(), phase.end(), 0.0);
    add_slice_term(space, table, pair_scale, phase);
    // (S(g1) + S(-g1)) / 2 = sum_sigma w(sigma) cos(phase)
    KahanSum acc;
    for (std::size_t x = 0; x < weight.size(); ++x) acc.add(weight[x] * std::cos(phase[x]));
    pair_means[k] = acc.value();
  }
  const auto est = mc_estimate(pair_means);

  const SelfOverlapKernel zero = SelfOverlapKernel::zero(m_slices);
  IdentityCheck out;
  out.n_mc = n_mc;
  out.lhs = est.mean;
  out.lhs_std_error = est.std_error;
  out.rhs = std::exp(beta * beta / 4.0 + effective_log_sum(params, sample, trotter, 1.0, zero));
  out.gap = est.std_error > 0.0 ? (out.lhs - out.rhs) / est.std_error
                                : (out.lhs == out.rhs ? 0.0 : std::copysign(INFINITY, out.lhs - out.rhs));
  return out;
}

std::vector<ConvergenceRow> trotter_convergence(const ModelParams& params, const std::vector<int>& m_list,
                                                std::uint64_t seed) {
  params.validate();
  const auto sample = DisorderSample::draw(2, params.n_spins, RngStream(seed).child(0));
  const double exact = log_partition(spectral_decompose(build_sk_hamiltonian(params, sample)), params.beta);
  std::vector<ConvergenceRow> rows;
  for (int m : m_list) {
    ConvergenceRow r;
    r.n_spins = params.n_spins;
    r.m_slices = m;
    r.beta = params.beta;
    r.b = params.b;
    r.c = params.c;
    r.seed = seed;
    r.log_z_trotter = enumerate_log_partition(params, sample, m);
    r.log_z_exact = exact;
    r.abs_error = std::abs(r.log_z_trotter - exact);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace qparisi
