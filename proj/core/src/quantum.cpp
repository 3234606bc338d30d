#include "qparisi/quantum.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qparisi {

namespace {

void check_cap(int n_spins, int max_spins) {
  if (n_spins < 1) throw std::invalid_argument("n_spins must be >= 1");
  if (n_spins > max_spins)
    throw std::invalid_argument("n_spins=" + std::to_string(n_spins) + " exceeds the dense cap " +
                                std::to_string(max_spins));
}

std::size_t dim_of(int n_spins) { return std::size_t{1} << n_spins; }

// Gibbs weights exp(-beta (E - E_min)) normalised to 1.
Eigen::VectorXd gibbs_probabilities(const SpectralData& spec, double beta) {
  const double e0 = spec.eigenvalues.minCoeff();
  Eigen::VectorXd p = (-beta * (spec.eigenvalues.array() - e0)).exp().matrix();
  return p / p.sum();
}

double double_factorial_ratio(int p, int n) {
  // p! / (2 N^{p-1})
  double f = 1.0;
  for (int i = 2; i <= p; ++i) f *= i;
  return f / (2.0 * std::pow(static_cast<double>(n), p - 1));
}

Eigen::VectorXd diagonal_energies(const ModelParams& params, const DisorderSample& sample, bool pspin) {
  const std::size_t dim = dim_of(params.n_spins);
  Eigen::VectorXd diag(dim);
  for (std::size_t s = 0; s < dim; ++s) {
    double field = 0.0;
    for (int i = 0; i < params.n_spins; ++i) field += spin_of(s, i);
    const double u = pspin ? pspin_interaction(s, sample) : classical_sk_energy(s, sample, 0.0);
    diag(static_cast<Eigen::Index>(s)) = u - params.c * field;
  }
  return diag;
}

Eigen::MatrixXd with_transverse_field(const Eigen::VectorXd& diag, int n_spins, double b) {
  const std::size_t dim = dim_of(n_spins);
  Eigen::MatrixXd h = diag.asDiagonal();
  if (b != 0.0) {
    for (std::size_t s = 0; s < dim; ++s)
      for (int i = 0; i < n_spins; ++i) h(static_cast<Eigen::Index>(s ^ (std::size_t{1} << i)),
                                          static_cast<Eigen::Index>(s)) -= b;
  }
  return h;
}

}  // namespace

void ModelParams::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be > 0");
  if (n_spins < 1) throw std::invalid_argument("n_spins must be >= 1");
  if (!std::isfinite(b) || !std::isfinite(c)) throw std::invalid_argument("b and c must be finite");
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

std::vector<std::vector<int>> index_tuples(int n, int p) {
  std::vector<std::vector<int>> out;
  if (p > n || p < 1) return out;
  std::vector<int> idx(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    out.push_back(idx);
    int j = p - 1;
    while (j >= 0 && idx[static_cast<std::size_t>(j)] == n - p + j) --j;
    if (j < 0) break;
    ++idx[static_cast<std::size_t>(j)];
    for (int t = j + 1; t < p; ++t) idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
  }
  return out;
}

DisorderSample DisorderSample::draw(int order, int n_spins, const RngStream& stream) {
  DisorderSample s;
  s.order = order;
  s.n_spins = n_spins;
  s.values = gaussian_samples(stream, binomial(n_spins, order));
  return s;
}

DisorderSample DisorderSample::zeros(int order, int n_spins) {
  DisorderSample s;
  s.order = order;
  s.n_spins = n_spins;
  s.values.assign(binomial(n_spins, order), 0.0);
  return s;
}

void DisorderSample::validate() const {
  if (order < 1) throw std::invalid_argument("DisorderSample: order must be >= 1");
  if (values.size() != binomial(n_spins, order))
    throw std::invalid_argument("DisorderSample: value count does not match binomial(N, p)");
}

int SpectralData::n_spins() const {
  const auto dim = static_cast<std::size_t>(eigenvalues.size());
  int n = 0;
  while ((std::size_t{1} << n) < dim) ++n;
  return n;
}

Eigen::MatrixXd sz_operator(int n_spins, int site) {
  const std::size_t dim = dim_of(n_spins);
  Eigen::VectorXd d(dim);
  for (std::size_t s = 0; s < dim; ++s) d(static_cast<Eigen::Index>(s)) = spin_of(s, site);
  return d.asDiagonal();
}

Eigen::MatrixXd sx_operator(int n_spins, int site) {
  const std::size_t dim = dim_of(n_spins);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t s = 0; s < dim; ++s)
    m(static_cast<Eigen::Index>(s ^ (std::size_t{1} << site)), static_cast<Eigen::Index>(s)) = 1.0;
  return m;
}

double classical_sk_energy(std::uint64_t state, const DisorderSample& sample, double c) {
  const int n = sample.n_spins;
  double pair = 0.0;
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i) {
    const int si = spin_of(state, i);
    for (int j = i + 1; j < n; ++j) pair += sample.values[idx++] * si * spin_of(state, j);
  }
  double field = 0.0;
  for (int i = 0; i < n; ++i) field += spin_of(state, i);
  return -pair / std::sqrt(static_cast<double>(n)) - c * field;
}

double pspin_interaction(std::uint64_t state, const DisorderSample& sample) {
  const int n = sample.n_spins;
  const int p = sample.order;
  const auto tuples = index_tuples(n, p);
  double acc = 0.0;
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    int prod = 1;
    for (int i : tuples[t]) prod *= spin_of(state, i);
    acc += sample.values[t] * prod;
  }
  return -std::sqrt(double_factorial_ratio(p, n)) * acc;
}

Eigen::MatrixXd build_sk_hamiltonian(const ModelParams& params, const DisorderSample& sample, int max_spins) {
  params.validate();
  check_cap(params.n_spins, max_spins);
  sample.validate();
  if (sample.order != 2) throw std::invalid_argument("build_sk_hamiltonian: sample order must be 2");
  if (sample.n_spins != params.n_spins) throw std::invalid_argument("build_sk_hamiltonian: dimension mismatch");
  return with_transverse_field(diagonal_energies(params, sample, false), params.n_spins, params.b);
}

Eigen::MatrixXd build_pspin_hamiltonian(const ModelParams& params, const DisorderSample& sample, int max_spins) {
  params.validate();
  check_cap(params.n_spins, max_spins);
  sample.validate();
  if (sample.order < 2 || sample.order % 2 != 0)
    throw std::invalid_argument("build_pspin_hamiltonian: p must be an even integer >= 2");
  if (sample.n_spins != params.n_spins) throw std::invalid_argument("build_pspin_hamiltonian: dimension mismatch");
  return with_transverse_field(diagonal_energies(params, sample, true), params.n_spins, params.b);
}

SpectralData spectral_decompose(const Eigen::MatrixXd& h) {
  if (h.rows() != h.cols() || h.rows() == 0) throw std::invalid_argument("spectral_decompose: not square");
  const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("spectral_decompose: operator is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw std::runtime_error("spectral_decompose: eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double log_partition(const SpectralData& spec, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("log_partition: beta must be > 0");
  const double e0 = spec.eigenvalues.minCoeff();
  KahanSum s;
  for (Eigen::Index n = 0; n < spec.eigenvalues.size(); ++n) s.add(std::exp(-beta * (spec.eigenvalues(n) - e0)));
  return -beta * e0 + std::log(s.value());
}

double gibbs_expectation(const Eigen::MatrixXd& a, const SpectralData& spec, double beta) {
  if (a.rows() != spec.eigenvectors.rows() || a.cols() != a.rows())
    throw std::invalid_argument("gibbs_expectation: dimension mismatch");
  const Eigen::VectorXd p = gibbs_probabilities(spec, beta);
  const Eigen::MatrixXd ae = spec.eigenvectors.transpose() * a * spec.eigenvectors;
  return p.dot(ae.diagonal());
}

double duhamel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SpectralData& spec, double beta) {
  const auto dim = spec.eigenvectors.rows();
  if (a.rows() != dim || b.rows() != dim || a.cols() != dim || b.cols() != dim)
    throw std::invalid_argument("duhamel: dimension mismatch");
  const Eigen::VectorXd p = gibbs_probabilities(spec, beta);
  const Eigen::MatrixXd ae = spec.eigenvectors.transpose() * a * spec.eigenvectors;
  const Eigen::MatrixXd be = spec.eigenvectors.transpose() * b * spec.eigenvectors;
  const Eigen::VectorXd& e = spec.eigenvalues;
  const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
  KahanSum acc;
  for (Eigen::Index m = 0; m < dim; ++m) {
    for (Eigen::Index n = 0; n < dim; ++n) {
      const double delta = e(n) - e(m);
      double phi;
      if (std::abs(delta) < 1e-12 * scale) {
        phi = p(m);
      } else if (delta > 0) {
        phi = p(m) * (-std::expm1(-beta * delta)) / (beta * delta);
      } else {
        phi = p(n) * std::expm1(beta * delta) / (beta * delta);
      }
      acc.add(ae(m, n) * be(n, m) * phi);
    }
  }
  return acc.value();
}

double overlap_second_moment(const SpectralData& spec, double beta) {
  const int n = spec.n_spins();
  const Eigen::VectorXd p = gibbs_probabilities(spec, beta);
  const Eigen::VectorXd rho_diag = spec.eigenvectors.array().square().matrix() * p;
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index s = 0; s < rho_diag.size(); ++s) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        corr(i, j) += rho_diag(s) * spin_of(static_cast<std::uint64_t>(s), i) * spin_of(static_cast<std::uint64_t>(s), j);
  }
  return corr.array().square().sum() / (static_cast<double>(n) * n);
}

MCEstimate quenched_free_energy(const ModelParams& params, std::size_t n_samples, std::uint64_t seed, int workers) {
  params.validate();
  check_cap(params.n_spins, kDefaultMaxSpins);
  if (n_samples < 2) throw std::invalid_argument("quenched_free_energy: n_samples must be >= 2");
  const RngStream root(seed);
  std::vector<double> values(n_samples);
  parallel_for(n_samples, workers, [&](std::size_t d) {
    const auto g = DisorderSample::draw(2, params.n_spins, root.child(d));
    const auto spec = spectral_decompose(build_sk_hamiltonian(params, g));
    values[d] = log_partition(spec, params.beta) / params.n_spins;
  });
  return mc_estimate(values);
}

std::complex<double> corrected_trace(const ModelParams& params, const ComplexCoupledSample& sample, int max_spins) {
  check_cap(params.n_spins, max_spins);
  const Eigen::MatrixXd h_real = build_sk_hamiltonian(params, sample.real_part, max_spins);
  sample.imag_part.validate();
  if (sample.imag_part.n_spins != params.n_spins || sample.imag_part.order != 2)
    throw std::invalid_argument("corrected_trace: imaginary part shape mismatch");
  const std::size_t dim = dim_of(params.n_spins);
  Eigen::MatrixXcd h = h_real.cast<std::complex<double>>();
  for (std::size_t s = 0; s < dim; ++s) {
    const auto k = static_cast<Eigen::Index>(s);
    h(k, k) += std::complex<double>(0.0, classical_sk_energy(s, sample.imag_part, 0.0));
  }
  // shift by the real ground-state scale so the exponential stays O(1)
  const double shift = h_real.diagonal().minCoeff() - std::abs(params.b) * params.n_spins;
  h.diagonal().array() -= shift;
  const Eigen::MatrixXcd e = (-params.beta * h).exp();
  return e.trace() * std::exp(-params.beta * shift);
}

CorrectedLogPartition corrected_log_partition(const ModelParams& params, const DisorderSample& sample,
                                              std::size_t n_inner, const RngStream& stream, double imag_scale,
                                              int max_spins) {
  params.validate();
  check_cap(params.n_spins, max_spins);
  if (n_inner < 2 || n_inner % 2 != 0) throw std::invalid_argument("corrected_log_partition: n_inner must be even");
  const std::size_t pairs = n_inner / 2;
  std::vector<double> pair_means(pairs);
  double max_residual = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    ComplexCoupledSample plus{sample, DisorderSample::draw(2, params.n_spins, stream.child(k))};
    for (auto& v : plus.imag_part.values) v *= imag_scale;
    ComplexCoupledSample minus = plus;
    for (auto& v : minus.imag_part.values) v = -v;
    const auto avg = 0.5 * (corrected_trace(params, plus, max_spins) + corrected_trace(params, minus, max_spins));
    const double residual = std::abs(avg.imag()) / std::max(std::abs(avg.real()), 1e-300);
    max_residual = std::max(max_residual, residual);
    if (residual > 1e-9)
      throw EstimatorFailure("corrected_log_partition: antithetic pair average not real (residual " +
                             std::to_string(residual) + ")");
    pair_means[k] = avg.real();
  }
  CorrectedLogPartition out;
  out.n_inner = n_inner;
  out.max_imag_residual = max_residual;
  if (pairs >= 2) {
    const auto est = mc_estimate(pair_means);
    out.real_mean = est.mean;
    out.real_std_error = est.std_error;
  } else {
    out.real_mean = pair_means[0];
  }
  if (!(out.real_mean > 0.0))
    throw EstimatorFailure("corrected_log_partition: non-positive real average " + std::to_string(out.real_mean) +
                           "; increase n_inner");
  out.value = std::log(out.real_mean);
  return out;
}

MCEstimate superadditivity_gap(int l_spins, int m_spins, double beta, double b, double c, std::size_t n_samples,
                               std::size_t n_inner, std::uint64_t seed, int workers) {
  if (l_spins < 2 || m_spins < 2) throw std::invalid_argument("superadditivity_gap: L and M must be >= 2");
  if (n_samples < 2) throw std::invalid_argument("superadditivity_gap: n_samples must be >= 2");
  const RngStream root(seed);
  std::vector<double> values(n_samples);
  parallel_for(n_samples, workers, [&](std::size_t d) {
    const RngStream s = root.child(d);
    auto log_e1z = [&](int n, std::uint64_t label) {
      const ModelParams p{beta, b, c, n};
      const RngStream sub = s.child(label);
      const auto g = DisorderSample::draw(2, n, sub.child(0));
      return corrected_log_partition(p, g, n_inner, sub.child(1)).value;
    };
    values[d] = log_e1z(l_spins + m_spins, 0) - log_e1z(l_spins, 1) - log_e1z(m_spins, 2) + beta * beta / 4.0;
  });
  return mc_estimate(values);
}

}  // namespace qparisi
