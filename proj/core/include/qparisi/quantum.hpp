#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "qparisi/stochastics.hpp"

namespace qparisi {

// Basis convention: state index s in [0, 2^N), site i is bit i, bit 0 means
// spin up (S^z eigenvalue +1).
inline int spin_of(std::uint64_t state, int site) { return 1 - 2 * static_cast<int>((state >> site) & 1U); }

struct ModelParams {
  double beta = 1.0;
  double b = 0.0;
  double c = 0.0;
  int n_spins = 1;

  void validate() const;
};

// Gaussian couplings indexed by strictly increasing p-tuples in lexicographic order.
struct DisorderSample {
  int order = 2;
  int n_spins = 0;
  std::vector<double> values;

  static DisorderSample draw(int order, int n_spins, const RngStream& stream);
  static DisorderSample zeros(int order, int n_spins);
  void validate() const;
};

struct ComplexCoupledSample {
  DisorderSample real_part;
  DisorderSample imag_part;
};

std::vector<std::vector<int>> index_tuples(int n, int p);
std::uint64_t binomial(int n, int k);

struct SpectralData {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns
  int n_spins() const;
};

inline constexpr int kDefaultMaxSpins = 14;
inline constexpr int kDefaultMaxCorrectedSpins = 6;

Eigen::MatrixXd sz_operator(int n_spins, int site);
Eigen::MatrixXd sx_operator(int n_spins, int site);

// Classical part of the SK energy, sum over i<j couplings scaled 1/sqrt(N) plus -c sum S^z.
double classical_sk_energy(std::uint64_t state, const DisorderSample& sample, double c);
double pspin_interaction(std::uint64_t state, const DisorderSample& sample);

Eigen::MatrixXd build_sk_hamiltonian(const ModelParams& params, const DisorderSample& sample,
                                     int max_spins = kDefaultMaxSpins);
Eigen::MatrixXd build_pspin_hamiltonian(const ModelParams& params, const DisorderSample& sample,
                                        int max_spins = kDefaultMaxSpins);

SpectralData spectral_decompose(const Eigen::MatrixXd& h);

double log_partition(const SpectralData& spec, double beta);
double gibbs_expectation(const Eigen::MatrixXd& a, const SpectralData& spec, double beta);
double duhamel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SpectralData& spec, double beta);
double overlap_second_moment(const SpectralData& spec, double beta);

MCEstimate quenched_free_energy(const ModelParams& params, std::size_t n_samples, std::uint64_t seed,
                                int workers = 1);

// Tr exp(-beta H(g + i g1)) for one imaginary coupling draw.
std::complex<double> corrected_trace(const ModelParams& params, const ComplexCoupledSample& sample,
                                     int max_spins = kDefaultMaxCorrectedSpins);

struct CorrectedLogPartition {
  double value = 0.0;           // log of the real pair-averaged trace
  double real_mean = 0.0;
  double real_std_error = 0.0;  // of the pair averages
  double max_imag_residual = 0.0;
  std::size_t n_inner = 0;
};

// log E_1 Tr exp(-beta H(g + i g1)) with g1 drawn in antithetic pairs from
// `stream`. imag_scale = 0 removes the imaginary couplings entirely.
CorrectedLogPartition corrected_log_partition(const ModelParams& params, const DisorderSample& sample,
                                              std::size_t n_inner, const RngStream& stream,
                                              double imag_scale = 1.0,
                                              int max_spins = kDefaultMaxCorrectedSpins);

MCEstimate superadditivity_gap(int l_spins, int m_spins, double beta, double b, double c, std::size_t n_samples,
                               std::size_t n_inner, std::uint64_t seed, int workers = 1);

// Debug dump: magic "QPOP", uint32 version, uint64 dim, then dim*dim row-major
// (re, im) double pairs, little endian.
void write_operator_dump(const std::string& path, const Eigen::MatrixXcd& op);
Eigen::MatrixXcd read_operator_dump(const std::string& path);

}  // namespace qparisi
