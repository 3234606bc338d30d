#include "qparisi/interpolation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qparisi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse(std::span<const double> xs) { return log_sum_exp(xs); }

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

void InterpPoint::validate() const {
  check_unit(s, "InterpPoint: s");
  check_unit(t, "InterpPoint: t");
}

NSequence NSequence::make(const RsbParams& rsb, int r) {
  rsb.validate();
  if (r < 1 || r > rsb.k) throw std::invalid_argument("NSequence: r must be in [1, k]");
  NSequence ns;
  ns.r = r;
  for (int p = 0; p <= rsb.k; ++p) ns.n.push_back(p < r ? 0.5 * rsb.m[p] : rsb.m[p]);
  ns.validate();
  return ns;
}

void NSequence::validate() const {
  for (std::size_t p = 1; p < n.size(); ++p)
    if (n[p] < n[p - 1]) throw std::invalid_argument("NSequence: n must be nondecreasing");
}

void TiltParams::validate() const {
  if (r < 1) throw std::invalid_argument("TiltParams: r must be >= 1");
  if (!(u >= 0.0 && u <= 4.0)) throw std::invalid_argument("TiltParams: u must lie in [0, 4]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("TiltParams: lambda must be >= 0");
}

GaussianLevels GaussianLevels::draw(int k, int n_spins, const RngStream& stream) {
  GaussianLevels lv;
  for (int p = 0; p < k; ++p) lv.z.push_back(gaussian_samples(stream.child(static_cast<std::uint64_t>(p)), n_spins));
  return lv;
}

std::pair<GaussianLevels, GaussianLevels> GaussianLevels::draw_pair(int k, int n_spins, int r, const RngStream& stream) {
  if (r < 1 || r > k) throw std::invalid_argument("GaussianLevels: r must be in [1, k]");
  GaussianLevels a, b;
  for (int p = 0; p < k; ++p) {
    const auto base = stream.child(static_cast<std::uint64_t>(p));
    a.z.push_back(gaussian_samples(base.child(1), n_spins));
    b.z.push_back(p < r ? a.z.back() : gaussian_samples(base.child(2), n_spins));
  }
  return {a, b};
}

InterpModel InterpModel::make(const ModelParams& params, int m_slices, RsbParams rsb, SelfOverlapKernel kernel,
                              QuadratureSpec quad) {
  InterpModel m{params, m_slices, std::move(rsb), std::move(kernel), quad};
  m.validate();
  return m;
}

void InterpModel::validate() const {
  params.validate();
  rsb.validate();
  quad.validate();
  if (kernel.m_slices() != m_slices) throw std::invalid_argument("InterpModel: kernel dimension must equal M");
  if (m_slices * params.n_spins > kMaxStoredPathSpins)
    throw std::invalid_argument("InterpModel: M*N exceeds the enumeration cap");
}

double interp_log_weight(const InterpPoint& point, const PathConfiguration& config, const DisorderSample& g,
                         const GaussianLevels& levels, const InterpModel& model) {
  point.validate();
  model.validate();
  const int m = model.m_slices;
  const int n = model.params.n_spins;
  const int k = model.rsb.k;
  if (config.m_slices() != m || config.n_spins() != n) throw std::invalid_argument("interp_log_weight: shape mismatch");
  if (static_cast<int>(levels.z.size()) != k) throw std::invalid_argument("interp_log_weight: need k real levels");
  const double beta = model.params.beta;
  const double s = point.s;
  const double t = point.t;
  const auto trotter = TrotterConfig::make(beta, model.params.b, m, n);
  const double mm = static_cast<double>(m);

  if (trotter.classical) {
    for (int l = 1; l < m; ++l)
      for (int i = 0; i < n; ++i)
        if (config(l, i) != config(0, i)) return kNegInf;
  }
  double pair = 0.0;
  double bonds = 0.0;
  for (int l = 0; l < m; ++l) {
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) pair += g.values[idx++] * config(l, i) * config(l, j);
      bonds += config(l, i) * config(l + 1, i);
    }
  }
  double field = 0.0;
  double column_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double h = model.params.c;
    for (int p = 0; p < k; ++p)
      h += std::sqrt(1.0 - s) * std::sqrt(model.rsb.q[p + 1] - model.rsb.q[p]) * levels.z[p][i];
    double col = 0.0;
    for (int l = 0; l < m; ++l) col += config(l, i);
    field += h * col;
    column_sq += col * col;
  }
  double kern = 0.0;
  double ov_sq = 0.0;
  for (int l = 0; l < m; ++l) {
    for (int lp = 0; lp < m; ++lp) {
      double ov = 0.0;
      for (int i = 0; i < n; ++i) ov += config(l, i) * config(lp, i);
      kern += model.kernel(l, lp) * ov;
      ov_sq += ov * ov;
    }
  }
  const double b2 = beta * beta;
  return beta * std::sqrt(s) / (mm * std::sqrt(static_cast<double>(n))) * pair + beta / mm * field +
         trotter.beta_k * bonds + b2 / (2.0 * mm * mm) * kern - b2 * s * t / (4.0 * mm * mm * n) * ov_sq -
         b2 * (1.0 - s) * model.rsb.q[k] / (2.0 * mm * mm) * column_sq + b2 * s * t / 4.0;
}

// ---------------------------------------------------------------------------

namespace {

InterpLayout::LevelNodes build_nodes(int dim, const QuadratureSpec& quad, int level) {
  InterpLayout::LevelNodes out;
  int n = 0;
  if (quad.mode == QuadratureSpec::Mode::GaussHermite) {
    n = 1;
    while (n + 1 <= quad.nodes && std::pow(n + 1.0, dim) <= kMaxLevelNodes) ++n;
  }
  if (n >= 3) {
    const auto rule = gauss_hermite(n);
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rest = idx;
      double lw = 0.0;
      std::vector<double> z(static_cast<std::size_t>(dim));
      for (int d = 0; d < dim; ++d) {
        const std::size_t j = rest % static_cast<std::size_t>(n);
        rest /= static_cast<std::size_t>(n);
        z[d] = rule.nodes[j];
        lw += std::log(rule.weights[j]);
      }
      out.z.push_back(std::move(z));
      out.log_w.push_back(lw);
    }
    return out;
  }
  const int samples = quad.samples;
  const RngStream stream = RngStream(quad.seed).child(0x1e7e1ULL).child(static_cast<std::uint64_t>(level)).child(
      static_cast<std::uint64_t>(dim));
  const auto raw = gaussian_samples(stream, static_cast<std::size_t>(samples / 2) * dim);
  const double lw = -std::log(static_cast<double>(samples));
  for (int j = 0; j < samples / 2; ++j) {
    std::vector<double> z(raw.begin() + static_cast<std::ptrdiff_t>(j) * dim,
                          raw.begin() + static_cast<std::ptrdiff_t>(j + 1) * dim);
    std::vector<double> neg = z;
    for (auto& v : neg) v = -v;
    out.z.push_back(std::move(z));
    out.log_w.push_back(lw);
    out.z.push_back(std::move(neg));
    out.log_w.push_back(lw);
  }
  return out;
}

InterpLayout::LevelNodes trivial_nodes(int dim) {
  InterpLayout::LevelNodes out;
  out.z.emplace_back(static_cast<std::size_t>(dim), 0.0);
  out.log_w.push_back(0.0);
  return out;
}

}  // namespace

InterpLayout::InterpLayout(const InterpModel& model, const InterpPoint& point)
    : model_(model), point_(point), space_(model.m_slices, model.params.n_spins) {
  model.validate();
  point.validate();
  const int m = model.m_slices;
  const int n = model.params.n_spins;
  const int k = model.rsb.k;
  const double beta = model.params.beta;
  const double s = point.s;
  const double t = point.t;
  const double mm = static_cast<double>(m);
  const auto trotter = TrotterConfig::make(beta, model.params.b, m, n);

  StructuralTerms terms;
  terms.bond = trotter.classical ? 0.0 : trotter.beta_k;
  terms.kernel = &model_.kernel;
  terms.kernel_coeff = beta * beta / (2.0 * mm * mm);
  terms.overlap_sq = -beta * beta * s * t / (4.0 * mm * mm * n);
  terms.column_sq = -beta * beta * (1.0 - s) * model.rsb.q[k] / (2.0 * mm * mm);
  terms.constant = beta * beta * s * t / 4.0;
  structural_ = structural_log_weights(space_, terms);
  if (trotter.classical) {
    // b = 0: slices locked together
    for (std::uint64_t x = 0; x < space_.size(); ++x)
      for (int l = 1; l < m; ++l)
        if (space_.slice(x, l) != space_.slice(x, 0)) {
          structural_[x] = kNegInf;
          break;
        }
  }
  log_prefactor_ = trotter.log_prefactor;
  pair_scale_ = beta * std::sqrt(s) / (mm * std::sqrt(static_cast<double>(n)));
  field_base_ = beta * model.params.c / mm;
  for (int p = 0; p < k; ++p)
    level_amp_.push_back(beta * std::sqrt(1.0 - s) * std::sqrt(std::max(0.0, model.rsb.q[p + 1] - model.rsb.q[p])) /
                         mm);

  n_classes_ = 1;
  for (int i = 0; i < n; ++i) n_classes_ *= (m + 1);
  class_sums_.resize(static_cast<std::size_t>(n_classes_) * n);
  for (int c = 0; c < n_classes_; ++c) {
    int rest = c;
    for (int i = 0; i < n; ++i) {
      class_sums_[static_cast<std::size_t>(c) * n + i] = 2 * (rest % (m + 1)) - m;
      rest /= (m + 1);
    }
  }
  class_of_.resize(space_.size());
  for (std::uint64_t x = 0; x < space_.size(); ++x) {
    std::uint32_t c = 0;
    std::uint32_t stride = 1;
    for (int i = 0; i < n; ++i) {
      c += stride * static_cast<std::uint32_t>((space_.column_sum(x, i) + m) / 2);
      stride *= static_cast<std::uint32_t>(m + 1);
    }
    class_of_[x] = c;
  }

  single_nodes_.resize(static_cast<std::size_t>(k));
  paired_nodes_.resize(static_cast<std::size_t>(k));
  for (int p = 1; p < k; ++p) {
    if (level_amp_[p] == 0.0) {
      single_nodes_[p] = trivial_nodes(n);
      paired_nodes_[p] = trivial_nodes(2 * n);
    } else {
      single_nodes_[p] = build_nodes(n, model.quad, p);
      paired_nodes_[p] = build_nodes(2 * n, model.quad, p);
    }
  }
}

std::vector<double> InterpLayout::path_log_weights(const DisorderSample& g) const {
  if (g.order != 2 || g.n_spins != space_.n()) throw std::invalid_argument("InterpLayout: disorder shape mismatch");
  std::vector<double> logw = structural_;
  if (pair_scale_ != 0.0) add_slice_term(space_, slice_pair_sums(g), pair_scale_, logw);
  return logw;
}

const InterpLayout::LevelNodes& InterpLayout::level_nodes(int p, bool paired) const {
  if (p < 1 || p >= model_.rsb.k) throw std::out_of_range("InterpLayout: no inner level " + std::to_string(p));
  return paired ? paired_nodes_[p] : single_nodes_[p];
}

// ---------------------------------------------------------------------------

InterpolationState::InterpolationState(std::shared_ptr<const InterpLayout> layout, const DisorderSample& g,
                                       std::span<const double> z0, bool pair_moments)
    : layout_(std::move(layout)), z0_(z0.begin(), z0.end()) {
  const auto& space = layout_->space();
  const int n = space.n();
  const int m = space.m();
  if (static_cast<int>(z0_.size()) != n) throw std::invalid_argument("InterpolationState: z0 must have N entries");
  const auto logw = layout_->path_log_weights(g);
  const int nc = layout_->n_classes();
  std::vector<LogSumExp> acc(static_cast<std::size_t>(nc));
  for (std::uint64_t x = 0; x < space.size(); ++x) acc[layout_->class_of(x)].add(logw[x]);
  class_logw_.resize(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) class_logw_[c] = acc[c].value();

  if (pair_moments) {
    const int pairs = n * (n - 1) / 2;
    pair_means_.assign(static_cast<std::size_t>(nc) * pairs, 0.0);
    for (std::uint64_t x = 0; x < space.size(); ++x) {
      if (logw[x] == kNegInf) continue;
      const auto c = layout_->class_of(x);
      const double p = std::exp(logw[x] - class_logw_[c]);
      int idx = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          int v = 0;
          for (int l = 0; l < m; ++l) v += space.spin(x, l, i) * space.spin(x, l, j);
          pair_means_[static_cast<std::size_t>(c) * pairs + idx++] += p * v;
        }
    }
  }
}

std::vector<double> InterpolationState::field0() const {
  std::vector<double> h(z0_.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = layout_->field_base() + layout_->level_amplitude(0) * z0_[i];
  return h;
}

double InterpolationState::leaf_log_z(std::span<const double> h) const {
  const int nc = layout_->n_classes();
  const int n = static_cast<int>(h.size());
  std::vector<double> terms(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    double e = class_logw_[c];
    for (int i = 0; i < n; ++i) e += h[i] * layout_->class_sum(c, i);
    terms[c] = e;
  }
  return lse(terms);
}

std::vector<double> InterpolationState::posterior(std::span<const double> h) const {
  const int nc = layout_->n_classes();
  const int n = static_cast<int>(h.size());
  std::vector<double> terms(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    double e = class_logw_[c];
    for (int i = 0; i < n; ++i) e += h[i] * layout_->class_sum(c, i);
    terms[c] = e;
  }
  std::vector<double> prob;
  normalise_log_weights(terms, prob);
  return prob;
}

InterpolationState::Descent InterpolationState::descend(int level, const std::vector<double>& h) const {
  const auto& rsb = layout_->model().rsb;
  if (level == rsb.k - 1) return {leaf_log_z(h), posterior(h)};
  const int next = level + 1;
  if (layout_->level_amplitude(next) == 0.0) return descend(next, h);
  const auto& nodes = layout_->level_nodes(next, false);
  const double mexp = rsb.m[next];
  const double amp = layout_->level_amplitude(next);
  std::vector<Descent> kids;
  kids.reserve(nodes.z.size());
  std::vector<double> terms(nodes.z.size());
  std::vector<double> hh(h.size());
  for (std::size_t j = 0; j < nodes.z.size(); ++j) {
    for (std::size_t i = 0; i < h.size(); ++i) hh[i] = h[i] + amp * nodes.z[j][i];
    kids.push_back(descend(next, hh));
    terms[j] = nodes.log_w[j] + mexp * kids.back().log_z;
  }
  Descent out;
  const double total = lse(terms);
  out.log_z = total / mexp;
  out.mu.assign(kids.front().mu.size(), 0.0);
  for (std::size_t j = 0; j < kids.size(); ++j) {
    const double w = std::exp(terms[j] - total);
    for (std::size_t c = 0; c < out.mu.size(); ++c) out.mu[c] += w * kids[j].mu[c];
  }
  return out;
}

std::pair<double, double> InterpolationState::shared(int level, const std::vector<double>& h, int r,
                                                     const std::function<double(std::span<const double>)>& f) const {
  if (level == r - 1) {
    const auto d = descend(level, h);
    return {d.log_z, f(d.mu)};
  }
  const int next = level + 1;
  if (layout_->level_amplitude(next) == 0.0) return shared(next, h, r, f);
  const auto& rsb = layout_->model().rsb;
  const auto& nodes = layout_->level_nodes(next, false);
  const double mexp = rsb.m[next];
  const double amp = layout_->level_amplitude(next);
  std::vector<double> terms(nodes.z.size());
  std::vector<double> values(nodes.z.size());
  std::vector<double> hh(h.size());
  for (std::size_t j = 0; j < nodes.z.size(); ++j) {
    for (std::size_t i = 0; i < h.size(); ++i) hh[i] = h[i] + amp * nodes.z[j][i];
    const auto [lz, v] = shared(next, hh, r, f);
    terms[j] = nodes.log_w[j] + mexp * lz;
    values[j] = v;
  }
  const double total = lse(terms);
  KahanSum acc;
  for (std::size_t j = 0; j < terms.size(); ++j) acc.add(std::exp(terms[j] - total) * values[j]);
  return {total / mexp, acc.value()};
}

double InterpolationState::log_z0() const {
  const double v = descend(0, field0()).log_z + layout_->log_prefactor();
  return v;
}

std::vector<double> InterpolationState::marginal() const { return descend(0, field0()).mu; }

double InterpolationState::single_bracket(std::span<const double> f_by_class) const {
  if (static_cast<int>(f_by_class.size()) != layout_->n_classes())
    throw std::invalid_argument("single_bracket: one value per class expected");
  const auto mu = marginal();
  KahanSum acc;
  for (std::size_t c = 0; c < mu.size(); ++c) acc.add(mu[c] * f_by_class[c]);
  return acc.value();
}

double InterpolationState::pair_bracket(int r, const std::function<double(std::span<const double>)>& pair_value) const {
  if (r < 1 || r > layout_->model().rsb.k) throw std::invalid_argument("pair_bracket: r must be in [1, k]");
  return shared(0, field0(), r, pair_value).second;
}

double InterpolationState::overlap_deviation(int r) const {
  if (pair_means_.empty()) throw std::logic_error("overlap_deviation: state built without pair moments");
  const int n = layout_->space().n();
  const int m = layout_->space().m();
  const int nc = layout_->n_classes();
  const int pairs = n * (n - 1) / 2;
  const double q = layout_->model().rsb.q[r];
  auto value = [&](std::span<const double> mu) {
    double sum_r2 = static_cast<double>(n) * m * m;
    for (int p = 0; p < pairs; ++p) {
      double e = 0.0;
      for (int c = 0; c < nc; ++c) e += mu[c] * pair_means_[static_cast<std::size_t>(c) * pairs + p];
      sum_r2 += 2.0 * e * e;
    }
    sum_r2 /= static_cast<double>(n) * n;
    double sum_r = 0.0;
    for (int i = 0; i < n; ++i) {
      double e = 0.0;
      for (int c = 0; c < nc; ++c) e += mu[c] * layout_->class_sum(c, i);
      sum_r += e * e;
    }
    sum_r /= n;
    return (sum_r2 - 2.0 * q * sum_r) / (static_cast<double>(m) * m) + q * q;
  };
  return pair_bracket(r, value);
}

double InterpolationState::pair_table_bracket(int r, std::span<const double> table) const {
  const int nc = layout_->n_classes();
  if (static_cast<int>(table.size()) != nc * nc) throw std::invalid_argument("pair_table_bracket: table size");
  auto value = [&](std::span<const double> mu) {
    KahanSum acc;
    for (int a = 0; a < nc; ++a) {
      if (mu[a] == 0.0) continue;
      double row = 0.0;
      for (int b = 0; b < nc; ++b) row += table[static_cast<std::size_t>(a) * nc + b] * mu[b];
      acc.add(mu[a] * row);
    }
    return acc.value();
  };
  return pair_bracket(r, value);
}

// ---------------------------------------------------------------------------

namespace {

struct SampleDraw {
  DisorderSample g;
  std::vector<double> z0;
};

SampleDraw draw_sample(const RngStream& root, std::size_t d, int n) {
  const auto s = root.child(d);
  return {DisorderSample::draw(2, n, s.child(0)), gaussian_samples(s.child(1), static_cast<std::size_t>(n))};
}

void require_sk(const InterpModel& model, const char* who) {
  if (model.params.n_spins < 1) throw std::invalid_argument(std::string(who) + ": N must be >= 1");
}

// E_Gibbs (1/M^2) sum_{l,l'} rho_{l,l'}^2 for one set of path log weights
double mean_self_overlap_sq(const PathSpace& space, std::span<const double> logw) {
  std::vector<double> prob;
  normalise_log_weights(logw, prob);
  const int m = space.m();
  const int n = space.n();
  KahanSum acc;
  for (std::uint64_t x = 0; x < space.size(); ++x) {
    if (prob[x] == 0.0) continue;
    double q = 0.0;
    for (int l = 0; l < m; ++l)
      for (int lp = 0; lp < m; ++lp) {
        const double ov = space.slice_overlap(x, l, lp);
        q += ov * ov;
      }
    acc.add(prob[x] * q);
  }
  return acc.value() / (static_cast<double>(n) * n * m * m);
}

}  // namespace

MCEstimate phi_estimate(const InterpPoint& point, const InterpModel& model, std::size_t n_disorder,
                        std::uint64_t seed, int workers) {
  require_sk(model, "phi_estimate");
  if (n_disorder < 2) throw std::invalid_argument("phi_estimate: need at least 2 disorder samples");
  const auto layout = std::make_shared<const InterpLayout>(model, point);
  const int n = model.params.n_spins;
  const RngStream root(seed);
  std::vector<double> values(n_disorder);
  parallel_for(n_disorder, workers, [&](std::size_t d) {
    const auto draw = draw_sample(root, d, n);
    const InterpolationState state(layout, draw.g, draw.z0);
    const double v = state.log_z0() / n;
    if (!std::isfinite(v))
      throw EstimatorFailure("phi_estimate: non-finite log Z at disorder sample " + std::to_string(d));
    values[d] = v;
  });
  return mc_estimate(values);
}

GuerraResidual guerra_identity_residual(double t, const InterpModel& model, std::size_t n_disorder,
                                        std::uint64_t seed, int workers, int gl_nodes) {
  require_sk(model, "guerra_identity_residual");
  check_unit(t, "guerra_identity_residual: t");
  if (n_disorder < 2) throw std::invalid_argument("guerra_identity_residual: need at least 2 disorder samples");
  const int n = model.params.n_spins;
  const int m = model.m_slices;
  const int k = model.rsb.k;
  const double beta = model.params.beta;
  const auto s_rule = gauss_legendre_unit(gl_nodes);

  const auto lhs_layout = std::make_shared<const InterpLayout>(model, InterpPoint{1.0, t});
  std::vector<std::shared_ptr<const InterpLayout>> s_layouts;
  for (double s : s_rule.nodes) s_layouts.push_back(std::make_shared<const InterpLayout>(model, InterpPoint{s, 1.0}));
  std::vector<std::shared_ptr<const InterpLayout>> t_layouts;
  std::vector<double> t_weights;
  if (t < 1.0) {
    for (std::size_t j = 0; j < s_rule.size(); ++j) {
      t_layouts.push_back(
          std::make_shared<const InterpLayout>(model, InterpPoint{1.0, t + (1.0 - t) * s_rule.nodes[j]}));
      t_weights.push_back((1.0 - t) * s_rule.weights[j]);
    }
  }

  const RngStream root(seed);
  std::vector<double> lhs(n_disorder), rem(n_disorder), tint(n_disorder), diff(n_disorder);
  parallel_for(n_disorder, workers, [&](std::size_t d) {
    const auto draw = draw_sample(root, d, n);
    const InterpolationState top(lhs_layout, draw.g, draw.z0);
    lhs[d] = top.log_z0() / n;
    if (!std::isfinite(lhs[d]))
      throw EstimatorFailure("guerra_identity_residual: non-finite log Z at disorder sample " + std::to_string(d));
    double r_acc = 0.0;
    for (std::size_t j = 0; j < s_layouts.size(); ++j) {
      const InterpolationState st(s_layouts[j], draw.g, draw.z0, true);
      double dev = 0.0;
      for (int r = 1; r <= k; ++r) dev += (model.rsb.m[r] - model.rsb.m[r - 1]) * st.overlap_deviation(r);
      r_acc += s_rule.weights[j] * dev;
    }
    rem[d] = 0.25 * beta * beta * r_acc;
    double t_acc = 0.0;
    for (std::size_t j = 0; j < t_layouts.size(); ++j)
      t_acc += t_weights[j] * mean_self_overlap_sq(t_layouts[j]->space(), t_layouts[j]->path_log_weights(draw.g));
    tint[d] = 0.25 * beta * beta * t_acc;
    diff[d] = lhs[d] + rem[d] - tint[d];
  });

  GuerraResidual out;
  const SingleSiteModel site(beta, model.params.b, model.params.c, m, model.kernel);
  out.parisi = parisi_functional(model.rsb, MixtureFunction(2), site, model.quad);
  const auto lhs_est = mc_estimate(lhs);
  const auto diff_est = mc_estimate(diff);
  out.lhs = lhs_est.mean;
  out.lhs_std_error = lhs_est.std_error;
  out.remainder = mc_estimate(rem).mean;
  out.t_integral = mc_estimate(tint).mean;
  const double shift = t * beta * beta / (4.0 * n);
  out.rhs = out.parisi + shift - out.remainder + out.t_integral;
  out.std_error = diff_est.std_error;
  const double delta = diff_est.mean - out.parisi - shift;
  out.gap = out.std_error > 0.0 ? delta / out.std_error : (delta == 0.0 ? 0.0 : std::copysign(INFINITY, delta));
  out.n = n_disorder;
  return out;
}

double psi(double s, const RsbParams& rsb, const MixtureFunction& mix, const SingleSiteModel& site,
           const QuadratureSpec& quad) {
  check_unit(s, "psi: s");
  const double beta = site.beta();
  double corr = 0.0;
  for (int l = 1; l <= rsb.k; ++l) corr += rsb.m[l] * (mix.theta(rsb.q[l + 1]) - mix.theta(rsb.q[l]));
  return elog_zeta0(rsb, mix, site, quad) - s * 0.5 * beta * beta * corr;
}

double deviation_moment(const PathConfiguration& a, const PathConfiguration& b, double q_r) {
  if (a.m_slices() != b.m_slices() || a.n_spins() != b.n_spins())
    throw std::invalid_argument("deviation_moment: shape mismatch");
  const int m = a.m_slices();
  double acc = 0.0;
  for (int l = 0; l < m; ++l) {
    const double d = self_overlap(a, b, l, l) - q_r;
    acc += d * d;
  }
  return acc / m;
}

// ---------------------------------------------------------------------------

namespace {

inline constexpr int kMaxPairPathSpins = 20;

// D_r^2 for every pair of paths, (1/M) sum_l (rho_l - q)^2
double pair_deviation(const PathSpace& space, std::uint64_t x1, std::uint64_t x2, double q) {
  const int m = space.m();
  const int n = space.n();
  double acc = 0.0;
  for (int l = 0; l < m; ++l) {
    const double rho =
        static_cast<double>(n - 2 * std::popcount(space.slice(x1, l) ^ space.slice(x2, l))) / static_cast<double>(n);
    acc += (rho - q) * (rho - q);
  }
  return acc / m;
}

struct PairRecursion {
  const InterpLayout& layout;
  int r;
  std::span<const double> table;  // class-pair log weights

  double leaf(const std::vector<double>& h) const {
    const int nc = layout.n_classes();
    const int n = layout.space().n();
    std::vector<double> f1(static_cast<std::size_t>(nc)), f2(static_cast<std::size_t>(nc));
    for (int c = 0; c < nc; ++c) {
      double a = 0.0, b = 0.0;
      for (int i = 0; i < n; ++i) {
        a += h[i] * layout.class_sum(c, i);
        b += h[n + i] * layout.class_sum(c, i);
      }
      f1[c] = a;
      f2[c] = b;
    }
    std::vector<double> terms(static_cast<std::size_t>(nc) * nc);
    for (int a = 0; a < nc; ++a)
      for (int b = 0; b < nc; ++b)
        terms[static_cast<std::size_t>(a) * nc + b] = table[static_cast<std::size_t>(a) * nc + b] + f1[a] + f2[b];
    return log_sum_exp(terms);
  }

  double level(int lvl, const std::vector<double>& h) const {
    const auto& rsb = layout.model().rsb;
    if (lvl == rsb.k - 1) return leaf(h);
    const int next = lvl + 1;
    const double amp = layout.level_amplitude(next);
    if (amp == 0.0) return level(next, h);
    const int n = layout.space().n();
    const bool shared = next < r;
    const auto& nodes = layout.level_nodes(next, !shared);
    const double expo = shared ? 0.5 * rsb.m[next] : rsb.m[next];
    std::vector<double> terms(nodes.z.size());
    std::vector<double> hh(h.size());
    for (std::size_t j = 0; j < nodes.z.size(); ++j) {
      for (int i = 0; i < n; ++i) {
        hh[i] = h[i] + amp * nodes.z[j][i];
        hh[n + i] = h[n + i] + amp * nodes.z[j][shared ? i : n + i];
      }
      const double v = level(next, hh);
      terms[j] = v == kNegInf ? kNegInf : nodes.log_w[j] + expo * v;
    }
    const double total = log_sum_exp(terms);
    return total == kNegInf ? kNegInf : total / expo;
  }
};

}  // namespace

TiltedResult tilted_partitions(double s, const TiltParams& tilt, const InterpModel& model, std::size_t n_disorder,
                               std::uint64_t seed, int workers) {
  require_sk(model, "tilted_partitions");
  tilt.validate();
  if (tilt.r > model.rsb.k) throw std::invalid_argument("tilted_partitions: r must be <= k");
  if (n_disorder < 2) throw std::invalid_argument("tilted_partitions: need at least 2 disorder samples");
  const int n = model.params.n_spins;
  if (2 * model.m_slices * n > kMaxPairPathSpins)
    throw std::invalid_argument("tilted_partitions: 2*M*N exceeds the pair enumeration cap");
  const auto layout = std::make_shared<const InterpLayout>(model, InterpPoint{s, 1.0});
  const auto& space = layout->space();
  const int nc = layout->n_classes();
  const double q = model.rsb.q[tilt.r];
  const RngStream root(seed);

  std::vector<double> log_w(n_disorder), log_v(n_disorder);
  parallel_for(n_disorder, workers, [&](std::size_t d) {
    const auto draw = draw_sample(root, d, n);
    const auto logw = layout->path_log_weights(draw.g);
    std::vector<LogSumExp> acc_v(static_cast<std::size_t>(nc) * nc), acc_w(static_cast<std::size_t>(nc) * nc);
    for (std::uint64_t x1 = 0; x1 < space.size(); ++x1) {
      if (logw[x1] == kNegInf) continue;
      const auto c1 = layout->class_of(x1);
      for (std::uint64_t x2 = 0; x2 < space.size(); ++x2) {
        if (logw[x2] == kNegInf) continue;
        const auto idx = static_cast<std::size_t>(c1) * nc + layout->class_of(x2);
        const double dev = pair_deviation(space, x1, x2, q);
        const double base = logw[x1] + logw[x2];
        acc_v[idx].add(base + n * tilt.lambda * (dev - tilt.u));
        if (dev >= tilt.u - 1e-12) acc_w[idx].add(base);
      }
    }
    std::vector<double> tv(acc_v.size()), tw(acc_w.size());
    for (std::size_t i = 0; i < tv.size(); ++i) {
      tv[i] = acc_v[i].value();
      tw[i] = acc_w[i].value();
    }
    std::vector<double> h(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < n; ++i) h[i] = h[n + i] = layout->field_base() + layout->level_amplitude(0) * draw.z0[i];
    const double pre = 2.0 * layout->log_prefactor();
    log_v[d] = (PairRecursion{*layout, tilt.r, tv}.level(0, h) + pre) / n;
    const double w = PairRecursion{*layout, tilt.r, tw}.level(0, h);
    log_w[d] = w == kNegInf ? kNegInf : (w + pre) / n;
    if (!std::isfinite(log_v[d]))
      throw EstimatorFailure("tilted_partitions: non-finite log V at disorder sample " + std::to_string(d));
  });

  TiltedResult out;
  out.log_v = mc_estimate(log_v);
  out.w_zero_samples = static_cast<std::size_t>(std::count(log_w.begin(), log_w.end(), kNegInf));
  if (out.w_zero_samples > 0) {
    out.log_w = {kNegInf, 0.0, n_disorder};
  } else {
    out.log_w = mc_estimate(log_w);
  }
  return out;
}

ConcentrationScan concentration_scan(double u, int r, double s, const std::vector<int>& sizes,
                                     const InterpModel& model, std::size_t n_disorder, std::uint64_t seed,
                                     int workers) {
  if (sizes.empty()) throw std::invalid_argument("concentration_scan: empty size list");
  if (r < 1 || r > model.rsb.k) throw std::invalid_argument("concentration_scan: r must be in [1, k]");
  if (n_disorder < 2) throw std::invalid_argument("concentration_scan: need at least 2 disorder samples");
  ConcentrationScan scan;
  const double q = model.rsb.q[r];
  for (int n : sizes) {
    InterpModel mdl = model;
    mdl.params.n_spins = n;
    mdl.validate();
    if (2 * mdl.m_slices * n > kMaxPairPathSpins)
      throw std::invalid_argument("concentration_scan: 2*M*N exceeds the pair enumeration cap at N=" +
                                  std::to_string(n));
    const auto layout = std::make_shared<const InterpLayout>(mdl, InterpPoint{s, 1.0});
    const auto& space = layout->space();
    const int nc = layout->n_classes();
    const RngStream root = RngStream(seed).child(static_cast<std::uint64_t>(n));
    std::vector<double> probs(n_disorder);
    parallel_for(n_disorder, workers, [&](std::size_t d) {
      const auto draw = draw_sample(root, d, n);
      const InterpolationState state(layout, draw.g, draw.z0);
      const auto logw = layout->path_log_weights(draw.g);
      const auto& cl = state.class_log_weights();
      std::vector<double> table(static_cast<std::size_t>(nc) * nc, 0.0);
      for (std::uint64_t x1 = 0; x1 < space.size(); ++x1) {
        if (logw[x1] == kNegInf) continue;
        const auto c1 = layout->class_of(x1);
        const double p1 = std::exp(logw[x1] - cl[c1]);
        for (std::uint64_t x2 = 0; x2 < space.size(); ++x2) {
          if (logw[x2] == kNegInf) continue;
          if (pair_deviation(space, x1, x2, q) < u - 1e-12) continue;
          const auto c2 = layout->class_of(x2);
          table[static_cast<std::size_t>(c1) * nc + c2] += p1 * std::exp(logw[x2] - cl[c2]);
        }
      }
      probs[d] = state.pair_table_bracket(r, table);
    });
    ConcentrationRow row;
    row.n_spins = n;
    row.probability = mc_estimate(probs);
    row.zero_events = std::all_of(probs.begin(), probs.end(), [](double p) { return p == 0.0; });
    scan.rows.push_back(row);
  }
  // least squares of log P against N
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : scan.rows)
    if (row.probability.mean > 0.0) pts.emplace_back(row.n_spins, std::log(row.probability.mean));
  if (pts.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxy = 0.0, sxx = 0.0;
    for (auto [x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
    }
    if (sxx > 0.0) {
      scan.slope = sxy / sxx;
      scan.slope_valid = true;
    }
  }
  return scan;
}

VarianceDiag selfoverlap_variance_diag(double t, const ModelParams& params, int m_slices,
                                       const SelfOverlapKernel& kernel, std::size_t n_disorder, std::uint64_t seed,
                                       int workers) {
  check_unit(t, "selfoverlap_variance_diag: t");
  if (n_disorder < 2) throw std::invalid_argument("selfoverlap_variance_diag: need at least 2 disorder samples");
  const auto model = InterpModel::make(params, m_slices, RsbParams::replica_symmetric(0.0), kernel);
  const InterpLayout layout(model, InterpPoint{1.0, t});
  const auto& space = layout.space();
  const int n = params.n_spins;
  const int m = m_slices;
  const std::size_t entries = static_cast<std::size_t>(m) * m;
  const RngStream root(seed);
  std::vector<double> intra(n_disorder);
  std::vector<std::vector<double>> first(n_disorder, std::vector<double>(entries));
  parallel_for(n_disorder, workers, [&](std::size_t d) {
    const auto g = DisorderSample::draw(2, n, root.child(d).child(0));
    const auto logw = layout.path_log_weights(g);
    std::vector<double> prob;
    normalise_log_weights(logw, prob);
    std::vector<double> m1(entries, 0.0), m2(entries, 0.0);
    for (std::uint64_t x = 0; x < space.size(); ++x) {
      if (prob[x] == 0.0) continue;
      for (int l = 0; l < m; ++l)
        for (int lp = 0; lp < m; ++lp) {
          const double rho = static_cast<double>(space.slice_overlap(x, l, lp)) / n;
          m1[l * m + lp] += prob[x] * rho;
          m2[l * m + lp] += prob[x] * rho * rho;
        }
    }
    double v = 0.0;
    for (std::size_t e = 0; e < entries; ++e) v += m2[e] - m1[e] * m1[e];
    intra[d] = v / static_cast<double>(entries);
    first[d] = m1;
  });
  VarianceDiag out;
  const auto est = mc_estimate(intra);
  out.intra = est.mean;
  out.intra_std_error = est.std_error;
  double inter = 0.0;
  for (std::size_t e = 0; e < entries; ++e) {
    std::vector<double> col(n_disorder);
    for (std::size_t d = 0; d < n_disorder; ++d) col[d] = first[d][e];
    const auto ce = mc_estimate(col);
    // sample variance = n * stderr^2
    inter += ce.std_error * ce.std_error * static_cast<double>(n_disorder);
  }
  out.inter = inter / static_cast<double>(entries);
  out.total = out.intra + out.inter;
  return out;
}

}  // namespace qparisi
