#include "qbnet/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qbnet {

namespace {

constexpr double kHermTol = 1e-10;
constexpr double kTraceTol = 1e-10;
constexpr double kPsdTol = -1e-10;
constexpr double kNormTol = 1e-10;
constexpr double kEigClip = 1e-12;

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

/// Row-major reshape of an amplitude vector into (subset x complement).
/// `subset` must be sorted ascending; row index runs over the subset's
/// digits in subsystem order.
Mat reshape_subset(const Vec& amps, const std::vector<int>& dims,
                   const std::vector<int>& subset) {
  const int n = static_cast<int>(dims.size());
  long dk = 1, dc = 1;
  std::vector<bool> in_subset(static_cast<std::size_t>(n), false);
  for (int s : subset) in_subset[static_cast<std::size_t>(s)] = true;
  for (int i = 0; i < n; ++i)
    (in_subset[static_cast<std::size_t>(i)] ? dk : dc) *= dims[static_cast<std::size_t>(i)];

  // Per-position strides into the row (subset) and column (complement)
  // indices; both sides keep the original subsystem order.
  std::vector<long> kstride(static_cast<std::size_t>(n), 0);
  std::vector<long> cstride(static_cast<std::size_t>(n), 0);
  long krun = 1, crun = 1;
  for (int i = n - 1; i >= 0; --i) {
    if (in_subset[static_cast<std::size_t>(i)]) {
      kstride[static_cast<std::size_t>(i)] = krun;
      krun *= dims[static_cast<std::size_t>(i)];
    } else {
      cstride[static_cast<std::size_t>(i)] = crun;
      crun *= dims[static_cast<std::size_t>(i)];
    }
  }

  Mat m(dk, dc);
  std::vector<int> digit(static_cast<std::size_t>(n), 0);
  long k = 0, c = 0;
  const long total = amps.size();
  for (long t = 0; t < total; ++t) {
    m(k, c) = amps(t);
    for (int pos = n - 1; pos >= 0; --pos) {
      auto p = static_cast<std::size_t>(pos);
      ++digit[p];
      k += kstride[p];
      c += cstride[p];
      if (digit[p] < dims[p]) break;
      k -= kstride[p] * dims[p];
      c -= cstride[p] * dims[p];
      digit[p] = 0;
    }
  }
  return m;
}

/// Maps every index of the `subsystems` space to its contribution in the
/// full index space.
std::vector<long> embedding_map(const std::vector<int>& dims,
                                const std::vector<int>& subsystems) {
  const int n = static_cast<int>(dims.size());
  std::vector<long> full_stride(static_cast<std::size_t>(n), 1);
  for (int i = n - 2; i >= 0; --i)
    full_stride[static_cast<std::size_t>(i)] =
        full_stride[static_cast<std::size_t>(i + 1)] * dims[static_cast<std::size_t>(i + 1)];

  long sub_dim = 1;
  for (int s : subsystems) sub_dim *= dims[static_cast<std::size_t>(s)];
  std::vector<long> out(static_cast<std::size_t>(sub_dim), 0);
  std::vector<int> digit(subsystems.size(), 0);
  long acc = 0;
  for (long idx = 0; idx < sub_dim; ++idx) {
    out[static_cast<std::size_t>(idx)] = acc;
    for (int pos = static_cast<int>(subsystems.size()) - 1; pos >= 0; --pos) {
      auto p = static_cast<std::size_t>(pos);
      int sub = subsystems[p];
      ++digit[p];
      acc += full_stride[static_cast<std::size_t>(sub)];
      if (digit[p] < dims[static_cast<std::size_t>(sub)]) break;
      acc -= full_stride[static_cast<std::size_t>(sub)] * dims[static_cast<std::size_t>(sub)];
      digit[p] = 0;
    }
  }
  return out;
}

Eigen::VectorXd hermitian_eigenvalues(const Mat& m) {
  Mat sym = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

std::vector<int> sorted_checked(std::vector<int> subsystems, int n) {
  std::sort(subsystems.begin(), subsystems.end());
  if (!subsystems.empty() &&
      (subsystems.front() < 0 || subsystems.back() >= n))
    throw std::invalid_argument("subsystem index out of range");
  if (std::adjacent_find(subsystems.begin(), subsystems.end()) != subsystems.end())
    throw std::invalid_argument("repeated subsystem index");
  return subsystems;
}

SystemLabeling sub_labeling(const SystemLabeling& full, const std::vector<int>& keep) {
  std::vector<std::pair<std::string, int>> subs;
  subs.reserve(keep.size());
  for (int i : keep) subs.emplace_back(full.label(i), full.dim(i));
  return SystemLabeling(std::move(subs));
}

}  // namespace

// --- SystemLabeling -----------------------------------------------------

SystemLabeling::SystemLabeling(std::vector<std::pair<std::string, int>> subsystems) {
  for (auto& [label, dim] : subsystems) {
    if (dim < 1) throw std::invalid_argument("subsystem dimension must be >= 1");
    if (!index_.emplace(label, static_cast<int>(labels_.size())).second)
      throw std::invalid_argument("duplicate subsystem label: " + label);
    labels_.push_back(label);
    dims_.push_back(dim);
    total_dim_ *= dim;
  }
}

int SystemLabeling::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end())
    throw std::invalid_argument("unknown subsystem label: " + label);
  return it->second;
}

void SystemLabeling::set_group(const std::string& party,
                               std::vector<std::string> member_labels) {
  for (const auto& l : member_labels) index_of(l);
  groups_[party] = std::move(member_labels);
}

std::vector<int> SystemLabeling::resolve(const std::string& name) const {
  std::vector<int> out;
  auto it = groups_.find(name);
  if (it != groups_.end()) {
    for (const auto& l : it->second) out.push_back(index_of(l));
  } else {
    out.push_back(index_of(name));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> SystemLabeling::resolve_union(std::span<const std::string> names) const {
  std::vector<int> out;
  for (const auto& name : names) {
    auto part = resolve(name);
    out.insert(out.end(), part.begin(), part.end());
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end())
    throw std::invalid_argument("overlapping groups in one computation");
  return out;
}

SystemLabeling SystemLabeling::with_appended(const std::string& label, int dim) const {
  std::vector<std::pair<std::string, int>> subs;
  for (int i = 0; i < num_subsystems(); ++i) subs.emplace_back(labels_[static_cast<std::size_t>(i)], dims_[static_cast<std::size_t>(i)]);
  subs.emplace_back(label, dim);
  SystemLabeling out(std::move(subs));
  out.groups_ = groups_;
  return out;
}

SystemLabeling SystemLabeling::without(int subsystem_index) const {
  std::vector<std::pair<std::string, int>> subs;
  for (int i = 0; i < num_subsystems(); ++i)
    if (i != subsystem_index)
      subs.emplace_back(labels_[static_cast<std::size_t>(i)], dims_[static_cast<std::size_t>(i)]);
  SystemLabeling out(std::move(subs));
  // Groups survive only if all their members survive.
  const std::string& gone = labels_[static_cast<std::size_t>(subsystem_index)];
  for (const auto& [party, members] : groups_) {
    if (std::find(members.begin(), members.end(), gone) == members.end())
      out.groups_.emplace(party, members);
  }
  return out;
}

// --- states --------------------------------------------------------------

PureState::PureState(SystemLabeling labeling, Eigen::VectorXcd amplitudes)
    : labeling_(std::move(labeling)), amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() != labeling_.total_dim())
    throw std::invalid_argument("amplitude vector does not match labeling dimension");
  if (std::abs(amplitudes_.norm() - 1.0) > kNormTol)
    throw std::invalid_argument("pure state is not normalized");
}

DensityMatrix::DensityMatrix(SystemLabeling labeling, Eigen::MatrixXcd matrix)
    : labeling_(std::move(labeling)), matrix_(std::move(matrix)) {
  const long d = labeling_.total_dim();
  if (matrix_.rows() != d || matrix_.cols() != d)
    throw std::invalid_argument("density matrix does not match labeling dimension");
  if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > kHermTol)
    throw std::invalid_argument("density matrix is not Hermitian");
  matrix_ = 0.5 * (matrix_ + matrix_.adjoint().eval());
  if (std::abs(matrix_.trace().real() - 1.0) > kTraceTol ||
      std::abs(matrix_.trace().imag()) > kTraceTol)
    throw std::invalid_argument("density matrix does not have unit trace");
  Eigen::SelfAdjointEigenSolver<Mat> es(matrix_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kPsdTol)
    throw std::invalid_argument("density matrix is not positive semidefinite");
}

DensityMatrix to_density(const PureState& psi) {
  return DensityMatrix(psi.labeling(),
                       psi.amplitudes() * psi.amplitudes().adjoint());
}

double entropy_bits(const Eigen::VectorXd& spectrum) {
  double h = 0.0;
  for (long i = 0; i < spectrum.size(); ++i) {
    double p = spectrum(i);
    if (p > kEigClip) h -= p * std::log2(p);
  }
  return h;
}

double subset_entropy(const PureState& psi, std::vector<int> subsystems) {
  subsystems = sorted_checked(std::move(subsystems), psi.labeling().num_subsystems());
  if (subsystems.empty()) return 0.0;
  if (static_cast<int>(subsystems.size()) == psi.labeling().num_subsystems())
    return 0.0;
  Mat m = reshape_subset(psi.amplitudes(), psi.labeling().dims(), subsystems);
  // A pure state's marginal and co-marginal share a spectrum; take the
  // cheaper Gram side.
  Mat gram = (m.rows() <= m.cols()) ? Mat(m * m.adjoint()) : Mat(m.adjoint() * m);
  return entropy_bits(hermitian_eigenvalues(gram));
}

double subset_entropy(const DensityMatrix& rho, std::vector<int> subsystems) {
  subsystems = sorted_checked(std::move(subsystems), rho.labeling().num_subsystems());
  if (subsystems.empty()) return 0.0;
  const auto& dims = rho.labeling().dims();
  std::vector<int> traced;
  for (int i = 0; i < rho.labeling().num_subsystems(); ++i)
    if (!std::binary_search(subsystems.begin(), subsystems.end(), i))
      traced.push_back(i);
  auto kmap = embedding_map(dims, subsystems);
  auto tmap = embedding_map(dims, traced);
  const long dk = static_cast<long>(kmap.size());
  Mat red = Mat::Zero(dk, dk);
  for (long a = 0; a < dk; ++a)
    for (long b = 0; b < dk; ++b) {
      std::complex<double> sum = 0.0;
      for (long t : tmap) sum += rho.matrix()(kmap[static_cast<std::size_t>(a)] + t,
                                              kmap[static_cast<std::size_t>(b)] + t);
      red(a, b) = sum;
    }
  return entropy_bits(hermitian_eigenvalues(red));
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::vector<int> keep) {
  keep = sorted_checked(std::move(keep), rho.labeling().num_subsystems());
  if (keep.empty()) throw std::invalid_argument("cannot trace out everything");
  const auto& dims = rho.labeling().dims();
  std::vector<int> traced;
  for (int i = 0; i < rho.labeling().num_subsystems(); ++i)
    if (!std::binary_search(keep.begin(), keep.end(), i)) traced.push_back(i);
  auto kmap = embedding_map(dims, keep);
  auto tmap = embedding_map(dims, traced);
  const long dk = static_cast<long>(kmap.size());
  Mat red = Mat::Zero(dk, dk);
  for (long a = 0; a < dk; ++a)
    for (long b = 0; b < dk; ++b) {
      std::complex<double> sum = 0.0;
      for (long t : tmap) sum += rho.matrix()(kmap[static_cast<std::size_t>(a)] + t,
                                              kmap[static_cast<std::size_t>(b)] + t);
      red(a, b) = sum;
    }
  return DensityMatrix(sub_labeling(rho.labeling(), keep), std::move(red));
}

DensityMatrix reduced_state(const PureState& psi, std::vector<int> keep) {
  keep = sorted_checked(std::move(keep), psi.labeling().num_subsystems());
  if (keep.empty()) throw std::invalid_argument("cannot trace out everything");
  Mat m = reshape_subset(psi.amplitudes(), psi.labeling().dims(), keep);
  return DensityMatrix(sub_labeling(psi.labeling(), keep), m * m.adjoint());
}

double von_neumann_entropy(const DensityMatrix& rho, std::span<const std::string> names) {
  return subset_entropy(rho, rho.labeling().resolve_union(names));
}
double von_neumann_entropy(const PureState& psi, std::span<const std::string> names) {
  return subset_entropy(psi, psi.labeling().resolve_union(names));
}
double von_neumann_entropy(const DensityMatrix& rho, const std::string& name) {
  return subset_entropy(rho, rho.labeling().resolve(name));
}
double von_neumann_entropy(const PureState& psi, const std::string& name) {
  return subset_entropy(psi, psi.labeling().resolve(name));
}

namespace {

template <typename State>
double cmi_impl(const State& state, std::span<const std::string> parts,
                std::span<const std::string> cond) {
  const auto& lab = state.labeling();
  std::vector<std::vector<int>> part_idx;
  std::vector<int> all;
  for (const auto& p : parts) {
    auto idx = lab.resolve(p);
    all.insert(all.end(), idx.begin(), idx.end());
    part_idx.push_back(std::move(idx));
  }
  std::vector<int> cond_idx;
  for (const auto& c : cond) {
    auto idx = lab.resolve(c);
    cond_idx.insert(cond_idx.end(), idx.begin(), idx.end());
  }
  std::sort(cond_idx.begin(), cond_idx.end());
  {
    std::vector<int> overlap_check = all;
    overlap_check.insert(overlap_check.end(), cond_idx.begin(), cond_idx.end());
    std::sort(overlap_check.begin(), overlap_check.end());
    if (std::adjacent_find(overlap_check.begin(), overlap_check.end()) !=
        overlap_check.end())
      throw std::invalid_argument("CMI groups must be pairwise disjoint");
  }

  const double h_cond = cond_idx.empty() ? 0.0 : subset_entropy(state, cond_idx);
  double sum = 0.0;
  for (const auto& idx : part_idx) {
    std::vector<int> joint = idx;
    joint.insert(joint.end(), cond_idx.begin(), cond_idx.end());
    sum += subset_entropy(state, std::move(joint)) - h_cond;
  }
  std::vector<int> all_joint = all;
  all_joint.insert(all_joint.end(), cond_idx.begin(), cond_idx.end());
  sum -= subset_entropy(state, std::move(all_joint)) - h_cond;
  return sum;
}

}  // namespace

double multipartite_cmi(const DensityMatrix& rho, std::span<const std::string> parts,
                        std::span<const std::string> cond) {
  return cmi_impl(rho, parts, cond);
}
double multipartite_cmi(const PureState& psi, std::span<const std::string> parts,
                        std::span<const std::string> cond) {
  return cmi_impl(psi, parts, cond);
}

// --- states ---------------------------------------------------------------

PureState ghz_state(int m, int d, long dim_cap) {
  if (m < 1 || d < 2) throw std::invalid_argument("ghz_state requires m >= 1, d >= 2");
  long total = 1;
  for (int i = 0; i < m; ++i) {
    total *= d;
    if (total > dim_cap)
      throw std::invalid_argument("ghz_state dimension exceeds the configured cap");
  }
  std::vector<std::pair<std::string, int>> subs;
  for (int i = 1; i <= m; ++i) subs.emplace_back("A" + std::to_string(i), d);
  Vec amps = Vec::Zero(total);
  const double w = 1.0 / std::sqrt(static_cast<double>(d));
  long rep = 0;
  for (int i = 0; i < m; ++i) rep = rep * d + 1;
  for (int i = 0; i < d; ++i) amps(static_cast<long>(i) * rep) = w;
  return PureState(SystemLabeling(std::move(subs)), std::move(amps));
}

DensityMatrix private_state(int m, int d, const DensityMatrix& shield,
                            const TwistingSpec& twisting) {
  if (m < 1 || d < 2) throw std::invalid_argument("private_state requires m >= 1, d >= 2");
  if (shield.labeling().num_subsystems() != m)
    throw std::invalid_argument("shield must carry one subsystem per party");
  const long key_dim_total = [&] {
    long t = 1;
    for (int i = 0; i < m; ++i) t *= d;
    return t;
  }();
  const long s_dim = shield.labeling().total_dim();
  if (!twisting.unitaries.empty() &&
      twisting.unitaries.size() != static_cast<std::size_t>(key_dim_total))
    throw std::invalid_argument("twisting needs one unitary per key string");
  for (const auto& u : twisting.unitaries) {
    if (u.rows() != s_dim || u.cols() != s_dim)
      throw std::invalid_argument("twisting block has wrong dimension");
    if ((u * u.adjoint() - Mat::Identity(s_dim, s_dim)).cwiseAbs().maxCoeff() > 1e-9)
      throw std::invalid_argument("twisting block is not unitary");
  }
  auto block = [&](long key_index) -> Mat {
    if (twisting.unitaries.empty()) return Mat::Identity(s_dim, s_dim);
    return twisting.unitaries[static_cast<std::size_t>(key_index)];
  };

  long rep = 0;
  for (int i = 0; i < m; ++i) rep = rep * d + 1;  // index of |i...i> is i*rep

  Mat gamma = Mat::Zero(key_dim_total * s_dim, key_dim_total * s_dim);
  for (int i = 0; i < d; ++i) {
    Mat left = block(static_cast<long>(i) * rep) * shield.matrix();
    for (int j = 0; j < d; ++j) {
      Mat blk = (left * block(static_cast<long>(j) * rep).adjoint()) /
                static_cast<double>(d);
      gamma.block(static_cast<long>(i) * rep * s_dim, static_cast<long>(j) * rep * s_dim,
                  s_dim, s_dim) = blk;
    }
  }

  std::vector<std::pair<std::string, int>> subs;
  for (int i = 1; i <= m; ++i) subs.emplace_back("K" + std::to_string(i), d);
  for (int i = 0; i < m; ++i)
    subs.emplace_back(shield.labeling().label(i), shield.labeling().dim(i));
  SystemLabeling lab(std::move(subs));
  for (int i = 1; i <= m; ++i)
    lab.set_group("A" + std::to_string(i),
                  {"K" + std::to_string(i), shield.labeling().label(i - 1)});
  return DensityMatrix(std::move(lab), std::move(gamma));
}

namespace {

template <typename Accessor>
std::map<std::vector<int>, double> key_distribution(
    const SystemLabeling& lab, std::span<const std::string> key_names,
    long total, Accessor&& diagonal) {
  std::vector<int> key_idx = lab.resolve_union(key_names);
  const auto& dims = lab.dims();
  std::vector<long> strides(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
    strides[static_cast<std::size_t>(i)] =
        strides[static_cast<std::size_t>(i + 1)] * dims[static_cast<std::size_t>(i + 1)];

  std::map<std::vector<int>, double> out;
  for (long t = 0; t < total; ++t) {
    double p = diagonal(t);
    if (p <= 0.0) continue;
    std::vector<int> outcome;
    outcome.reserve(key_idx.size());
    for (int s : key_idx)
      outcome.push_back(static_cast<int>((t / strides[static_cast<std::size_t>(s)]) %
                                         dims[static_cast<std::size_t>(s)]));
    out[outcome] += p;
  }
  return out;
}

}  // namespace

std::map<std::vector<int>, double> measure_key(const DensityMatrix& rho,
                                               std::span<const std::string> key_names) {
  return key_distribution(rho.labeling(), key_names, rho.labeling().total_dim(),
                          [&](long t) { return rho.matrix()(t, t).real(); });
}

std::map<std::vector<int>, double> measure_key(const PureState& psi,
                                               std::span<const std::string> key_names) {
  return key_distribution(psi.labeling(), key_names, psi.labeling().total_dim(),
                          [&](long t) { return std::norm(psi.amplitudes()(t)); });
}

// --- channel application ---------------------------------------------------

namespace {

/// Core move: replace subsystem `target` by outputs with dims `out_dims`
/// (same position) and append an environment of dimension env_dim at the
/// end. `v` has rows indexed by (outputs, env) row-major and cols by the
/// old subsystem.
PureState apply_isometry_at(const PureState& psi, int target, const Mat& v,
                            const std::vector<int>& out_dims, long env_dim,
                            const std::vector<std::string>& out_labels,
                            const std::string& env_label) {
  const auto& lab = psi.labeling();
  const auto& dims = lab.dims();
  const int n = lab.num_subsystems();
  const long din = dims[static_cast<std::size_t>(target)];
  long y_total = 1;
  for (int dy : out_dims) y_total *= dy;
  if (v.rows() != y_total * env_dim || v.cols() != din)
    throw std::invalid_argument("isometry shape mismatch");

  long prefix = 1, suffix = 1;
  for (int i = 0; i < target; ++i) prefix *= dims[static_cast<std::size_t>(i)];
  for (int i = target + 1; i < n; ++i) suffix *= dims[static_cast<std::size_t>(i)];

  Vec out = Vec::Zero(prefix * y_total * suffix * env_dim);
  for (long a = 0; a < prefix; ++a)
    for (long x = 0; x < din; ++x)
      for (long b = 0; b < suffix; ++b) {
        const std::complex<double> amp = psi.amplitudes()((a * din + x) * suffix + b);
        if (amp == std::complex<double>(0.0, 0.0)) continue;
        for (long y = 0; y < y_total; ++y)
          for (long e = 0; e < env_dim; ++e) {
            const std::complex<double> coeff = v(y * env_dim + e, x);
            if (coeff == std::complex<double>(0.0, 0.0)) continue;
            out(((a * y_total + y) * suffix + b) * env_dim + e) += coeff * amp;
          }
      }

  std::vector<std::pair<std::string, int>> subs;
  for (int i = 0; i < target; ++i) subs.emplace_back(lab.label(i), dims[static_cast<std::size_t>(i)]);
  for (std::size_t j = 0; j < out_dims.size(); ++j)
    subs.emplace_back(out_labels.at(j), out_dims[j]);
  for (int i = target + 1; i < n; ++i) subs.emplace_back(lab.label(i), dims[static_cast<std::size_t>(i)]);
  if (env_dim > 1) subs.emplace_back(env_label, static_cast<int>(env_dim));
  SystemLabeling new_lab(std::move(subs));
  for (const auto& [party, members] : lab.groups()) {
    bool intact = true;
    for (const auto& member : members)
      if (!new_lab.has(member)) intact = false;
    if (intact) new_lab.set_group(party, members);
  }
  return PureState(std::move(new_lab), std::move(out));
}

}  // namespace

PureState apply_channel_purified(const ChannelSpec& spec, const PureState& psi,
                                 const std::string& input_label,
                                 const std::vector<std::string>& output_labels,
                                 const std::string& env_label) {
  const int target = psi.labeling().index_of(input_label);
  if (psi.labeling().dim(target) != spec.input_dim)
    throw std::invalid_argument("channel input dimension mismatch on " + input_label);
  if (output_labels.size() != static_cast<std::size_t>(spec.num_heads))
    throw std::invalid_argument("need one output label per head");
  int env_dim = 1;
  Mat v = spec.stinespring(env_dim);
  return apply_isometry_at(psi, target, v, spec.head_dims(), env_dim,
                           output_labels, env_label);
}

DensityMatrix apply_channel(const ChannelSpec& spec, const PureState& psi,
                            const std::string& input_label,
                            const std::vector<std::string>& output_labels) {
  PureState dilated = apply_channel_purified(spec, psi, input_label, output_labels,
                                             "__env__");
  if (!dilated.labeling().has("__env__")) return to_density(dilated);
  std::vector<int> keep;
  const int env = dilated.labeling().index_of("__env__");
  for (int i = 0; i < dilated.labeling().num_subsystems(); ++i)
    if (i != env) keep.push_back(i);
  return reduced_state(dilated, keep);
}

DensityMatrix apply_channel(const ChannelSpec& spec, const DensityMatrix& rho,
                            const std::string& input_label,
                            const std::vector<std::string>& output_labels) {
  // Purify, push the purifier to the back, run the pure-state path, trace.
  Eigen::SelfAdjointEigenSolver<Mat> es(rho.matrix());
  const long d = rho.matrix().rows();
  Vec amps = Vec::Zero(d * d);
  for (long r = 0; r < d; ++r) {
    double lambda = std::max(0.0, es.eigenvalues()(r));
    if (lambda < kEigClip) continue;
    const double w = std::sqrt(lambda);
    for (long x = 0; x < d; ++x) amps(x * d + r) = w * es.eigenvectors()(x, r);
  }
  amps /= amps.norm();
  SystemLabeling lab = rho.labeling().with_appended("__purifier__", static_cast<int>(d));
  PureState psi(std::move(lab), std::move(amps));
  PureState dilated = apply_channel_purified(spec, psi, input_label, output_labels,
                                             "__env__");
  std::vector<int> keep;
  for (int i = 0; i < dilated.labeling().num_subsystems(); ++i) {
    const std::string& l = dilated.labeling().label(i);
    if (l != "__env__" && l != "__purifier__") keep.push_back(i);
  }
  return reduced_state(dilated, keep);
}

// --- squashed entanglement --------------------------------------------------

namespace {

/// Purification with the purifier appended as subsystem "__R__" of the
/// same dimension as the state.
PureState purify(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es(rho.matrix());
  const long d = rho.matrix().rows();
  Vec amps = Vec::Zero(d * d);
  for (long r = 0; r < d; ++r) {
    double lambda = std::max(0.0, es.eigenvalues()(r));
    if (lambda < kEigClip) continue;
    const double w = std::sqrt(lambda);
    for (long x = 0; x < d; ++x) amps(x * d + r) = w * es.eigenvectors()(x, r);
  }
  amps /= amps.norm();
  return PureState(rho.labeling().with_appended("__R__", static_cast<int>(d)),
                   std::move(amps));
}

double conditioned_cmi_after_squash(const PureState& purified,
                                    std::span<const std::string> parts,
                                    const Mat& isometry, int kept_dim) {
  const int r_index = purified.labeling().index_of("__R__");
  const long rows = isometry.rows();
  if (rows % kept_dim != 0)
    throw std::invalid_argument("squashing isometry rows must factor through kept_dim");
  const long disc = rows / kept_dim;
  PureState squashed = apply_isometry_at(
      purified, r_index, isometry, {kept_dim, static_cast<int>(disc)}, 1,
      {"__Eext__", "__F__"}, "__unused__");
  std::vector<std::string> cond{"__Eext__"};
  return multipartite_cmi(squashed, parts, cond);
}

}  // namespace

double squashed_ent_upper(const DensityMatrix& rho,
                          std::span<const std::string> parts,
                          const std::optional<SquashingChannel>& squash) {
  if (!squash) return multipartite_cmi(rho, parts);
  const long d = rho.matrix().rows();
  if (squash->isometry.cols() != d)
    throw std::invalid_argument("squashing channel must act on the purifier");
  Mat gram = squash->isometry.adjoint() * squash->isometry;
  if ((gram - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("squashing channel is not an isometry");
  PureState purified = purify(rho);
  return conditioned_cmi_after_squash(purified, parts, squash->isometry,
                                      squash->kept_dim);
}

double squashed_ent_estimate(const DensityMatrix& rho,
                             std::span<const std::string> parts,
                             const EsqSearchConfig& cfg) {
  if (rho.labeling().total_dim() > cfg.dim_cap)
    throw std::invalid_argument("state dimension exceeds the search cap");
  double best = multipartite_cmi(rho, parts);  // trivial extension

  const long d = rho.matrix().rows();
  Eigen::VectorXd spec = hermitian_eigenvalues(rho.matrix());
  int rank = 0;
  for (long i = 0; i < spec.size(); ++i)
    if (spec(i) > 1e-12) ++rank;
  if (rank <= 1) return best;  // pure input: conditioning is inert

  const int cap = cfg.max_extension_dim > 0
                      ? std::min<long>(cfg.max_extension_dim, d)
                      : d;
  PureState purified = purify(rho);
  RngStream root(cfg.seed);
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    RngStream rng = root.substream("esq/restart/" + std::to_string(restart));
    const int kept = 2 + (cap > 2 ? restart % (cap - 1) : 0);
    Mat w = random_isometry(static_cast<int>(kept * d), static_cast<int>(d), rng);
    double value = conditioned_cmi_after_squash(purified, parts, w, kept);
    double step = 0.3;
    int stale = 0;
    for (int it = 0; it < cfg.refine_iters && step > 1e-4; ++it) {
      Mat g(w.rows(), w.cols());
      for (long r = 0; r < g.rows(); ++r)
        for (long c = 0; c < g.cols(); ++c)
          g(r, c) = std::complex<double>(rng.gauss(), rng.gauss());
      Mat cand = w + step * g;
      Eigen::HouseholderQR<Mat> qr(cand);
      Mat q = qr.householderQ() * Mat::Identity(cand.rows(), cand.cols());
      double cand_value = conditioned_cmi_after_squash(purified, parts, q, kept);
      if (cand_value < value - 1e-12) {
        value = cand_value;
        w = std::move(q);
        stale = 0;
      } else if (++stale >= 5) {
        step *= 0.5;
        stale = 0;
      }
    }
    best = std::min(best, value);
  }
  return best;
}

ChannelEsqResult channel_esq(const ChannelSpec& spec,
                             const std::vector<int>& endpoint_classes,
                             const EsqSearchConfig& cfg) {
  spec.validate();
  if (endpoint_classes.size() != static_cast<std::size_t>(spec.num_heads) + 1)
    throw std::invalid_argument("need one class per endpoint (tail first)");
  std::set<int> distinct(endpoint_classes.begin(), endpoint_classes.end());
  if (distinct.size() < 2)
    return {0.0, true, "local channel for this partition"};

  const int d = spec.input_dim;
  // Class groups over the dilated output [R, Y1..Yr, env]; the reference
  // system R sits in the tail's class.
  std::vector<std::string> head_labels;
  for (int h = 1; h <= spec.num_heads; ++h)
    head_labels.push_back("Y" + std::to_string(h));

  auto evaluate = [&](const Eigen::VectorXd& lambda, const Mat& basis) {
    Vec amps = Vec::Zero(static_cast<long>(d) * d);
    for (int i = 0; i < d; ++i) {
      const double w = std::sqrt(std::max(0.0, lambda(i)));
      if (w == 0.0) continue;
      for (int x = 0; x < d; ++x)
        amps(static_cast<long>(i) * d + x) += w * basis(x, i);
    }
    amps /= amps.norm();
    PureState input(SystemLabeling({{"R", d}, {"X", d}}), std::move(amps));
    PureState out = apply_channel_purified(spec, input, "X", head_labels, "__env__");

    // One group per distinct class, in first-appearance order.
    std::map<int, std::vector<std::string>> members;
    members[endpoint_classes[0]].push_back("R");
    for (int h = 1; h <= spec.num_heads; ++h)
      members[endpoint_classes[static_cast<std::size_t>(h)]].push_back(
          head_labels[static_cast<std::size_t>(h - 1)]);
    SystemLabeling lab = out.labeling();
    std::vector<std::string> groups;
    for (const auto& [cls, labels] : members) {
      std::string g = "class" + std::to_string(cls);
      lab.set_group(g, labels);
      groups.push_back(g);
    }
    PureState grouped(std::move(lab), out.amplitudes());
    return multipartite_cmi(grouped, groups);
  };

  // The uniform-spectrum computational-basis input is known to attain the
  // maximum for the copy isometry; it is the canonical starting point for
  // every kind.
  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(d, 1.0 / d);
  Mat basis = Mat::Identity(d, d);
  double best = evaluate(lambda, basis);
  Eigen::VectorXd best_lambda = lambda;
  Mat best_basis = basis;

  RngStream root(cfg.seed);
  RngStream rng = root.substream("channel_esq");
  for (int s = 0; s < cfg.input_samples; ++s) {
    Eigen::VectorXd l(d);
    double sum = 0.0;
    for (int i = 0; i < d; ++i) {
      l(i) = -std::log(std::max(1e-300, 1.0 - rng.uniform()));
      sum += l(i);
    }
    l /= sum;
    Mat u = random_unitary(d, rng);
    double value = evaluate(l, u);
    if (value > best) {
      best = value;
      best_lambda = l;
      best_basis = u;
    }
  }
  double step = 0.2;
  int stale = 0;
  for (int it = 0; it < cfg.refine_iters && step > 1e-6; ++it) {
    Eigen::VectorXd l = best_lambda;
    for (int i = 0; i < d; ++i) l(i) = std::abs(l(i) + step * rng.gauss());
    l /= l.sum();
    Mat g(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        g(r, c) = std::complex<double>(rng.gauss(), rng.gauss());
    Mat cand = best_basis + step * g;
    Eigen::HouseholderQR<Mat> qr(cand);
    Mat u = qr.householderQ() * Mat::Identity(d, d);
    double value = evaluate(l, u);
    if (value > best + 1e-12) {
      best = value;
      best_lambda = l;
      best_basis = u;
      stale = 0;
    } else if (++stale >= 5) {
      step *= 0.5;
      stale = 0;
    }
  }

  ChannelEsqResult res;
  res.bits = best;
  res.exact = spec.is_isometric();
  res.method = res.exact
                   ? "pure-output maximization over input spectra"
                   : "heuristic: trivial-extension bound over sampled inputs";
  return res;
}

// --- randomized helpers ------------------------------------------------------

Eigen::MatrixXcd random_unitary(int n, RngStream& rng) {
  return random_isometry(n, n, rng);
}

Eigen::MatrixXcd random_isometry(int rows, int cols, RngStream& rng) {
  if (rows < cols) throw std::invalid_argument("isometry needs rows >= cols");
  Mat g(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      g(r, c) = std::complex<double>(rng.gauss(), rng.gauss());
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(rows, cols);
  Mat r_mat = q.adjoint() * g;
  // Fix phases so the distribution is Haar, not QR-convention dependent.
  for (int c = 0; c < cols; ++c) {
    std::complex<double> diag = r_mat(c, c);
    double mag = std::abs(diag);
    if (mag > 1e-300) q.col(c) *= diag / mag;
  }
  return q;
}

PureState random_pure_state(const SystemLabeling& labeling, RngStream& rng) {
  Vec amps(labeling.total_dim());
  for (long i = 0; i < amps.size(); ++i)
    amps(i) = std::complex<double>(rng.gauss(), rng.gauss());
  amps /= amps.norm();
  return PureState(labeling, std::move(amps));
}

DensityMatrix random_density_matrix(const SystemLabeling& labeling, int rank,
                                    RngStream& rng) {
  const long d = labeling.total_dim();
  if (rank < 1) rank = static_cast<int>(d);
  Mat g(d, rank);
  for (long r = 0; r < d; ++r)
    for (int c = 0; c < rank; ++c)
      g(r, c) = std::complex<double>(rng.gauss(), rng.gauss());
  Mat rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(labeling, std::move(rho));
}

double fidelity(const PureState& a, const PureState& b) {
  if (a.amplitudes().size() != b.amplitudes().size())
    throw std::invalid_argument("fidelity: dimension mismatch");
  return std::norm(a.amplitudes().adjoint() * b.amplitudes());
}

double fidelity(const DensityMatrix& rho, const PureState& psi) {
  if (rho.matrix().rows() != psi.amplitudes().size())
    throw std::invalid_argument("fidelity: dimension mismatch");
  return (psi.amplitudes().adjoint() * rho.matrix() * psi.amplitudes())(0).real();
}

PureState tensor_product(const PureState& a, const PureState& b) {
  std::vector<std::pair<std::string, int>> subs;
  for (int i = 0; i < a.labeling().num_subsystems(); ++i)
    subs.emplace_back(a.labeling().label(i), a.labeling().dim(i));
  for (int i = 0; i < b.labeling().num_subsystems(); ++i)
    subs.emplace_back(b.labeling().label(i), b.labeling().dim(i));
  Vec amps(a.amplitudes().size() * b.amplitudes().size());
  for (long i = 0; i < a.amplitudes().size(); ++i)
    amps.segment(i * b.amplitudes().size(), b.amplitudes().size()) =
        a.amplitudes()(i) * b.amplitudes();
  return PureState(SystemLabeling(std::move(subs)), std::move(amps));
}

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
  std::vector<std::pair<std::string, int>> subs;
  for (int i = 0; i < a.labeling().num_subsystems(); ++i)
    subs.emplace_back(a.labeling().label(i), a.labeling().dim(i));
  for (int i = 0; i < b.labeling().num_subsystems(); ++i)
    subs.emplace_back(b.labeling().label(i), b.labeling().dim(i));
  const long da = a.matrix().rows(), db = b.matrix().rows();
  Mat m(da * db, da * db);
  for (long r1 = 0; r1 < da; ++r1)
    for (long c1 = 0; c1 < da; ++c1)
      m.block(r1 * db, c1 * db, db, db) = a.matrix()(r1, c1) * b.matrix();
  return DensityMatrix(SystemLabeling(std::move(subs)), std::move(m));
}

// --- state-vector editing -----------------------------------------------------

PureState apply_unitary(const PureState& psi, const std::string& label,
                        const Eigen::MatrixXcd& u) {
  const int target = psi.labeling().index_of(label);
  const int d = psi.labeling().dim(target);
  if (u.rows() != d || u.cols() != d)
    throw std::invalid_argument("gate dimension mismatch");
  std::vector<std::string> same{label};
  return apply_isometry_at(psi, target, u, {d}, 1, same, "__unused__");
}

PureState apply_unitary2(const PureState& psi, const std::string& label_a,
                         const std::string& label_b, const Eigen::MatrixXcd& u) {
  const auto& lab = psi.labeling();
  const int ia = lab.index_of(label_a);
  const int ib = lab.index_of(label_b);
  if (ia == ib) throw std::invalid_argument("two-subsystem gate needs distinct targets");
  const long da = lab.dim(ia), db = lab.dim(ib);
  if (u.rows() != da * db || u.cols() != da * db)
    throw std::invalid_argument("gate dimension mismatch");

  const auto& dims = lab.dims();
  std::vector<long> strides(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
    strides[static_cast<std::size_t>(i)] =
        strides[static_cast<std::size_t>(i + 1)] * dims[static_cast<std::size_t>(i + 1)];
  const long sa = strides[static_cast<std::size_t>(ia)];
  const long sb = strides[static_cast<std::size_t>(ib)];

  Vec out = psi.amplitudes();
  const long total = out.size();
  Vec scratch(da * db);
  for (long t = 0; t < total; ++t) {
    if ((t / sa) % da != 0 || (t / sb) % db != 0) continue;
    // t is the base index of one (a,b) fiber; transform it.
    for (long va = 0; va < da; ++va)
      for (long vb = 0; vb < db; ++vb)
        scratch(va * db + vb) = out(t + va * sa + vb * sb);
    Vec transformed = u * scratch;
    for (long va = 0; va < da; ++va)
      for (long vb = 0; vb < db; ++vb)
        out(t + va * sa + vb * sb) = transformed(va * db + vb);
  }
  return PureState(psi.labeling(), std::move(out));
}

std::vector<double> outcome_probabilities(const PureState& psi, const std::string& label) {
  const int target = psi.labeling().index_of(label);
  const int d = psi.labeling().dim(target);
  const auto& dims = psi.labeling().dims();
  std::vector<long> strides(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
    strides[static_cast<std::size_t>(i)] =
        strides[static_cast<std::size_t>(i + 1)] * dims[static_cast<std::size_t>(i + 1)];
  const long s = strides[static_cast<std::size_t>(target)];
  std::vector<double> p(static_cast<std::size_t>(d), 0.0);
  for (long t = 0; t < psi.amplitudes().size(); ++t)
    p[static_cast<std::size_t>((t / s) % d)] += std::norm(psi.amplitudes()(t));
  return p;
}

PureState collapse(const PureState& psi, const std::string& label, int outcome) {
  const int target = psi.labeling().index_of(label);
  const int d = psi.labeling().dim(target);
  if (outcome < 0 || outcome >= d) throw std::invalid_argument("outcome out of range");
  const auto& dims = psi.labeling().dims();
  std::vector<long> strides(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
    strides[static_cast<std::size_t>(i)] =
        strides[static_cast<std::size_t>(i + 1)] * dims[static_cast<std::size_t>(i + 1)];
  const long s = strides[static_cast<std::size_t>(target)];
  Vec out = psi.amplitudes();
  double norm2 = 0.0;
  for (long t = 0; t < out.size(); ++t) {
    if ((t / s) % d == outcome)
      norm2 += std::norm(out(t));
    else
      out(t) = 0.0;
  }
  if (norm2 < 1e-300)
    throw std::invalid_argument("collapse onto a zero-probability outcome");
  out /= std::sqrt(norm2);
  return PureState(psi.labeling(), std::move(out));
}

PureState drop_subsystem(const PureState& psi, const std::string& label, int value) {
  const int target = psi.labeling().index_of(label);
  const int d = psi.labeling().dim(target);
  const auto& dims = psi.labeling().dims();
  long prefix = 1, suffix = 1;
  for (int i = 0; i < target; ++i) prefix *= dims[static_cast<std::size_t>(i)];
  for (int i = target + 1; i < psi.labeling().num_subsystems(); ++i)
    suffix *= dims[static_cast<std::size_t>(i)];
  Vec out(prefix * suffix);
  for (long a = 0; a < prefix; ++a) {
    for (long x = 0; x < d; ++x) {
      if (x == value) {
        out.segment(a * suffix, suffix) =
            psi.amplitudes().segment((a * d + x) * suffix, suffix);
      } else {
        double stray =
            psi.amplitudes().segment((a * d + x) * suffix, suffix).cwiseAbs().maxCoeff();
        if (stray > 1e-10)
          throw std::invalid_argument("subsystem " + label +
                                      " is not in a definite basis state");
      }
    }
  }
  return PureState(psi.labeling().without(target), std::move(out));
}

}  // namespace qbnet
