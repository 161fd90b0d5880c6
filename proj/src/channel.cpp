#include "qbnet/channel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qbnet {

namespace {

using Mat = Eigen::MatrixXcd;

// Copy isometry |i> -> |i...i> over `heads` outputs of dimension d each.
Mat copy_isometry(int d, int heads) {
  long out_dim = 1;
  for (int h = 0; h < heads; ++h) out_dim *= d;
  Mat v = Mat::Zero(out_dim, d);
  for (int i = 0; i < d; ++i) {
    long idx = 0;
    for (int h = 0; h < heads; ++h) idx = idx * d + i;
    v(idx, i) = 1.0;
  }
  return v;
}

// Copy isometry embedded into (d+1)-level heads; level d is the flag.
Mat embedded_copy_isometry(int d, int heads) {
  long out_dim = 1;
  for (int h = 0; h < heads; ++h) out_dim *= (d + 1);
  Mat v = Mat::Zero(out_dim, d);
  for (int i = 0; i < d; ++i) {
    long idx = 0;
    for (int h = 0; h < heads; ++h) idx = idx * (d + 1) + i;
    v(idx, i) = 1.0;
  }
  return v;
}

}  // namespace

std::string to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::ideal_broadcast: return "ideal_broadcast";
    case ChannelKind::dephasing_broadcast: return "dephasing_broadcast";
    case ChannelKind::erasure_broadcast: return "erasure_broadcast";
    case ChannelKind::custom_isometry: return "custom_isometry";
  }
  return "?";
}

ChannelKind channel_kind_from_string(const std::string& s) {
  if (s == "ideal_broadcast") return ChannelKind::ideal_broadcast;
  if (s == "dephasing_broadcast") return ChannelKind::dephasing_broadcast;
  if (s == "erasure_broadcast") return ChannelKind::erasure_broadcast;
  if (s == "custom_isometry") return ChannelKind::custom_isometry;
  throw std::invalid_argument("unknown channel kind: " + s);
}

std::vector<int> ChannelSpec::head_dims() const {
  if (kind == ChannelKind::custom_isometry) return custom_head_dims;
  int d = (kind == ChannelKind::erasure_broadcast) ? input_dim + 1 : input_dim;
  return std::vector<int>(static_cast<std::size_t>(num_heads), d);
}

bool ChannelSpec::is_isometric() const {
  switch (kind) {
    case ChannelKind::ideal_broadcast:
    case ChannelKind::custom_isometry:
      return true;
    case ChannelKind::dephasing_broadcast:
    case ChannelKind::erasure_broadcast:
      return noise == 0.0;
  }
  return false;
}

Eigen::MatrixXcd ChannelSpec::stinespring(int& env_dim) const {
  validate();
  const int d = input_dim;
  switch (kind) {
    case ChannelKind::ideal_broadcast: {
      env_dim = 1;
      return copy_isometry(d, num_heads);
    }
    case ChannelKind::custom_isometry: {
      env_dim = 1;
      return *isometry;
    }
    case ChannelKind::dephasing_broadcast: {
      // Per-head Kraus set {sqrt(1-p) I} + {sqrt(p) |i><i|}; the joint
      // Stinespring is the tensor product of the per-head dilations
      // composed with the copy isometry.
      Mat w = Mat::Identity(1, 1);
      int e = 1;
      for (int h = 0; h < num_heads; ++h) {
        Mat wh = Mat::Zero(static_cast<long>(d) * (d + 1), d);
        for (int i = 0; i < d; ++i) {
          wh(static_cast<long>(i) * (d + 1) + 0, i) = std::sqrt(1.0 - noise);
          wh(static_cast<long>(i) * (d + 1) + (1 + i), i) = std::sqrt(noise);
        }
        // wh maps y_h -> y_h x E_h with E_h of dimension d+1.
        Mat next = Mat::Zero(w.rows() * wh.rows(), w.cols() * d);
        for (long r1 = 0; r1 < w.rows(); ++r1)
          for (long c1 = 0; c1 < w.cols(); ++c1)
            for (long r2 = 0; r2 < wh.rows(); ++r2)
              for (long c2 = 0; c2 < d; ++c2)
                next(r1 * wh.rows() + r2, c1 * d + c2) = w(r1, c1) * wh(r2, c2);
        w = std::move(next);
        e *= (d + 1);
      }
      // w maps (y_1..y_r) -> ((y_1,E_1)..(y_r,E_r)); reorder so all head
      // outputs come first and the environments are grouped at the end.
      std::vector<int> in_dims(static_cast<std::size_t>(num_heads), d);
      long head_total = 1;
      for (int h = 0; h < num_heads; ++h) head_total *= d;
      Mat reordered = Mat::Zero(head_total * e, head_total);
      // Row index of w is interleaved (y_1,e_1,...,y_r,e_r).
      for (long row = 0; row < w.rows(); ++row) {
        long rest = row;
        std::vector<long> ys(static_cast<std::size_t>(num_heads));
        std::vector<long> es(static_cast<std::size_t>(num_heads));
        for (int h = num_heads - 1; h >= 0; --h) {
          es[static_cast<std::size_t>(h)] = rest % (d + 1);
          rest /= (d + 1);
          ys[static_cast<std::size_t>(h)] = rest % d;
          rest /= d;
        }
        long y_idx = 0, e_idx = 0;
        for (int h = 0; h < num_heads; ++h) {
          y_idx = y_idx * d + ys[static_cast<std::size_t>(h)];
          e_idx = e_idx * (d + 1) + es[static_cast<std::size_t>(h)];
        }
        for (long col = 0; col < w.cols(); ++col)
          reordered(y_idx * e + e_idx, col) = w(row, col);
      }
      env_dim = e;
      Mat v = reordered * copy_isometry(d, num_heads);
      if (noise == 0.0) {
        // The environment stays in |0...0>; drop it.
        env_dim = 1;
        Mat slim = Mat::Zero(head_total, d);
        for (long y = 0; y < head_total; ++y) slim.row(y) = v.row(y * e);
        return slim;
      }
      return v;
    }
    case ChannelKind::erasure_broadcast: {
      // Kraus: sqrt(1-p) * embedded copy, plus sqrt(p) |flag...flag><i|.
      Mat embed = embedded_copy_isometry(d, num_heads);
      long out_dim = embed.rows();
      long flag_idx = out_dim - 1;  // all heads at level d
      if (noise == 0.0) {
        env_dim = 1;
        return embed;
      }
      env_dim = d + 1;
      Mat v = Mat::Zero(out_dim * (d + 1), d);
      for (long y = 0; y < out_dim; ++y)
        for (int i = 0; i < d; ++i)
          v(y * (d + 1) + 0, i) = std::sqrt(1.0 - noise) * embed(y, i);
      for (int i = 0; i < d; ++i)
        v(flag_idx * (d + 1) + (1 + i), i) = std::sqrt(noise);
      return v;
    }
  }
  throw std::logic_error("unreachable channel kind");
}

std::string ChannelSpec::fingerprint() const {
  std::ostringstream os;
  os << to_string(kind) << ":d" << input_dim << ":r" << num_heads << ":p"
     << noise;
  if (isometry) {
    os << ":V";
    for (long c = 0; c < isometry->cols(); ++c)
      for (long r = 0; r < isometry->rows(); ++r)
        os << (*isometry)(r, c).real() << "," << (*isometry)(r, c).imag()
           << ";";
  }
  return os.str();
}

void ChannelSpec::validate() const {
  if (input_dim < 2) throw std::invalid_argument("channel input_dim must be >= 2");
  if (num_heads < 1) throw std::invalid_argument("channel must have >= 1 head");
  if (noise < 0.0 || noise > 1.0)
    throw std::invalid_argument("channel noise must be in [0, 1]");
  if (kind == ChannelKind::custom_isometry) {
    if (!isometry) throw std::invalid_argument("custom_isometry needs a matrix");
    if (custom_head_dims.size() != static_cast<std::size_t>(num_heads))
      throw std::invalid_argument("custom_isometry head_dims/num_heads mismatch");
    long out = 1;
    for (int hd : custom_head_dims) out *= hd;
    if (isometry->rows() != out || isometry->cols() != input_dim)
      throw std::invalid_argument("custom isometry has wrong shape");
    Mat gram = isometry->adjoint() * (*isometry);
    double err = (gram - Mat::Identity(input_dim, input_dim)).cwiseAbs().maxCoeff();
    if (err > 1e-9)
      throw std::invalid_argument("custom isometry is not an isometry");
  }
}

ChannelSpec ChannelSpec::from_json(const nlohmann::json& j, int num_heads) {
  ChannelSpec spec;
  spec.kind = channel_kind_from_string(j.at("kind").get<std::string>());
  spec.input_dim = j.value("dim", 2);
  spec.num_heads = num_heads;
  spec.noise = j.value("noise", 0.0);
  if (j.contains("head_dims"))
    spec.custom_head_dims = j.at("head_dims").get<std::vector<int>>();
  if (j.contains("isometry")) {
    const auto& rows = j.at("isometry");
    long nr = static_cast<long>(rows.size());
    long nc = nr > 0 ? static_cast<long>(rows.at(0).size()) : 0;
    Eigen::MatrixXcd v(nr, nc);
    for (long r = 0; r < nr; ++r)
      for (long c = 0; c < nc; ++c) {
        const auto& cell = rows.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c));
        v(r, c) = std::complex<double>(cell.at(0).get<double>(), cell.at(1).get<double>());
      }
    spec.isometry = std::move(v);
  }
  spec.validate();
  return spec;
}

nlohmann::json ChannelSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["dim"] = input_dim;
  if (noise != 0.0) j["noise"] = noise;
  if (!custom_head_dims.empty()) j["head_dims"] = custom_head_dims;
  if (isometry) {
    nlohmann::json rows = nlohmann::json::array();
    for (long r = 0; r < isometry->rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (long c = 0; c < isometry->cols(); ++c)
        row.push_back({(*isometry)(r, c).real(), (*isometry)(r, c).imag()});
      rows.push_back(row);
    }
    j["isometry"] = rows;
  }
  return j;
}

}  // namespace qbnet
