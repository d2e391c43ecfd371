#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <vector>

namespace rydgate {

using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

/// Fully connected network with tanh hidden layers and a linear output layer.
/// Plain double-precision backprop; also provides a forward-mode tangent pass
/// (R-op) used for Fisher-vector products.
class Mlp {
 public:
  struct Grads {
    std::vector<RMat> w;
    std::vector<RVec> b;
  };

  struct Cache {
    std::vector<RVec> act;  // act[0] = input, act[l+1] = post-activation of layer l
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least two layers");
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_.emplace_back(RMat::Zero(sizes_[l + 1], sizes_[l]));
      b_.emplace_back(RVec::Zero(sizes_[l + 1]));
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  int n_layers() const { return static_cast<int>(w_.size()); }

  /// Orthogonal initialization (tanh gain on hidden layers, out_gain on the
  /// final layer), zero biases.
  void init_orthogonal(std::mt19937_64& rng, double out_gain = 1.0) {
    std::normal_distribution<double> gauss;
    for (int l = 0; l < n_layers(); ++l) {
      RMat g(w_[l].rows(), w_[l].cols());
      for (int j = 0; j < g.cols(); ++j)
        for (int i = 0; i < g.rows(); ++i) g(i, j) = gauss(rng);
      const bool wide = g.cols() > g.rows();
      RMat a = wide ? g.transpose() : g;
      Eigen::HouseholderQR<RMat> qr(a);
      RMat q = qr.householderQ() * RMat::Identity(a.rows(), a.cols());
      RMat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
      for (int j = 0; j < q.cols(); ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
      RMat ortho = wide ? RMat(q.transpose()) : q;
      const double gain = (l + 1 == n_layers()) ? out_gain : 5.0 / 3.0;
      w_[l] = gain * ortho;
      b_[l].setZero();
    }
  }

  RVec forward(const RVec& x) const {
    Cache c;
    return forward(x, c);
  }

  RVec forward(const RVec& x, Cache& c) const {
    if (x.size() != in_dim()) throw std::invalid_argument("Mlp input dimension mismatch");
    c.act.assign(1, x);
    RVec h = x;
    for (int l = 0; l < n_layers(); ++l) {
      h = (w_[l] * h + b_[l]).eval();
      if (l + 1 < n_layers()) h = h.array().tanh().matrix();
      c.act.push_back(h);
    }
    return h;
  }

  /// Backprop dL/dy through the cached pass, accumulating parameter grads.
  void backward(const Cache& c, const RVec& dy, Grads& g) const {
    ensure_grads(g);
    RVec delta = dy;
    for (int l = n_layers() - 1; l >= 0; --l) {
      g.w[l].noalias() += delta * c.act[l].transpose();
      g.b[l] += delta;
      if (l > 0) {
        RVec da = w_[l].transpose() * delta;
        const RVec& a = c.act[l];
        delta = (da.array() * (1.0 - a.array().square())).matrix();
      }
    }
  }

  /// Forward-mode derivative of the output along a parameter direction v.
  RVec tangent(const Cache& c, const Grads& v) const {
    RVec th = RVec::Zero(sizes_[0]);  // input fixed
    for (int l = 0; l < n_layers(); ++l) {
      RVec tz = v.w[l] * c.act[l] + w_[l] * th + v.b[l];
      if (l + 1 < n_layers()) {
        const RVec& a = c.act[l + 1];
        th = (tz.array() * (1.0 - a.array().square())).matrix();
      } else {
        th = tz;
      }
    }
    return th;
  }

  int n_params() const {
    int n = 0;
    for (int l = 0; l < n_layers(); ++l)
      n += static_cast<int>(w_[l].size() + b_[l].size());
    return n;
  }

  RVec flatten() const {
    RVec out(n_params());
    int k = 0;
    for (int l = 0; l < n_layers(); ++l) {
      out.segment(k, w_[l].size()) = Eigen::Map<const RVec>(w_[l].data(), w_[l].size());
      k += static_cast<int>(w_[l].size());
      out.segment(k, b_[l].size()) = b_[l];
      k += static_cast<int>(b_[l].size());
    }
    return out;
  }

  void unflatten(const RVec& v) {
    if (v.size() != n_params()) throw std::invalid_argument("parameter vector size mismatch");
    int k = 0;
    for (int l = 0; l < n_layers(); ++l) {
      w_[l] = Eigen::Map<const RMat>(v.data() + k, w_[l].rows(), w_[l].cols());
      k += static_cast<int>(w_[l].size());
      b_[l] = v.segment(k, b_[l].size());
      k += static_cast<int>(b_[l].size());
    }
  }

  Grads zero_grads() const {
    Grads g;
    ensure_grads(g);
    return g;
  }

  static RVec grads_flatten(const Grads& g) {
    int n = 0;
    for (size_t l = 0; l < g.w.size(); ++l) n += static_cast<int>(g.w[l].size() + g.b[l].size());
    RVec out(n);
    int k = 0;
    for (size_t l = 0; l < g.w.size(); ++l) {
      out.segment(k, g.w[l].size()) = Eigen::Map<const RVec>(g.w[l].data(), g.w[l].size());
      k += static_cast<int>(g.w[l].size());
      out.segment(k, g.b[l].size()) = g.b[l];
      k += static_cast<int>(g.b[l].size());
    }
    return out;
  }

  Grads grads_unflatten(const RVec& v) const {
    Grads g = zero_grads();
    int k = 0;
    for (int l = 0; l < n_layers(); ++l) {
      g.w[l] = Eigen::Map<const RMat>(v.data() + k, w_[l].rows(), w_[l].cols());
      k += static_cast<int>(w_[l].size());
      g.b[l] = v.segment(k, b_[l].size());
      k += static_cast<int>(b_[l].size());
    }
    return g;
  }

 private:
  void ensure_grads(Grads& g) const {
    if (g.w.size() == w_.size()) return;
    g.w.clear();
    g.b.clear();
    for (int l = 0; l < n_layers(); ++l) {
      g.w.emplace_back(RMat::Zero(w_[l].rows(), w_[l].cols()));
      g.b.emplace_back(RVec::Zero(b_[l].size()));
    }
  }

  std::vector<int> sizes_;
  std::vector<RMat> w_;
  std::vector<RVec> b_;
};

}  // namespace rydgate
