#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gbl/errors.hpp"

namespace gbl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Uniform double in [0,1) built directly from the top 53 bits of the
// engine's output, so draws are identical on every platform.
inline double unit_uniform(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Entries i.i.d. uniform on [-L, L], L = sqrt(6/(fan_in+fan_out)),
// sampled row-major. Returned matrix maps fan_in -> fan_out (rows are
// output neurons).
inline Mat glorot_init(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double L = std::sqrt(6.0 / (fan_in + fan_out));
  Mat w(fan_out, fan_in);
  for (int i = 0; i < fan_out; ++i)
    for (int j = 0; j < fan_in; ++j)
      w(i, j) = (2.0 * unit_uniform(rng) - 1.0) * L;
  return w;
}

// Dense MLP, tanh hidden layers, sigmoid output layer. Weights map
// layer l-1 to l as rows-of-outputs; biases start at zero.
struct DenseNet {
  std::vector<int> sizes;
  std::vector<Mat> W;
  std::vector<Vec> b;

  int layers() const { return static_cast<int>(W.size()); }
  int n_in() const { return sizes.front(); }
  int n_out() const { return sizes.back(); }

  static DenseNet make(std::vector<int> layer_sizes, std::mt19937_64& rng) {
    if (layer_sizes.size() < 2) throw ShapeMismatch("need at least two layers");
    DenseNet net;
    net.sizes = std::move(layer_sizes);
    for (size_t l = 0; l + 1 < net.sizes.size(); ++l) {
      net.W.push_back(glorot_init(net.sizes[l], net.sizes[l + 1], rng));
      net.b.push_back(Vec::Zero(net.sizes[l + 1]));
    }
    return net;
  }
};

// Gradient accumulator mirroring a net's parameter shapes.
struct NetGrads {
  std::vector<Mat> W;
  std::vector<Vec> b;

  static NetGrads zeros_like(const DenseNet& net) {
    NetGrads g;
    for (int l = 0; l < net.layers(); ++l) {
      g.W.push_back(Mat::Zero(net.W[l].rows(), net.W[l].cols()));
      g.b.push_back(Vec::Zero(net.b[l].size()));
    }
    return g;
  }

  void set_zero() {
    for (Mat& m : W) m.setZero();
    for (Vec& v : b) v.setZero();
  }
};

namespace detail {

// Activation derivatives in value form (argument is the activation value
// itself), so the tape never has to keep pre-activation z.
inline double act1(double a, bool out) {
  return out ? a * (1.0 - a) : 1.0 - a * a;
}
inline double act2(double a, bool out) {
  return out ? a * (1.0 - a) * (1.0 - 2.0 * a) : -2.0 * a * (1.0 - a * a);
}

// tanh through the packet-vectorized exp (Eigen's double tanh is scalar).
// The clamp saturates to exactly +-1, so the value-form derivative 1 - a^2
// stays the true slope of the computed function everywhere.
template <typename Derived>
Mat fast_tanh(const Eigen::MatrixBase<Derived>& z) {
  auto e = (2.0 * z.array().min(19.0).max(-19.0)).exp();
  return ((e - 1.0) / (e + 1.0)).matrix();
}

}  // namespace detail

// Forward record for one batch. Each layer's post-activation values and
// their (d/dx, d/dt) tangents are stacked as three B-row channel blocks of
// one matrix, so every layer transition is a single GEMM; pq keeps the
// pre-activation tangents the reverse sweep needs for the chain rule
// through sigma'.
struct Tape {
  std::vector<Mat> stack;  // stack[l]: 3B x sizes[l]; channels [V; dX; dT]
  std::vector<Mat> pq;     // pq[l]: 2B x sizes[l+1]; channels [P; Q]
  int batch = 0;
  bool consumed = false;

  Eigen::Block<Mat> values() { return stack.back().topRows(batch); }
  Eigen::Block<Mat> ddx() { return stack.back().middleRows(batch, batch); }
  Eigen::Block<Mat> ddt() { return stack.back().bottomRows(batch); }
  Eigen::Block<const Mat> values() const {
    return stack.back().topRows(batch);
  }
  Eigen::Block<const Mat> ddx() const {
    return stack.back().middleRows(batch, batch);
  }
  Eigen::Block<const Mat> ddt() const { return stack.back().bottomRows(batch); }
};

// Batched forward pass carrying exact (d/dx, d/dt) tangents. X is B x n_in;
// the input tangents are the identity rows (column j of input differentiated
// by coordinate j).
inline Tape forward_tangent(const DenseNet& net, const Mat& X) {
  if (X.cols() != net.n_in())
    throw ShapeMismatch("forward input has " + std::to_string(X.cols()) +
                        " columns, net expects " + std::to_string(net.n_in()));
  const int B = static_cast<int>(X.rows());
  const int L = net.layers();
  Tape t;
  t.batch = B;
  t.stack.reserve(L + 1);
  t.pq.reserve(L);
  Mat s0 = Mat::Zero(3 * B, net.n_in());
  s0.topRows(B) = X;
  for (int j = 0; j < net.n_in() && j < 2; ++j)
    s0.col(j).segment((1 + j) * B, B).setOnes();
  t.stack.push_back(std::move(s0));
  for (int l = 0; l < L; ++l) {
    const bool out = (l == L - 1);
    const int n = net.sizes[l + 1];
    Mat z3 = t.stack[l] * net.W[l].transpose();
    z3.topRows(B).rowwise() += net.b[l].transpose();
    t.pq.push_back(z3.bottomRows(2 * B));
    Mat s(3 * B, n);
    auto a = s.topRows(B);
    a = out ? z3.topRows(B)
                  .unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); })
                  .eval()
            : detail::fast_tanh(z3.topRows(B));
    Mat s1 = a.unaryExpr([out](double v) { return detail::act1(v, out); });
    s.middleRows(B, B) = s1.cwiseProduct(z3.middleRows(B, B));
    s.bottomRows(B) = s1.cwiseProduct(z3.bottomRows(B));
    t.stack.push_back(std::move(s));
  }
  return t;
}

// Reverse sweep. vbar/xbar/tbar are dLoss/d(values), dLoss/d(ddx),
// dLoss/d(ddt) at the output layer; parameter gradients accumulate into g.
// A tape supports exactly one sweep.
inline void backward(const DenseNet& net, Tape& t, const Mat& vbar0,
                     const Mat& xbar0, const Mat& tbar0, NetGrads& g) {
  if (t.consumed) throw TapeConsumed("tape already swept");
  t.consumed = true;
  const int B = t.batch;
  const int L = net.layers();
  if (vbar0.rows() != B || vbar0.cols() != net.n_out() ||
      xbar0.rows() != B || xbar0.cols() != net.n_out() ||
      tbar0.rows() != B || tbar0.cols() != net.n_out())
    throw ShapeMismatch("cotangent shape does not match the output layer");
  if (static_cast<int>(g.W.size()) != L)
    throw ShapeMismatch("gradient accumulator does not match the net");
  Mat vbar = vbar0, xbar = xbar0, tbar = tbar0;
  for (int l = L - 1; l >= 0; --l) {
    const bool out = (l == L - 1);
    const auto a = t.stack[l + 1].topRows(B);
    Mat s1 = a.unaryExpr([out](double v) { return detail::act1(v, out); });
    Mat s2 = a.unaryExpr([out](double v) { return detail::act2(v, out); });
    Mat g3(3 * B, net.sizes[l + 1]);
    g3.topRows(B) = vbar.cwiseProduct(s1) +
                    xbar.cwiseProduct(s2).cwiseProduct(t.pq[l].topRows(B)) +
                    tbar.cwiseProduct(s2).cwiseProduct(t.pq[l].bottomRows(B));
    g3.middleRows(B, B) = xbar.cwiseProduct(s1);
    g3.bottomRows(B) = tbar.cwiseProduct(s1);
    g.W[l].noalias() += g3.transpose() * t.stack[l];
    g.b[l].noalias() += g3.topRows(B).colwise().sum().transpose();
    if (l > 0) {
      Mat prev = g3 * net.W[l];
      vbar = prev.topRows(B);
      xbar = prev.middleRows(B, B);
      tbar = prev.bottomRows(B);
    }
  }
}

// Value-only batched forward for evaluation paths.
inline Mat forward_values(const DenseNet& net, const Mat& X) {
  if (X.cols() != net.n_in()) throw ShapeMismatch("forward input width");
  Mat a = X;
  for (int l = 0; l < net.layers(); ++l) {
    const bool out = (l == net.layers() - 1);
    Mat z = a * net.W[l].transpose();
    z.rowwise() += net.b[l].transpose();
    a = out ? z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); })
                  .eval()
            : detail::fast_tanh(z);
  }
  return a;
}

inline Vec forward(const DenseNet& net, double x, double t) {
  Mat X(1, 2);
  X << x, t;
  return forward_values(net, X).row(0).transpose();
}

// Exact first derivatives of every output with respect to (x, t).
inline std::pair<Vec, Vec> input_jacobian(const DenseNet& net, double x,
                                          double t) {
  Mat X(1, 2);
  X << x, t;
  Tape tape = forward_tangent(net, X);
  return {tape.ddx().row(0).transpose(), tape.ddt().row(0).transpose()};
}

// Linear decay from lr0 to the floor lr0/100 at the end of training.
inline double lr_linear(double lr0, long epoch, long total_epochs) {
  const double frac = 1.0 - static_cast<double>(epoch) / total_epochs;
  return lr0 * std::max(frac, 1e-2);
}

struct AdamState {
  std::vector<Mat> mW, vW;
  std::vector<Vec> mb, vb;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr0 = 1e-3;

  static AdamState like(const DenseNet& net) {
    AdamState s;
    for (int l = 0; l < net.layers(); ++l) {
      s.mW.push_back(Mat::Zero(net.W[l].rows(), net.W[l].cols()));
      s.vW.push_back(Mat::Zero(net.W[l].rows(), net.W[l].cols()));
      s.mb.push_back(Vec::Zero(net.b[l].size()));
      s.vb.push_back(Vec::Zero(net.b[l].size()));
    }
    return s;
  }
};

namespace detail {

template <class M>
void adam_update(M& theta, M& m, M& v, const M& grad, double lr, double b1,
                 double b2, double eps, long step) {
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v.array().matrix() + (1.0 - b2) * grad.cwiseProduct(grad);
  theta.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace detail

// One full-batch Adam step with bias correction and the linear-decay
// schedule evaluated at `epoch` out of `total_epochs`.
inline void adam_step(AdamState& s, DenseNet& net, const NetGrads& g,
                      long epoch, long total_epochs) {
  if (g.W.size() != net.W.size() || g.b.size() != net.b.size())
    throw ShapeMismatch("gradient layer count mismatch");
  for (size_t l = 0; l < net.W.size(); ++l)
    if (g.W[l].rows() != net.W[l].rows() || g.W[l].cols() != net.W[l].cols() ||
        g.b[l].size() != net.b[l].size())
      throw ShapeMismatch("gradient shape mismatch at layer " +
                          std::to_string(l));
  ++s.step;
  const double lr = lr_linear(s.lr0, epoch, total_epochs);
  for (size_t l = 0; l < net.W.size(); ++l) {
    detail::adam_update(net.W[l], s.mW[l], s.vW[l], g.W[l], lr, s.beta1,
                        s.beta2, s.eps, s.step);
    detail::adam_update(net.b[l], s.mb[l], s.vb[l], g.b[l], lr, s.beta1,
                        s.beta2, s.eps, s.step);
  }
}

// ---- checkpointing ----------------------------------------------------

namespace detail {

constexpr std::uint64_t kCheckpointMagic = 0x31544b43'4c42471aULL;

inline void put_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void get_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw Error("checkpoint truncated");
}
template <class T>
void put_pod(std::ostream& os, T v) {
  put_bytes(os, &v, sizeof v);
}
template <class T>
T get_pod(std::istream& is) {
  T v;
  get_bytes(is, &v, sizeof v);
  return v;
}
inline void put_mat(std::ostream& os, const Mat& m) {
  put_bytes(os, m.data(), sizeof(double) * m.size());
}
inline void get_mat(std::istream& is, Mat& m) {
  get_bytes(is, m.data(), sizeof(double) * m.size());
}
inline void put_vec(std::ostream& os, const Vec& v) {
  put_bytes(os, v.data(), sizeof(double) * v.size());
}
inline void get_vec(std::istream& is, Vec& v) {
  get_bytes(is, v.data(), sizeof(double) * v.size());
}

}  // namespace detail

struct Checkpoint {
  DenseNet net;
  AdamState opt;
  std::mt19937_64 rng;
  long epoch = 0;
};

// Versioned binary blob: layer sizes, parameters, optimizer state, RNG
// state, epoch counter. Raw double bytes, so round-trips are bitwise.
inline void save_checkpoint(std::ostream& os, const DenseNet& net,
                            const AdamState& opt, const std::mt19937_64& rng,
                            long epoch) {
  using namespace detail;
  put_pod(os, kCheckpointMagic);
  put_pod<std::int32_t>(os, static_cast<std::int32_t>(net.sizes.size()));
  for (int s : net.sizes) put_pod<std::int32_t>(os, s);
  for (int l = 0; l < net.layers(); ++l) {
    put_mat(os, net.W[l]);
    put_vec(os, net.b[l]);
  }
  put_pod(os, opt.beta1);
  put_pod(os, opt.beta2);
  put_pod(os, opt.eps);
  put_pod(os, opt.lr0);
  put_pod<std::int64_t>(os, opt.step);
  for (size_t l = 0; l < opt.mW.size(); ++l) {
    put_mat(os, opt.mW[l]);
    put_mat(os, opt.vW[l]);
    put_vec(os, opt.mb[l]);
    put_vec(os, opt.vb[l]);
  }
  std::ostringstream rs;
  rs << rng;  // the standard textual serialization restores exact state
  const std::string rstr = rs.str();
  put_pod<std::uint64_t>(os, rstr.size());
  put_bytes(os, rstr.data(), rstr.size());
  put_pod<std::int64_t>(os, epoch);
  if (!os) throw Error("checkpoint write failed");
}

inline Checkpoint load_checkpoint(std::istream& is) {
  using namespace detail;
  if (get_pod<std::uint64_t>(is) != kCheckpointMagic)
    throw Error("not a checkpoint (bad magic)");
  const auto nsz = get_pod<std::int32_t>(is);
  if (nsz < 2 || nsz > 1024) throw Error("checkpoint layer count implausible");
  Checkpoint c;
  c.net.sizes.resize(nsz);
  for (auto& s : c.net.sizes) s = get_pod<std::int32_t>(is);
  for (int l = 0; l + 1 < nsz; ++l) {
    c.net.W.emplace_back(c.net.sizes[l + 1], c.net.sizes[l]);
    c.net.b.emplace_back(c.net.sizes[l + 1]);
    get_mat(is, c.net.W.back());
    get_vec(is, c.net.b.back());
  }
  c.opt = AdamState::like(c.net);
  c.opt.beta1 = get_pod<double>(is);
  c.opt.beta2 = get_pod<double>(is);
  c.opt.eps = get_pod<double>(is);
  c.opt.lr0 = get_pod<double>(is);
  c.opt.step = get_pod<std::int64_t>(is);
  for (size_t l = 0; l < c.opt.mW.size(); ++l) {
    get_mat(is, c.opt.mW[l]);
    get_mat(is, c.opt.vW[l]);
    get_vec(is, c.opt.mb[l]);
    get_vec(is, c.opt.vb[l]);
  }
  const auto rn = get_pod<std::uint64_t>(is);
  std::string rstr(rn, '\0');
  get_bytes(is, rstr.data(), rn);
  std::istringstream rs(rstr);
  rs >> c.rng;
  if (!rs) throw Error("checkpoint RNG state unreadable");
  c.epoch = get_pod<std::int64_t>(is);
  return c;
}

inline void save_checkpoint_file(const std::string& path, const DenseNet& net,
                                 const AdamState& opt,
                                 const std::mt19937_64& rng, long epoch) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  save_checkpoint(os, net, opt, rng, epoch);
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path);
  return load_checkpoint(is);
}

}  // namespace gbl
