#include "aebs/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace aebs::ad {

const Mat& Var::value() const { return tape->value(id); }

Var Tape::constant(Mat v) {
  Node n;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Mat& v, Mat* grad_sink) {
  Node n;
  n.value = v;
  n.needs_grad = grad_sink != nullptr;
  n.sink = grad_sink;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Mat v, std::vector<int> parents, std::function<void(const Mat&, Tape&)> back) {
  Node n;
  n.value = std::move(v);
  for (int p : parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::invalid_argument("backward: foreign variable");
  if (nodes_[root.id].value.size() != 1) throw std::invalid_argument("backward: root must be a scalar");
  nodes_[root.id].grad = Mat::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(n.grad, *this);
    if (n.sink) *n.sink += n.grad;
  }
}

namespace {

void acc(Tape& t, int id, const Mat& g) {
  if (!t.needs_grad(id)) return;
  Mat& dst = t.grad(id);
  if (dst.size() == 0)
    dst = g;
  else
    dst += g;
}

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

double silu_scalar(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions");
  const int ia = a.id, ib = b.id;
  return a.tape->push(a.value() * b.value(), {ia, ib}, [ia, ib](const Mat& g, Tape& t) {
    if (t.needs_grad(ia)) acc(t, ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) acc(t, ib, t.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  const int ia = a.id, ib = b.id;
  return a.tape->push(a.value() + b.value(), {ia, ib}, [ia, ib](const Mat& g, Tape& t) {
    acc(t, ia, g);
    acc(t, ib, g);
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  const int ia = a.id, ib = b.id;
  return a.tape->push(a.value() - b.value(), {ia, ib}, [ia, ib](const Mat& g, Tape& t) {
    acc(t, ia, g);
    acc(t, ib, -g);
  });
}

Var hadamard(Var a, Var b) {
  same_shape(a, b, "hadamard");
  const int ia = a.id, ib = b.id;
  return a.tape->push(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](const Mat& g, Tape& t) {
    if (t.needs_grad(ia)) acc(t, ia, g.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) acc(t, ib, g.cwiseProduct(t.value(ia)));
  });
}

Var scale(Var a, double s) {
  const int ia = a.id;
  return a.tape->push(s * a.value(), {ia}, [ia, s](const Mat& g, Tape& t) { acc(t, ia, s * g); });
}

Var add_scalar(Var a, double s) {
  const int ia = a.id;
  return a.tape->push(a.value().array() + s, {ia}, [ia](const Mat& g, Tape& t) { acc(t, ia, g); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape");
  const int ia = a.id, ir = row.id;
  Mat v = a.value();
  v.rowwise() += row.value().row(0);
  return a.tape->push(std::move(v), {ia, ir}, [ia, ir](const Mat& g, Tape& t) {
    acc(t, ia, g);
    acc(t, ir, g.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("mul_row: shape");
  const int ia = a.id, ir = row.id;
  Mat v = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape->push(std::move(v), {ia, ir}, [ia, ir](const Mat& g, Tape& t) {
    if (t.needs_grad(ia)) acc(t, ia, (g.array().rowwise() * t.value(ir).row(0).array()).matrix());
    if (t.needs_grad(ir)) acc(t, ir, g.cwiseProduct(t.value(ia)).colwise().sum());
  });
}

Var silu(Var a) {
  const int ia = a.id;
  return a.tape->push(a.value().unaryExpr(&silu_scalar), {ia}, [ia](const Mat& g, Tape& t) {
    const Mat& x = t.value(ia);
    Mat d = x.unaryExpr([](double v) {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 + v * (1.0 - s));
    });
    acc(t, ia, g.cwiseProduct(d));
  });
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
  const Eigen::Index n = a.rows(), d = a.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d)
    throw std::invalid_argument("layer_norm: gain/bias shape");
  Mat xhat(n, d);
  Eigen::VectorXd inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = a.value().row(i).mean();
    const Eigen::RowVectorXd c = a.value().row(i).array() - mu;
    const double var = c.squaredNorm() / static_cast<double>(d);
    inv[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = c * inv[i];
  }
  Mat out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  const int ia = a.id, ig = gain.id, ib = bias.id;
  return a.tape->push(std::move(out), {ia, ig, ib}, [ia, ig, ib, xhat, inv](const Mat& g, Tape& t) {
    const Eigen::Index d = g.cols();
    acc(t, ig, g.cwiseProduct(xhat).colwise().sum());
    acc(t, ib, g.colwise().sum());
    if (!t.needs_grad(ia)) return;
    Mat gx = g.array().rowwise() * t.value(ig).row(0).array();
    Mat dx(g.rows(), d);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double m1 = gx.row(i).mean();
      const double m2 = gx.row(i).dot(xhat.row(i)) / static_cast<double>(d);
      dx.row(i) = inv[i] * (gx.row(i).array() - m1 - xhat.row(i).array() * m2);
    }
    acc(t, ia, dx);
  });
}

Var softmax_rows(Var a) {
  Mat p = a.value();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  const int ia = a.id;
  Mat pv = p;
  return a.tape->push(std::move(p), {ia}, [ia, pv](const Mat& g, Tape& t) {
    Mat dx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double s = g.row(i).dot(pv.row(i));
      dx.row(i) = pv.row(i).array() * (g.row(i).array() - s);
    }
    acc(t, ia, dx);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const Eigen::Index n = parts.front().rows();
  Eigen::Index total = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    if (p.rows() != n) throw std::invalid_argument("concat_cols: row mismatch");
    total += p.cols();
    ids.push_back(p.id);
    widths.push_back(p.cols());
  }
  Mat v(n, total);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return parts.front().tape->push(std::move(v), ids, [ids, widths](const Mat& g, Tape& t) {
    Eigen::Index o = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      acc(t, ids[i], g.middleCols(o, widths[i]));
      o += widths[i];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const Eigen::Index d = parts.front().cols();
  Eigen::Index total = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (const auto& p : parts) {
    if (p.cols() != d) throw std::invalid_argument("concat_rows: column mismatch");
    total += p.rows();
    ids.push_back(p.id);
    heights.push_back(p.rows());
  }
  Mat v(total, d);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return parts.front().tape->push(std::move(v), ids, [ids, heights](const Mat& g, Tape& t) {
    Eigen::Index o = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      acc(t, ids[i], g.middleRows(o, heights[i]));
      o += heights[i];
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || start + len > a.cols()) throw std::out_of_range("slice_cols");
  const int ia = a.id;
  const Eigen::Index cols = a.cols();
  return a.tape->push(a.value().middleCols(start, len), {ia}, [ia, start, len, cols](const Mat& g, Tape& t) {
    Mat full = Mat::Zero(g.rows(), cols);
    full.middleCols(start, len) = g;
    acc(t, ia, full);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || start + len > a.rows()) throw std::out_of_range("slice_rows");
  const int ia = a.id;
  const Eigen::Index rows = a.rows();
  return a.tape->push(a.value().middleRows(start, len), {ia}, [ia, start, len, rows](const Mat& g, Tape& t) {
    Mat full = Mat::Zero(rows, g.cols());
    full.middleRows(start, len) = g;
    acc(t, ia, full);
  });
}

Var gather_rows(Var a, const std::vector<int>& idx) {
  Mat v(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  const int ia = a.id;
  const Eigen::Index rows = a.rows();
  return a.tape->push(std::move(v), {ia}, [ia, idx, rows](const Mat& g, Tape& t) {
    Mat full = Mat::Zero(rows, g.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    acc(t, ia, full);
  });
}

Var mean_rows(Var a) {
  const Eigen::Index n = a.rows();
  const int ia = a.id;
  Mat v = n > 0 ? Mat(a.value().colwise().mean()) : Mat::Zero(1, a.cols());
  return a.tape->push(std::move(v), {ia}, [ia, n](const Mat& g, Tape& t) {
    if (n == 0) return;
    acc(t, ia, g.replicate(n, 1) / static_cast<double>(n));
  });
}

Var transpose(Var a) {
  const int ia = a.id;
  return a.tape->push(a.value().transpose(), {ia}, [ia](const Mat& g, Tape& t) { acc(t, ia, g.transpose()); });
}

Var scatter_pairs(Var pairs, int K, int N) {
  if (pairs.rows() != static_cast<Eigen::Index>(K) * N || pairs.cols() != 1)
    throw std::invalid_argument("scatter_pairs: shape");
  Mat v = Mat::Zero(K + N, K + N);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const double e = pairs.value()(k * N + n, 0);
      v(k, K + n) = e;
      v(K + n, k) = e;
    }
  const int ip = pairs.id;
  return pairs.tape->push(std::move(v), {ip}, [ip, K, N](const Mat& g, Tape& t) {
    Mat d(static_cast<Eigen::Index>(K) * N, 1);
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) d(k * N + n, 0) = g(k, K + n) + g(K + n, k);
    acc(t, ip, d);
  });
}

Var weighted_log_prob(Var probs, const Mat& weights, double floor) {
  if (weights.rows() != probs.rows() || weights.cols() != probs.cols())
    throw std::invalid_argument("weighted_log_prob: shape");
  const Eigen::VectorXd inner = probs.value().cwiseProduct(weights).rowwise().sum();
  double v = 0.0;
  Eigen::VectorXd inv(inner.size());
  for (Eigen::Index i = 0; i < inner.size(); ++i) {
    const double s = std::max(inner[i], floor);
    v += std::log(s);
    inv[i] = inner[i] > floor ? 1.0 / s : 0.0;
  }
  const int ip = probs.id;
  return probs.tape->push(Mat::Constant(1, 1, v), {ip}, [ip, weights, inv](const Mat& g, Tape& t) {
    acc(t, ip, g(0, 0) * (weights.array().colwise() * inv.array()).matrix());
  });
}

Var sum(Var a) {
  const int ia = a.id;
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape->push(Mat::Constant(1, 1, a.value().sum()), {ia},
                      [ia, r, c](const Mat& g, Tape& t) { acc(t, ia, Mat::Constant(r, c, g(0, 0))); });
}

}  // namespace aebs::ad
