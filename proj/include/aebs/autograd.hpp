#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace aebs::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order, so a backward sweep in reverse order visits every consumer before
// its inputs.
class Tape {
 public:
  Var constant(Mat v);
  // Leaf bound to an external parameter; backward adds into *grad_sink.
  Var param(const Mat& v, Mat* grad_sink);

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
  void backward(Var root);

  const Mat& value(int id) const { return nodes_[id].value; }

  // Used by the op implementations.
  Var push(Mat v, std::vector<int> parents, std::function<void(const Mat& g, Tape& tape)> back);
  Mat& grad(int id) { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    Mat* sink = nullptr;
    std::function<void(const Mat& g, Tape& tape)> back;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// a (n x d) plus a 1 x d row broadcast to every row.
Var add_row(Var a, Var row);
// a (n x d) times a 1 x d row broadcast to every row, elementwise.
Var mul_row(Var a, Var row);
Var silu(Var a);
// Per-row standardization followed by the affine gain / bias rows (1 x d).
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
Var softmax_rows(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index len);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index len);
Var gather_rows(Var a, const std::vector<int>& idx);
Var mean_rows(Var a);
Var transpose(Var a);
// Places column c of `pairs` ((K*N) x 1, row k*N+n) at (k, K+n) and (K+n, k)
// of a zero (K+N) x (K+N) matrix.
Var scatter_pairs(Var pairs, int K, int N);
// sum_i log(sum_c w_ic p_ic) for probabilities p and fixed weights w, with
// each inner sum floored at `floor` to keep the value finite.
Var weighted_log_prob(Var probs, const Mat& weights, double floor = 1e-300);
Var sum(Var a);

}  // namespace aebs::ad
