#include "doctest.h"

#include <functional>

#include "aebs/autograd.hpp"
#include "aebs/rng.hpp"
#include "oracles.hpp"

using namespace aebs;
using ad::Mat;
using ad::Var;

namespace {

Mat random_mat(int r, int c, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Mat m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform01(rng) - 1.0;
  return m;
}

// Checks d/dx sum(op(x) .* R) against central differences for every input.
void check_op(const std::vector<Mat>& inputs, const std::function<Var(ad::Tape&, const std::vector<Var>&)>& op,
              double tol = 1e-6) {
  const auto eval = [&](const std::vector<Mat>& xs, std::vector<Mat>* grads) {
    ad::Tape tape;
    std::vector<Var> vars;
    if (grads) grads->resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (grads) (*grads)[i] = Mat::Zero(xs[i].rows(), xs[i].cols());
      vars.push_back(tape.param(xs[i], grads ? &(*grads)[i] : nullptr));
    }
    const Var out = op(tape, vars);
    const Var r = tape.constant(random_mat(static_cast<int>(out.rows()), static_cast<int>(out.cols()), 77));
    const Var loss = ad::sum(ad::hadamard(out, r));
    if (grads) tape.backward(loss);
    return loss.value()(0, 0);
  };
  std::vector<Mat> grads;
  eval(inputs, &grads);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Eigen::VectorXd x = inputs[i].reshaped();
    const auto f = [&](const Eigen::VectorXd& v) {
      std::vector<Mat> xs = inputs;
      xs[i] = v.reshaped(inputs[i].rows(), inputs[i].cols());
      return eval(xs, nullptr);
    };
    const Eigen::VectorXd fd = oracle::finite_difference(f, x, 1e-6);
    const Eigen::VectorXd an = grads[i].reshaped();
    CHECK((fd - an).cwiseAbs().maxCoeff() <= tol * (1.0 + fd.cwiseAbs().maxCoeff()));
  }
}

}  // namespace

TEST_SUITE("autograd") {
  TEST_CASE("elementwise and linear ops") {
    const Mat a = random_mat(3, 4, 1), b = random_mat(4, 2, 2), c = random_mat(3, 4, 3);
    check_op({a, b}, [](ad::Tape&, const std::vector<Var>& v) { return ad::matmul(v[0], v[1]); });
    check_op({a, c}, [](ad::Tape&, const std::vector<Var>& v) { return ad::add(v[0], v[1]); });
    check_op({a, c}, [](ad::Tape&, const std::vector<Var>& v) { return ad::sub(v[0], v[1]); });
    check_op({a, c}, [](ad::Tape&, const std::vector<Var>& v) { return ad::hadamard(v[0], v[1]); });
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::scale(v[0], -1.7); });
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::add_scalar(v[0], 0.3); });
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::silu(v[0]); });
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::transpose(v[0]); });
  }

  TEST_CASE("row broadcasts, normalization and softmax") {
    const Mat a = random_mat(3, 4, 4), row = random_mat(1, 4, 5), row2 = random_mat(1, 4, 6);
    check_op({a, row}, [](ad::Tape&, const std::vector<Var>& v) { return ad::add_row(v[0], v[1]); });
    check_op({a, row}, [](ad::Tape&, const std::vector<Var>& v) { return ad::mul_row(v[0], v[1]); });
    check_op({a, row, row2}, [](ad::Tape&, const std::vector<Var>& v) { return ad::layer_norm(v[0], v[1], v[2]); },
             1e-5);
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::softmax_rows(v[0]); });
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::mean_rows(v[0]); });
  }

  TEST_CASE("structural ops") {
    const Mat a = random_mat(3, 4, 7), b = random_mat(3, 2, 8), c = random_mat(2, 4, 9);
    check_op({a, b}, [](ad::Tape&, const std::vector<Var>& v) { return ad::concat_cols({v[0], v[1]}); });
    check_op({a, c}, [](ad::Tape&, const std::vector<Var>& v) { return ad::concat_rows({v[0], v[1]}); });
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::slice_cols(v[0], 1, 2); });
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::slice_rows(v[0], 1, 2); });
    check_op({a}, [](ad::Tape&, const std::vector<Var>& v) { return ad::gather_rows(v[0], {2, 0, 2, 1}); });
    const Mat pairs = random_mat(6, 1, 10);
    check_op({pairs}, [](ad::Tape&, const std::vector<Var>& v) { return ad::scatter_pairs(v[0], 2, 3); });
  }

  TEST_CASE("scatter places each pair symmetrically") {
    ad::Tape tape;
    Mat p(6, 1);
    p << 1, 2, 3, 4, 5, 6;
    const Mat m = ad::scatter_pairs(tape.constant(p), 2, 3).value();
    CHECK(m(0, 2) == 1.0);
    CHECK(m(2, 0) == 1.0);
    CHECK(m(1, 4) == 6.0);
    CHECK(m(4, 1) == 6.0);
    CHECK(m(0, 0) == 0.0);
  }

  TEST_CASE("weighted log-probability") {
    Mat logits = random_mat(3, 4, 11);
    const Mat w = random_mat(3, 4, 12).cwiseAbs();
    check_op({logits}, [&w](ad::Tape& tape, const std::vector<Var>& v) {
      return ad::weighted_log_prob(ad::softmax_rows(v[0]), w);
    });
    ad::Tape tape;
    const Var p = ad::softmax_rows(tape.constant(logits));
    double direct = 0.0;
    for (int i = 0; i < 3; ++i) direct += std::log(w.row(i).dot(p.value().row(i)));
    CHECK(ad::weighted_log_prob(p, w).value()(0, 0) == doctest::Approx(direct));
  }

  TEST_CASE("gradients accumulate over repeated uses") {
    Mat g = Mat::Zero(1, 1);
    ad::Tape tape;
    const Var x = tape.param(Mat::Constant(1, 1, 3.0), &g);
    tape.backward(ad::sum(ad::hadamard(x, x)));
    CHECK(g(0, 0) == doctest::Approx(6.0));
  }
}
