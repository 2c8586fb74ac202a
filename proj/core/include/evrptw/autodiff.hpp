#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace evrptw::ad {

using Mat = Eigen::MatrixXd;

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
};

/// Gradient storage aligned with a parameter list. Entries are empty until a
/// parameter receives a gradient.
using GradBuffer = std::vector<Mat>;

/// Minimal reverse-mode automatic differentiation over dense double
/// matrices. A Tape records one forward computation; backward() walks it in
/// reverse and accumulates parameter gradients into a caller-owned buffer,
/// so independent tapes can run on different threads against one read-only
/// parameter set.
class Tape {
 public:
  explicit Tape(const std::vector<Mat>* params = nullptr) : params_(params) {}

  Var constant(Mat value);
  Var scalar(double v);
  /// Parameter `index` of the bound list. Repeated calls return the same Var.
  Var param(int index);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  double item(Var v) const { return value(v)(0, 0); }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(out)/d(out) = 1 (out must be 1x1) and accumulates parameter
  /// gradients into `grads` (resized to the parameter count if needed).
  void backward(Var out, GradBuffer& grads);

  // Linear algebra
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1xC row over every row of a
  Var mul(Var a, Var b);        // elementwise
  Var mul_row(Var a, Var row);  // scale columns by a 1xC row
  Var mul_col(Var a, Var col);  // scale rows by an Rx1 column
  Var scale(Var a, double s);
  Var add_scalar(Var a, double c);
  /// a + s * c, with s a 1x1 Var and c a constant matrix of a's shape.
  Var add_scaled_const(Var a, Var s, const Mat& c);

  // Elementwise nonlinearities
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var square(Var a);
  Var clamp(Var a, double lo, double hi);
  Var minimum(Var a, Var b);
  Var maximum(Var a, Var b);

  // Shape
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_cols(Var a, int start, int count);
  Var row(Var a, int r);
  Var pick(Var a, int r, int c);
  /// Keeps rows where keep[r] != 0, zeroes the rest.
  Var mask_rows(Var a, const std::vector<char>& keep);

  // Reductions
  Var sum(Var a);
  Var mean_rows(Var a);  // 1xC column means

  // Normalization and attention helpers
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);
  /// Row-wise softmax where allowed(r, c) == 0 entries get probability 0.
  Var masked_softmax_rows(Var scores, const Eigen::ArrayXXd& allowed);
  /// Log-softmax of a 1xN row over allowed entries; disallowed entries hold
  /// -infinity and never receive gradient.
  Var masked_log_softmax(Var logits, const std::vector<char>& allowed);
  /// Shannon entropy of the masked softmax of a 1xN row.
  Var masked_entropy(Var logits, const std::vector<char>& allowed);

 private:
  using Backward = std::function<void(Tape&, const Mat& grad_out)>;

  struct Node {
    Mat value;
    Mat grad;
    Backward back;
    int param_index = -1;
    bool needs_grad = false;
  };

  Var push(Mat value, bool needs_grad, Backward back);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  void accumulate(Var v, const Mat& g);

  const std::vector<Mat>* params_;
  std::vector<Node> nodes_;
  std::unordered_map<int, Var> param_vars_;
};

}  // namespace evrptw::ad
