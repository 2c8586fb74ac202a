#include "evrptw/autodiff.hpp"

#include <cmath>
#include <limits>

#include "evrptw/error.hpp"

namespace evrptw::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(std::string("autodiff shape error: ") + what);
}

}  // namespace

Var Tape::push(Mat value, bool needs_grad, Backward back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Mat& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

Var Tape::param(int index) {
  if (auto it = param_vars_.find(index); it != param_vars_.end()) return it->second;
  require(params_ != nullptr && index >= 0 && index < static_cast<int>(params_->size()), "unknown parameter");
  Var v = push((*params_)[static_cast<std::size_t>(index)], true, nullptr);
  nodes_[static_cast<std::size_t>(v.id)].param_index = index;
  param_vars_.emplace(index, v);
  return v;
}

void Tape::backward(Var out, GradBuffer& grads) {
  require(value(out).size() == 1, "backward needs a scalar output");
  if (params_ != nullptr && grads.size() < params_->size()) grads.resize(params_->size());
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[static_cast<std::size_t>(out.id)].grad = Mat::Ones(1, 1);
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param_index >= 0) {
      Mat& g = grads[static_cast<std::size_t>(n.param_index)];
      if (g.size() == 0) {
        g = n.grad;
      } else {
        g += n.grad;
      }
      continue;
    }
    if (n.back) {
      const Mat grad = std::move(n.grad);
      n.back(*this, grad);
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul");
  Mat out = value(a) * value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::transpose(Var a) {
  return push(value(a).transpose(), needs(a), [a](Tape& t, const Mat& g) { t.accumulate(a, g.transpose()); });
}

Var Tape::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add");
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub");
  return push(value(a) - value(b), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (t.needs(b)) t.accumulate(b, -g);
  });
}

Var Tape::add_row(Var a, Var row) {
  require(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row");
  Mat out = value(a).rowwise() + value(row).row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (t.needs(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::mul(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "mul");
  Mat out = value(a).cwiseProduct(value(b));
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    if (t.needs(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.needs(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var Tape::mul_row(Var a, Var row) {
  require(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "mul_row");
  Mat out = value(a).array().rowwise() * value(row).row(0).array();
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, const Mat& g) {
    if (t.needs(a)) t.accumulate(a, (g.array().rowwise() * t.value(row).row(0).array()).matrix());
    if (t.needs(row)) t.accumulate(row, g.cwiseProduct(t.value(a)).colwise().sum());
  });
}

Var Tape::mul_col(Var a, Var col) {
  require(value(col).cols() == 1 && value(col).rows() == value(a).rows(), "mul_col");
  Mat out = value(a).array().colwise() * value(col).col(0).array();
  return push(std::move(out), needs(a) || needs(col), [a, col](Tape& t, const Mat& g) {
    if (t.needs(a)) t.accumulate(a, (g.array().colwise() * t.value(col).col(0).array()).matrix());
    if (t.needs(col)) t.accumulate(col, g.cwiseProduct(t.value(a)).rowwise().sum());
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, needs(a), [a, s](Tape& t, const Mat& g) { t.accumulate(a, g * s); });
}

Var Tape::add_scalar(Var a, double c) {
  Mat out = value(a).array() + c;
  return push(std::move(out), needs(a), [a](Tape& t, const Mat& g) { t.accumulate(a, g); });
}

Var Tape::add_scaled_const(Var a, Var s, const Mat& c) {
  require(value(s).size() == 1 && c.rows() == value(a).rows() && c.cols() == value(a).cols(), "add_scaled_const");
  Mat out = value(a) + item(s) * c;
  return push(std::move(out), needs(a) || needs(s), [a, s, c](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (t.needs(s)) t.accumulate(s, Mat::Constant(1, 1, g.cwiseProduct(c).sum()));
  });
}

Var Tape::relu(Var a) {
  Mat out = value(a).cwiseMax(0.0);
  return push(std::move(out), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a, (t.value(a).array() > 0.0).select(g, 0.0).matrix());
  });
}

Var Tape::sigmoid(Var a) {
  Mat out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), needs(a), [a, self](Tape& t, const Mat& g) {
    const Mat& y = t.nodes_[static_cast<std::size_t>(self)].value;
    t.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var Tape::tanh(Var a) {
  Mat out = value(a).array().tanh().matrix();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), needs(a), [a, self](Tape& t, const Mat& g) {
    const Mat& y = t.nodes_[static_cast<std::size_t>(self)].value;
    t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var Tape::exp(Var a) {
  Mat out = value(a).array().exp().matrix();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), needs(a), [a, self](Tape& t, const Mat& g) {
    t.accumulate(a, g.cwiseProduct(t.nodes_[static_cast<std::size_t>(self)].value));
  });
}

Var Tape::square(Var a) {
  return push(value(a).array().square().matrix(), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a, (2.0 * g.array() * t.value(a).array()).matrix());
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Mat out = value(a).cwiseMax(lo).cwiseMin(hi);
  return push(std::move(out), needs(a), [a, lo, hi](Tape& t, const Mat& g) {
    const auto& x = t.value(a).array();
    t.accumulate(a, ((x >= lo) && (x <= hi)).select(g, 0.0).matrix());
  });
}

Var Tape::minimum(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "minimum");
  Mat out = value(a).cwiseMin(value(b));
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    const auto take_a = t.value(a).array() <= t.value(b).array();
    t.accumulate(a, take_a.select(g, 0.0).matrix());
    t.accumulate(b, take_a.select(0.0, g).matrix());
  });
}

Var Tape::maximum(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "maximum");
  Mat out = value(a).cwiseMax(value(b));
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    const auto take_a = t.value(a).array() >= t.value(b).array();
    t.accumulate(a, take_a.select(g, 0.0).matrix());
    t.accumulate(b, take_a.select(0.0, g).matrix());
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool ng = false;
  for (Var p : parts) {
    require(value(p).rows() == rows, "concat_cols rows");
    cols += value(p).cols();
    ng = ng || needs(p);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(out), ng, [parts](Tape& t, const Mat& g) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index c = t.value(p).cols();
      if (t.needs(p)) t.accumulate(p, g.middleCols(at, c));
      at += c;
    }
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool ng = false;
  for (Var p : parts) {
    require(value(p).cols() == cols, "concat_rows cols");
    rows += value(p).rows();
    ng = ng || needs(p);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  return push(std::move(out), ng, [parts](Tape& t, const Mat& g) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index r = t.value(p).rows();
      if (t.needs(p)) t.accumulate(p, g.middleRows(at, r));
      at += r;
    }
  });
}

Var Tape::slice_cols(Var a, int start, int count) {
  require(start >= 0 && count >= 0 && start + count <= value(a).cols(), "slice_cols");
  Mat out = value(a).middleCols(start, count);
  return push(std::move(out), needs(a), [a, start, count](Tape& t, const Mat& g) {
    Mat full = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var Tape::row(Var a, int r) {
  require(r >= 0 && r < value(a).rows(), "row");
  Mat out = value(a).row(r);
  return push(std::move(out), needs(a), [a, r](Tape& t, const Mat& g) {
    Mat full = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    full.row(r) = g;
    t.accumulate(a, full);
  });
}

Var Tape::pick(Var a, int r, int c) {
  require(r >= 0 && r < value(a).rows() && c >= 0 && c < value(a).cols(), "pick");
  return push(Mat::Constant(1, 1, value(a)(r, c)), needs(a), [a, r, c](Tape& t, const Mat& g) {
    Mat full = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    full(r, c) = g(0, 0);
    t.accumulate(a, full);
  });
}

Var Tape::mask_rows(Var a, const std::vector<char>& keep) {
  require(static_cast<Eigen::Index>(keep.size()) == value(a).rows(), "mask_rows");
  Mat out = value(a);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (!keep[static_cast<std::size_t>(r)]) out.row(r).setZero();
  }
  return push(std::move(out), needs(a), [a, keep](Tape& t, const Mat& g) {
    Mat m = g;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (!keep[static_cast<std::size_t>(r)]) m.row(r).setZero();
    }
    t.accumulate(a, m);
  });
}

Var Tape::sum(Var a) {
  return push(Mat::Constant(1, 1, value(a).sum()), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a, Mat::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

Var Tape::mean_rows(Var a) {
  const double n = static_cast<double>(value(a).rows());
  Mat out = value(a).colwise().mean();
  return push(std::move(out), needs(a), [a, n](Tape& t, const Mat& g) {
    Mat full = g.replicate(t.value(a).rows(), 1) / n;
    t.accumulate(a, full);
  });
}

Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Mat& xv = value(x);
  const Eigen::Index c = xv.cols();
  require(value(gain).rows() == 1 && value(gain).cols() == c && value(bias).cols() == c, "layer_norm_rows");
  Mat xhat(xv.rows(), c);
  Eigen::VectorXd inv(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const auto centered = (xv.row(r).array() - mu).eval();
    const double var = centered.square().mean();
    inv(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (centered * inv(r)).matrix();
  }
  Mat out = (xhat.array().rowwise() * value(gain).row(0).array()).rowwise() + value(bias).row(0).array();
  const bool ng = needs(x) || needs(gain) || needs(bias);
  return push(out, ng, [x, gain, bias, xhat, inv](Tape& t, const Mat& g) {
    const Eigen::Index c = xhat.cols();
    if (t.needs(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
    if (t.needs(bias)) t.accumulate(bias, g.colwise().sum());
    if (t.needs(x)) {
      Mat dx(xhat.rows(), c);
      const auto gain_row = t.value(gain).row(0).array();
      for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
        const auto dxhat = (g.row(r).array() * gain_row).eval();
        const double s1 = dxhat.sum();
        const double s2 = (dxhat * xhat.row(r).array()).sum();
        dx.row(r) = ((static_cast<double>(c) * dxhat - s1 - xhat.row(r).array() * s2) * (inv(r) / static_cast<double>(c)))
                        .matrix();
      }
      t.accumulate(x, dx);
    }
  });
}

Var Tape::masked_softmax_rows(Var scores, const Eigen::ArrayXXd& allowed) {
  const Mat& s = value(scores);
  require(allowed.rows() == s.rows() && allowed.cols() == s.cols(), "masked_softmax_rows");
  Mat p = Mat::Zero(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      if (allowed(r, c) != 0.0) mx = std::max(mx, s(r, c));
    }
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      if (allowed(r, c) != 0.0) {
        p(r, c) = std::exp(s(r, c) - mx);
        z += p(r, c);
      }
    }
    p.row(r) /= z;
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(p), needs(scores), [scores, self](Tape& t, const Mat& g) {
    const Mat& p = t.nodes_[static_cast<std::size_t>(self)].value;
    const Eigen::VectorXd dot = g.cwiseProduct(p).rowwise().sum();
    Mat ds = (p.array() * (g.colwise() - dot).array()).matrix();
    t.accumulate(scores, ds);
  });
}

namespace {

// Returns log-probabilities over allowed entries (others -inf).
Mat masked_log_softmax_value(const Mat& logits, const std::vector<char>& allowed) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    if (allowed[static_cast<std::size_t>(c)]) mx = std::max(mx, logits(0, c));
  }
  if (!std::isfinite(mx)) throw InvalidArgument("softmax over an empty mask");
  double z = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    if (allowed[static_cast<std::size_t>(c)]) z += std::exp(logits(0, c) - mx);
  }
  const double lse = mx + std::log(z);
  Mat out(1, logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    out(0, c) = allowed[static_cast<std::size_t>(c)] ? logits(0, c) - lse : -std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

Var Tape::masked_log_softmax(Var logits, const std::vector<char>& allowed) {
  require(value(logits).rows() == 1 && static_cast<Eigen::Index>(allowed.size()) == value(logits).cols(),
          "masked_log_softmax");
  Mat out = masked_log_softmax_value(value(logits), allowed);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), needs(logits), [logits, allowed, self](Tape& t, const Mat& g) {
    const Mat& lp = t.nodes_[static_cast<std::size_t>(self)].value;
    double gsum = 0.0;
    for (Eigen::Index c = 0; c < lp.cols(); ++c) {
      if (allowed[static_cast<std::size_t>(c)]) gsum += g(0, c);
    }
    Mat dz = Mat::Zero(1, lp.cols());
    for (Eigen::Index c = 0; c < lp.cols(); ++c) {
      if (allowed[static_cast<std::size_t>(c)]) dz(0, c) = g(0, c) - std::exp(lp(0, c)) * gsum;
    }
    t.accumulate(logits, dz);
  });
}

Var Tape::masked_entropy(Var logits, const std::vector<char>& allowed) {
  require(value(logits).rows() == 1 && static_cast<Eigen::Index>(allowed.size()) == value(logits).cols(),
          "masked_entropy");
  const Mat lp = masked_log_softmax_value(value(logits), allowed);
  double h = 0.0;
  for (Eigen::Index c = 0; c < lp.cols(); ++c) {
    if (allowed[static_cast<std::size_t>(c)]) h -= std::exp(lp(0, c)) * lp(0, c);
  }
  return push(Mat::Constant(1, 1, h), needs(logits), [logits, allowed, lp, h](Tape& t, const Mat& g) {
    Mat dz = Mat::Zero(1, lp.cols());
    for (Eigen::Index c = 0; c < lp.cols(); ++c) {
      if (allowed[static_cast<std::size_t>(c)]) {
        const double p = std::exp(lp(0, c));
        dz(0, c) = -g(0, 0) * p * (lp(0, c) + h);
      }
    }
    t.accumulate(logits, dz);
  });
}

}  // namespace evrptw::ad
