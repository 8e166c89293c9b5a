#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tpt/errors.hpp"

namespace tpt {

// All model state is rank-2 (sequences x channels), so dense Eigen matrices
// are the universal storage type. Row-major keeps per-token rows contiguous
// for file IO and gather ops.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-position validity mask: true = real token, false = padding.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

using NodeId = std::int32_t;

template <class S>
bool all_finite(const Mat<S>& m) {
  return m.allFinite();
}

// Named trainable tensor. `grad` always has the same shape as `value` and
// accumulates across backward passes until explicitly zeroed.
template <class S>
struct Parameter {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Mat<S> v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat<S>::Zero(value.rows(), value.cols());
  }
};

template <class S>
void zero_grads(const std::vector<Parameter<S>*>& params) {
  for (Parameter<S>* p : params) p->grad.setZero();
}

template <class S>
class Tape;

// Lightweight handle into a tape. Copyable; the tape owns all storage.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  NodeId id = -1;

  const Mat<S>& value() const { return tape->value(id); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Define-by-run reverse-mode tape. A fresh tape is built per forward pass;
// node order is creation order, which is already a topological order, so
// backward is a single reverse sweep. When `recording` is false the tape
// stores values only (no pull closures, no gradient buffers) -- the cheap
// mode used for finite-difference sweeps and pure inference.
template <class S>
class Tape {
 public:
  using Pull = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording = true;

  Var<S> constant(Mat<S> v) {
    return Var<S>{this, push(std::move(v))};
  }

  // Parameter leaves are cached: every use of the same parameter on this
  // tape resolves to one node, so gradients from all use sites accumulate
  // through shared storage.
  Var<S> leaf(Parameter<S>& p) {
    auto it = leaf_cache_.find(&p);
    if (it != leaf_cache_.end()) return Var<S>{this, it->second};
    NodeId id = push(Mat<S>(p.value));
    nodes_[static_cast<std::size_t>(id)].param = &p;
    leaf_cache_.emplace(&p, id);
    return Var<S>{this, id};
  }

  const Mat<S>& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Mat<S>& grad(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  NodeId push(Mat<S> v) {
    nodes_.push_back(Node{std::move(v), Mat<S>(), nullptr, nullptr});
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void set_pull(NodeId id, Pull fn) {
    if (recording) nodes_[static_cast<std::size_t>(id)].pull = std::move(fn);
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation order,
  // then adds each parameter leaf's node gradient into Parameter::grad.
  void backward(Var<S> loss) {
    require(loss.tape == this, ErrorKind::Usage, "backward: loss lives on a different tape");
    require(recording, ErrorKind::Usage, "backward: tape was built with recording disabled");
    const auto& lv = value(loss.id);
    require(lv.rows() == 1 && lv.cols() == 1, ErrorKind::Shape,
            "backward: loss must be 1x1, got ", lv.rows(), "x", lv.cols());
    require(std::isfinite(static_cast<double>(lv(0, 0))), ErrorKind::Numeric,
            "backward: loss is not finite");
    for (auto& n : nodes_) {
      n.grad = Mat<S>::Zero(n.value.rows(), n.value.cols());
    }
    nodes_[static_cast<std::size_t>(loss.id)].grad(0, 0) = S(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].pull) nodes_[i].pull(*this);
    }
    for (const auto& n : nodes_) {
      if (n.param != nullptr) n.param->grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }
  int clamp_events = 0;  // incremented by log_clamped when the floor engages

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    Pull pull;
    Parameter<S>* param;
  };
  // Deque, not vector: value()/grad() hand out references into this store
  // and composite ops keep them live across push() calls, so node storage
  // must never relocate as the tape grows.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<S>*, NodeId> leaf_cache_;
};

namespace detail {
template <class S>
Tape<S>& same_tape(Var<S> a, Var<S> b, const char* op) {
  require(a.tape != nullptr && a.tape == b.tape, ErrorKind::Usage, op,
          ": operands must live on the same tape");
  return *a.tape;
}
}  // namespace detail

// ---- elementwise / broadcast ------------------------------------------------

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  Tape<S>& t = detail::same_tape(a, b, "add");
  const auto& av = t.value(a.id);
  const auto& bv = t.value(b.id);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), ErrorKind::Shape,
          "add: shape mismatch ", av.rows(), "x", av.cols(), " vs ", bv.rows(), "x", bv.cols());
  NodeId out = t.push(av + bv);
  t.set_pull(out, [a = a.id, b = b.id, out](Tape<S>& tp) {
    tp.grad(a) += tp.grad(out);
    tp.grad(b) += tp.grad(out);
  });
  return Var<S>{&t, out};
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  Tape<S>& t = detail::same_tape(a, b, "sub");
  const auto& av = t.value(a.id);
  const auto& bv = t.value(b.id);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), ErrorKind::Shape,
          "sub: shape mismatch ", av.rows(), "x", av.cols(), " vs ", bv.rows(), "x", bv.cols());
  NodeId out = t.push(av - bv);
  t.set_pull(out, [a = a.id, b = b.id, out](Tape<S>& tp) {
    tp.grad(a) += tp.grad(out);
    tp.grad(b) -= tp.grad(out);
  });
  return Var<S>{&t, out};
}

// Adds a 1 x c row vector to every row of x.
template <class S>
Var<S> add_row(Var<S> x, Var<S> row) {
  Tape<S>& t = detail::same_tape(x, row, "add_row");
  const auto& xv = t.value(x.id);
  const auto& rv = t.value(row.id);
  require(rv.rows() == 1 && rv.cols() == xv.cols(), ErrorKind::Shape,
          "add_row: expected 1x", xv.cols(), " row, got ", rv.rows(), "x", rv.cols());
  Mat<S> y = xv;
  y.rowwise() += rv.row(0);
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, r = row.id, out](Tape<S>& tp) {
    tp.grad(x) += tp.grad(out);
    tp.grad(r).row(0) += tp.grad(out).colwise().sum();
  });
  return Var<S>{&t, out};
}

template <class S>
Var<S> add_const(Var<S> x, S c) {
  Tape<S>& t = *x.tape;
  NodeId out = t.push(Mat<S>(t.value(x.id).array() + c));
  t.set_pull(out, [x = x.id, out](Tape<S>& tp) { tp.grad(x) += tp.grad(out); });
  return Var<S>{&t, out};
}

template <class S>
Var<S> scale(Var<S> x, S s) {
  Tape<S>& t = *x.tape;
  NodeId out = t.push(Mat<S>(t.value(x.id) * s));
  t.set_pull(out, [x = x.id, out, s](Tape<S>& tp) { tp.grad(x) += s * tp.grad(out); });
  return Var<S>{&t, out};
}

template <class S>
Var<S> square(Var<S> x) {
  Tape<S>& t = *x.tape;
  NodeId out = t.push(Mat<S>(t.value(x.id).array().square()));
  t.set_pull(out, [x = x.id, out](Tape<S>& tp) {
    tp.grad(x).array() += S(2) * tp.value(x).array() * tp.grad(out).array();
  });
  return Var<S>{&t, out};
}

// ---- linear algebra ---------------------------------------------------------

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Tape<S>& t = detail::same_tape(a, b, "matmul");
  const auto& av = t.value(a.id);
  const auto& bv = t.value(b.id);
  require(av.cols() == bv.rows(), ErrorKind::Shape, "matmul: inner dims differ, ",
          av.rows(), "x", av.cols(), " * ", bv.rows(), "x", bv.cols());
  NodeId out = t.push(Mat<S>(av * bv));
  t.set_pull(out, [a = a.id, b = b.id, out](Tape<S>& tp) {
    tp.grad(a).noalias() += tp.grad(out) * tp.value(b).transpose();
    tp.grad(b).noalias() += tp.value(a).transpose() * tp.grad(out);
  });
  return Var<S>{&t, out};
}

template <class S>
Var<S> transpose(Var<S> x) {
  Tape<S>& t = *x.tape;
  NodeId out = t.push(Mat<S>(t.value(x.id).transpose()));
  t.set_pull(out, [x = x.id, out](Tape<S>& tp) {
    tp.grad(x) += tp.grad(out).transpose();
  });
  return Var<S>{&t, out};
}

// ---- structural ops ---------------------------------------------------------

template <class S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  require(!parts.empty(), ErrorKind::Usage, "concat_rows: no inputs");
  Tape<S>& t = *parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.value(parts[0].id).cols();
  for (const auto& p : parts) {
    require(p.tape == &t, ErrorKind::Usage, "concat_rows: mixed tapes");
    require(t.value(p.id).cols() == cols, ErrorKind::Shape,
            "concat_rows: column mismatch ", t.value(p.id).cols(), " vs ", cols);
    rows += t.value(p.id).rows();
  }
  Mat<S> y(rows, cols);
  Eigen::Index at = 0;
  std::vector<NodeId> ids;
  std::vector<Eigen::Index> sizes;
  ids.reserve(parts.size());
  sizes.reserve(parts.size());
  for (const auto& p : parts) {
    const auto& pv = t.value(p.id);
    y.middleRows(at, pv.rows()) = pv;
    at += pv.rows();
    ids.push_back(p.id);
    sizes.push_back(pv.rows());
  }
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [ids, sizes, out](Tape<S>& tp) {
    Eigen::Index at2 = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tp.grad(ids[i]) += tp.grad(out).middleRows(at2, sizes[i]);
      at2 += sizes[i];
    }
  });
  return Var<S>{&t, out};
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  require(!parts.empty(), ErrorKind::Usage, "concat_cols: no inputs");
  Tape<S>& t = *parts[0].tape;
  Eigen::Index cols = 0;
  const Eigen::Index rows = t.value(parts[0].id).rows();
  for (const auto& p : parts) {
    require(p.tape == &t, ErrorKind::Usage, "concat_cols: mixed tapes");
    require(t.value(p.id).rows() == rows, ErrorKind::Shape,
            "concat_cols: row mismatch ", t.value(p.id).rows(), " vs ", rows);
    cols += t.value(p.id).cols();
  }
  Mat<S> y(rows, cols);
  Eigen::Index at = 0;
  std::vector<NodeId> ids;
  std::vector<Eigen::Index> sizes;
  for (const auto& p : parts) {
    const auto& pv = t.value(p.id);
    y.middleCols(at, pv.cols()) = pv;
    at += pv.cols();
    ids.push_back(p.id);
    sizes.push_back(pv.cols());
  }
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [ids, sizes, out](Tape<S>& tp) {
    Eigen::Index at2 = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tp.grad(ids[i]) += tp.grad(out).middleCols(at2, sizes[i]);
      at2 += sizes[i];
    }
  });
  return Var<S>{&t, out};
}

// Splits x into `parts` equal column blocks (multi-head projection split).
template <class S>
std::vector<Var<S>> split_cols(Var<S> x, int parts) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  require(parts > 0 && xv.cols() % parts == 0, ErrorKind::Shape, "split_cols: ",
          xv.cols(), " columns not divisible into ", parts, " parts");
  const Eigen::Index w = xv.cols() / parts;
  std::vector<Var<S>> outs;
  outs.reserve(static_cast<std::size_t>(parts));
  for (int i = 0; i < parts; ++i) {
    NodeId out = t.push(Mat<S>(xv.middleCols(i * w, w)));
    t.set_pull(out, [x = x.id, out, off = i * w, w](Tape<S>& tp) {
      tp.grad(x).middleCols(off, w) += tp.grad(out);
    });
    outs.push_back(Var<S>{&t, out});
  }
  return outs;
}

// y.row(i) = x.row(indices[i]); duplicate indices accumulate gradient.
// Serves both embedding lookup and token reordering.
template <class S>
Var<S> row_gather(Var<S> x, const std::vector<int>& indices) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  require(!indices.empty(), ErrorKind::Shape, "row_gather: empty index list");
  for (int idx : indices) {
    require(idx >= 0 && idx < xv.rows(), ErrorKind::Shape, "row_gather: index ", idx,
            " out of range for ", xv.rows(), " rows");
  }
  Mat<S> y(static_cast<Eigen::Index>(indices.size()), xv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    y.row(static_cast<Eigen::Index>(i)) = xv.row(indices[i]);
  }
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out, indices](Tape<S>& tp) {
    const auto& g = tp.grad(out);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      tp.grad(x).row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
  return Var<S>{&t, out};
}

// ---- reductions -------------------------------------------------------------

// Mean over rows -> 1 x c.
template <class S>
Var<S> mean_rows(Var<S> x) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  require(xv.rows() > 0, ErrorKind::Shape, "mean_rows: empty input");
  NodeId out = t.push(Mat<S>(xv.colwise().mean()));
  t.set_pull(out, [x = x.id, out, r = xv.rows()](Tape<S>& tp) {
    const Mat<S> share = tp.grad(out) / static_cast<S>(r);
    tp.grad(x).rowwise() += share.row(0);
  });
  return Var<S>{&t, out};
}

// Mean over rows where mask is true -> 1 x c. Padding rows contribute nothing
// to either the value or the gradient.
template <class S>
Var<S> masked_mean_rows(Var<S> x, const Mask& mask) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  require(mask.size() == xv.rows(), ErrorKind::Shape, "masked_mean_rows: mask length ",
          mask.size(), " != rows ", xv.rows());
  const Eigen::Index count = mask.count();
  require(count > 0, ErrorKind::Mask, "masked_mean_rows: mask selects no rows");
  Mat<S> y = Mat<S>::Zero(1, xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    if (mask(i)) y.row(0) += xv.row(i);
  }
  y /= static_cast<S>(count);
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out, mask, count](Tape<S>& tp) {
    const Mat<S> share = tp.grad(out) / static_cast<S>(count);
    for (Eigen::Index i = 0; i < tp.grad(x).rows(); ++i) {
      if (mask(i)) tp.grad(x).row(i) += share.row(0);
    }
  });
  return Var<S>{&t, out};
}

template <class S>
Var<S> sum_all(Var<S> x) {
  Tape<S>& t = *x.tape;
  Mat<S> y(1, 1);
  y(0, 0) = t.value(x.id).sum();
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out](Tape<S>& tp) {
    tp.grad(x).array() += tp.grad(out)(0, 0);
  });
  return Var<S>{&t, out};
}

template <class S>
Var<S> mean_all(Var<S> x) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  require(xv.size() > 0, ErrorKind::Shape, "mean_all: empty input");
  Mat<S> y(1, 1);
  y(0, 0) = xv.mean();
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out, n = xv.size()](Tape<S>& tp) {
    tp.grad(x).array() += tp.grad(out)(0, 0) / static_cast<S>(n);
  });
  return Var<S>{&t, out};
}

// 1x1 view of a single entry.
template <class S>
Var<S> pick(Var<S> x, Eigen::Index r, Eigen::Index c) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  require(r >= 0 && r < xv.rows() && c >= 0 && c < xv.cols(), ErrorKind::Shape,
          "pick: (", r, ",", c, ") out of range for ", xv.rows(), "x", xv.cols());
  Mat<S> y(1, 1);
  y(0, 0) = xv(r, c);
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out, r, c](Tape<S>& tp) {
    tp.grad(x)(r, c) += tp.grad(out)(0, 0);
  });
  return Var<S>{&t, out};
}

// ---- nonlinear --------------------------------------------------------------

// Row-wise softmax with max subtraction. -inf entries (masked positions) map
// to exactly 0. A row with no finite entry is an error: attention over an
// empty context has no meaningful distribution.
template <class S>
Var<S> softmax_rows(Var<S> x) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  Mat<S> y(xv.rows(), xv.cols());
  const S neg_inf = -std::numeric_limits<S>::infinity();
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const S mx = xv.row(i).maxCoeff();
    require(mx != neg_inf, ErrorKind::Mask, "softmax_rows: row ", i,
            " is fully masked (all -inf)");
    for (Eigen::Index j = 0; j < xv.cols(); ++j) {
      const S v = xv(i, j);
      y(i, j) = (v == neg_inf) ? S(0) : std::exp(v - mx);
    }
    y.row(i) /= y.row(i).sum();
  }
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out](Tape<S>& tp) {
    const auto& yv = tp.value(out);
    const auto& g = tp.grad(out);
    auto& gx = tp.grad(x);
    for (Eigen::Index i = 0; i < yv.rows(); ++i) {
      const S dot = (g.row(i).array() * yv.row(i).array()).sum();
      gx.row(i).array() += yv.row(i).array() * (g.row(i).array() - dot);
    }
  });
  return Var<S>{&t, out};
}

// Writes -inf into every column whose mask entry is false (pre-softmax
// attention masking over context positions).
template <class S>
Var<S> mask_cols(Var<S> x, const Mask& mask) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  require(mask.size() == xv.cols(), ErrorKind::Shape, "mask_cols: mask length ",
          mask.size(), " != cols ", xv.cols());
  require(mask.any(), ErrorKind::Mask, "mask_cols: mask excludes every position");
  Mat<S> y = xv;
  const S neg_inf = -std::numeric_limits<S>::infinity();
  for (Eigen::Index j = 0; j < xv.cols(); ++j) {
    if (!mask(j)) y.col(j).setConstant(neg_inf);
  }
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out, mask](Tape<S>& tp) {
    const auto& g = tp.grad(out);
    auto& gx = tp.grad(x);
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      if (mask(j)) gx.col(j) += g.col(j);
    }
  });
  return Var<S>{&t, out};
}

// Row-wise layer normalization with learned gain/bias (each 1 x d).
// Population variance; eps inside the square root.
template <class S>
Var<S> layer_norm(Var<S> x, Var<S> gain, Var<S> bias, S eps = S(1e-5)) {
  Tape<S>& t = *x.tape;
  require(gain.tape == &t && bias.tape == &t, ErrorKind::Usage,
          "layer_norm: operands must live on the same tape");
  const auto& xv = t.value(x.id);
  const auto& gv = t.value(gain.id);
  const auto& bv = t.value(bias.id);
  require(gv.rows() == 1 && gv.cols() == xv.cols() && bv.rows() == 1 && bv.cols() == xv.cols(),
          ErrorKind::Shape, "layer_norm: gain/bias must be 1x", xv.cols());
  const Eigen::Index d = xv.cols();
  Mat<S> y(xv.rows(), d);
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const S mu = xv.row(i).mean();
    const S var = (xv.row(i).array() - mu).square().sum() / static_cast<S>(d);
    const S inv = S(1) / std::sqrt(var + eps);
    y.row(i) = (((xv.row(i).array() - mu) * inv) * gv.row(0).array() + bv.row(0).array()).matrix();
  }
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, g = gain.id, b = bias.id, out, eps](Tape<S>& tp) {
    const auto& xv2 = tp.value(x);
    const auto& gv2 = tp.value(g);
    const auto& go = tp.grad(out);
    const Eigen::Index d2 = xv2.cols();
    for (Eigen::Index i = 0; i < xv2.rows(); ++i) {
      const S mu = xv2.row(i).mean();
      const S var = (xv2.row(i).array() - mu).square().sum() / static_cast<S>(d2);
      const S inv = S(1) / std::sqrt(var + eps);
      // xhat = normalized row before the affine map.
      Eigen::Array<S, 1, Eigen::Dynamic> xhat = (xv2.row(i).array() - mu) * inv;
      Eigen::Array<S, 1, Eigen::Dynamic> dxhat = go.row(i).array() * gv2.row(0).array();
      const S m1 = dxhat.mean();
      const S m2 = (dxhat * xhat).mean();
      tp.grad(x).row(i).array() += inv * (dxhat - m1 - xhat * m2);
      tp.grad(g).row(0).array() += go.row(i).array() * xhat;
      tp.grad(b).row(0).array() += go.row(i).array();
    }
  });
  return Var<S>{&t, out};
}

// Exact-erf GELU: 0.5 * x * (1 + erf(x / sqrt(2))).
template <class S>
Var<S> gelu(Var<S> x) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  Mat<S> y(xv.rows(), xv.cols());
  const S inv_sqrt2 = S(1) / std::numbers::sqrt2_v<S>;
  for (Eigen::Index i = 0; i < xv.size(); ++i) {
    const S v = xv.data()[i];
    y.data()[i] = S(0.5) * v * (S(1) + std::erf(v * inv_sqrt2));
  }
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out](Tape<S>& tp) {
    const auto& xv2 = tp.value(x);
    const auto& g = tp.grad(out);
    auto& gx = tp.grad(x);
    const S inv_sqrt2b = S(1) / std::numbers::sqrt2_v<S>;
    const S inv_sqrt2pi = S(1) / std::sqrt(S(2) * std::numbers::pi_v<S>);
    for (Eigen::Index i = 0; i < xv2.size(); ++i) {
      const S v = xv2.data()[i];
      const S cdf = S(0.5) * (S(1) + std::erf(v * inv_sqrt2b));
      const S pdf = std::exp(S(-0.5) * v * v) * inv_sqrt2pi;
      gx.data()[i] += g.data()[i] * (cdf + v * pdf);
    }
  });
  return Var<S>{&t, out};
}

template <class S>
Var<S> relu(Var<S> x) {
  Tape<S>& t = *x.tape;
  NodeId out = t.push(Mat<S>(t.value(x.id).array().max(S(0))));
  t.set_pull(out, [x = x.id, out](Tape<S>& tp) {
    tp.grad(x).array() +=
        tp.grad(out).array() * (tp.value(x).array() > S(0)).template cast<S>();
  });
  return Var<S>{&t, out};
}

template <class S>
Var<S> tanh_act(Var<S> x) {
  Tape<S>& t = *x.tape;
  NodeId out = t.push(Mat<S>(t.value(x.id).array().tanh()));
  t.set_pull(out, [x = x.id, out](Tape<S>& tp) {
    tp.grad(x).array() +=
        tp.grad(out).array() * (S(1) - tp.value(out).array().square());
  });
  return Var<S>{&t, out};
}

// ln(max(x, floor)). The clamp keeps log-probabilities finite; entries at or
// below the floor get zero gradient, and each engagement is counted on the
// tape for diagnostics.
template <class S>
Var<S> log_clamped(Var<S> x, S floor = S(1e-12)) {
  Tape<S>& t = *x.tape;
  const auto& xv = t.value(x.id);
  Mat<S> y(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.size(); ++i) {
    const S v = xv.data()[i];
    if (v < floor) ++t.clamp_events;
    y.data()[i] = std::log(std::max(v, floor));
  }
  NodeId out = t.push(std::move(y));
  t.set_pull(out, [x = x.id, out, floor](Tape<S>& tp) {
    const auto& xv2 = tp.value(x);
    const auto& g = tp.grad(out);
    auto& gx = tp.grad(x);
    for (Eigen::Index i = 0; i < xv2.size(); ++i) {
      const S v = xv2.data()[i];
      if (v > floor) gx.data()[i] += g.data()[i] / v;
    }
  });
  return Var<S>{&t, out};
}

// Operator sugar for readability in composite expressions.
template <class S>
Var<S> operator+(Var<S> a, Var<S> b) {
  return add(a, b);
}
template <class S>
Var<S> operator-(Var<S> a, Var<S> b) {
  return sub(a, b);
}
template <class S>
Var<S> operator*(Var<S> a, Var<S> b) {
  return matmul(a, b);
}

// ---- gradient checking ------------------------------------------------------

struct GradCheckEntry {
  std::string param;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  std::vector<GradCheckEntry> per_param;  // worst entry for each parameter
  bool pass(double tol) const { return max_rel_error < tol; }
};

// Central finite differences against the tape gradient, in 64-bit precision.
// `build` must construct the full forward pass on the given tape and return
// the scalar loss; it is re-invoked for every perturbed evaluation, with
// recording disabled, so the comparison never reuses tape machinery beyond
// plain forward arithmetic.
template <class BuildFn>
GradCheckReport grad_check(const std::vector<Parameter<double>*>& params, BuildFn&& build,
                           double step = 1e-5) {
  require(!params.empty(), ErrorKind::Usage, "grad_check: no parameters given");
  zero_grads(params);
  {
    Tape<double> tape;
    Var<double> loss = build(tape);
    const auto& lv = tape.value(loss.id);
    require(lv.rows() == 1 && lv.cols() == 1, ErrorKind::Shape,
            "grad_check: loss must be 1x1");
    tape.backward(loss);
  }
  std::vector<Mat<double>> analytic;
  analytic.reserve(params.size());
  for (const Parameter<double>* p : params) analytic.push_back(p->grad);

  auto eval = [&]() {
    Tape<double> tape;
    tape.recording = false;
    Var<double> loss = build(tape);
    const double v = tape.value(loss.id)(0, 0);
    require(std::isfinite(v), ErrorKind::Numeric, "grad_check: non-finite loss value");
    return v;
  };

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<double>* p = params[pi];
    GradCheckEntry best{p->name, 0, 0, 0.0, 0.0, -1.0};
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const double orig = p->value(r, c);
        p->value(r, c) = orig + step;
        const double lp = eval();
        p->value(r, c) = orig - step;
        const double lm = eval();
        p->value(r, c) = orig;
        const double fd = (lp - lm) / (2.0 * step);
        const double ad = analytic[pi](r, c);
        const double denom = std::max({1.0, std::abs(fd), std::abs(ad)});
        const double rel = std::abs(fd - ad) / denom;
        if (rel > best.rel_error) best = GradCheckEntry{p->name, r, c, ad, fd, rel};
      }
    }
    report.per_param.push_back(best);
    if (best.rel_error > report.max_rel_error) {
      report.max_rel_error = best.rel_error;
      report.worst = best;
    }
  }
  return report;
}

}  // namespace tpt
