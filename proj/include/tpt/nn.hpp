#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tpt/config.hpp"
#include "tpt/errors.hpp"
#include "tpt/rng.hpp"
#include "tpt/tensor.hpp"

namespace tpt {

// ---- initialization ---------------------------------------------------------

// Fan-based uniform init: variance 2/(fan_in + fan_out). Draws in row-major
// order from the shared Rng so parameter creation order fixes the bits.
template <class S>
Mat<S> glorot_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<S>(rng.uniform(-a, a));
  }
  return m;
}

// ---- layers -----------------------------------------------------------------

template <class S>
struct LinearLayer {
  Parameter<S> weight;  // in x out
  Parameter<S> bias;    // 1 x out
};

template <class S>
LinearLayer<S> make_linear(Rng& rng, const std::string& name, Eigen::Index in,
                           Eigen::Index out) {
  return LinearLayer<S>{Parameter<S>(name + ".weight", glorot_uniform<S>(rng, in, out)),
                        Parameter<S>(name + ".bias", Mat<S>::Zero(1, out))};
}

// x[Lxin] . W[inxout] + b, bias broadcast over rows.
template <class S>
Var<S> linear(LinearLayer<S>& l, Var<S> x) {
  require(x.cols() == l.weight.value.rows(), ErrorKind::Shape, "linear '", l.weight.name,
          "': input width ", x.cols(), " != weight rows ", l.weight.value.rows());
  Tape<S>& t = *x.tape;
  return add_row(matmul(x, t.leaf(l.weight)), t.leaf(l.bias));
}

template <class S>
Var<S> activate(Activation a, Var<S> x) {
  switch (a) {
    case Activation::Gelu: return gelu(x);
    case Activation::Relu: return relu(x);
    case Activation::Tanh: return tanh_act(x);
    case Activation::Identity: return x;
  }
  return x;
}

// Two linear maps separated by a GELU.
template <class S>
struct FeedForward {
  LinearLayer<S> inner;  // d -> d_ff
  LinearLayer<S> outer;  // d_ff -> d
};

template <class S>
FeedForward<S> make_feed_forward(Rng& rng, const std::string& name, Eigen::Index d,
                                 Eigen::Index d_ff) {
  return FeedForward<S>{make_linear<S>(rng, name + ".inner", d, d_ff),
                        make_linear<S>(rng, name + ".outer", d_ff, d)};
}

template <class S>
Var<S> feed_forward(FeedForward<S>& ff, Var<S> x) {
  return linear(ff.outer, gelu(linear(ff.inner, x)));
}

// Learned gain/bias pair for one layer-norm site.
template <class S>
struct LayerNormParams {
  Parameter<S> gain;  // 1 x d, ones-initialized
  Parameter<S> bias;  // 1 x d, zeros
};

template <class S>
LayerNormParams<S> make_layer_norm(const std::string& name, Eigen::Index d) {
  return LayerNormParams<S>{Parameter<S>(name + ".gain", Mat<S>::Ones(1, d)),
                            Parameter<S>(name + ".bias", Mat<S>::Zero(1, d))};
}

template <class S>
Var<S> layer_norm(LayerNormParams<S>& ln, Var<S> x, S eps = S(1e-5)) {
  Tape<S>& t = *x.tape;
  return layer_norm(x, t.leaf(ln.gain), t.leaf(ln.bias), eps);
}

// Token embedding storage. When a vector file is loaded the rows it covers
// are replaced; the table may then be frozen via `trainable`.
template <class S>
struct EmbeddingTable {
  Parameter<S> table;  // vocab x dim
  bool trainable = true;
  std::string source_file;
};

template <class S>
EmbeddingTable<S> make_embedding(Rng& rng, const std::string& name, Eigen::Index vocab,
                                 Eigen::Index dim) {
  return EmbeddingTable<S>{Parameter<S>(name, glorot_uniform<S>(rng, vocab, dim)), true, ""};
}

// ---- parameter registry helpers ---------------------------------------------
// Appending in a fixed member order keeps every registry (optimizer moments,
// checkpoint tensor order) deterministic across runs.

template <class S>
void append_parameters(LinearLayer<S>& l, std::vector<Parameter<S>*>& out) {
  out.push_back(&l.weight);
  out.push_back(&l.bias);
}

template <class S>
void append_parameters(LayerNormParams<S>& ln, std::vector<Parameter<S>*>& out) {
  out.push_back(&ln.gain);
  out.push_back(&ln.bias);
}

template <class S>
void append_parameters(FeedForward<S>& ff, std::vector<Parameter<S>*>& out) {
  append_parameters(ff.inner, out);
  append_parameters(ff.outer, out);
}

template <class S>
void append_parameters(EmbeddingTable<S>& e, std::vector<Parameter<S>*>& out) {
  out.push_back(&e.table);
}

// ---- optimizer --------------------------------------------------------------

// Bias-corrected Adam over a fixed parameter registry. Moment buffers are
// held per parameter in registry order, so updates are deterministic.
template <class S>
class AdamState {
 public:
  AdamState(std::vector<Parameter<S>*> params, double lr, double beta1 = 0.9,
            double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter<S>* p : params_) {
      m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  int step_count() const { return step_; }

  // One update from the gradients currently held by the parameters.
  // The caller zeroes gradients afterwards (accumulation is its business).
  void step() {
    ++step_;
    const S b1 = static_cast<S>(beta1_);
    const S b2 = static_cast<S>(beta2_);
    const S corr1 = static_cast<S>(1.0 - std::pow(beta1_, step_));
    const S corr2 = static_cast<S>(1.0 - std::pow(beta2_, step_));
    const S lr = static_cast<S>(lr_);
    const S eps = static_cast<S>(eps_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter<S>* p = params_[i];
      if (!p->trainable) continue;
      require(all_finite(p->grad), ErrorKind::Numeric, "adam_step: non-finite gradient in '",
              p->name, "'");
      m_[i] = b1 * m_[i] + (S(1) - b1) * p->grad;
      v_[i] = b2 * v_[i] + (S(1) - b2) * Mat<S>(p->grad.array().square().matrix());
      const auto mhat = m_[i].array() / corr1;
      const auto vhat = v_[i].array() / corr2;
      p->value.array() -= lr * mhat / (vhat.sqrt() + eps);
    }
  }

 private:
  std::vector<Parameter<S>*> params_;
  std::vector<Mat<S>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int step_ = 0;
};

// ---- scheduler --------------------------------------------------------------

// Halves the learning rate after `patience` consecutive epochs without a
// strict improvement of the observed loss. Epochs are whatever the caller
// feeds it, once per epoch, in order.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(double lr0, int patience = 5, double factor = 0.5)
      : lr_(lr0), patience_(patience), factor_(factor) {
    require(lr0 > 0, ErrorKind::Config, "scheduler: lr0 must be positive");
    require(patience >= 1, ErrorKind::Config, "scheduler: patience must be >= 1");
    require(factor > 0 && factor < 1, ErrorKind::Config, "scheduler: factor must be in (0,1)");
  }

  // Feeds one epoch's loss; returns the learning rate in effect afterwards.
  double observe(double epoch_loss) {
    require(std::isfinite(epoch_loss), ErrorKind::Numeric,
            "scheduler: non-finite epoch loss");
    if (epoch_loss < best_) {
      best_ = epoch_loss;
      since_improvement_ = 0;
    } else {
      ++since_improvement_;
      if (since_improvement_ >= patience_) {
        lr_ *= factor_;
        ++halvings_;
        since_improvement_ = 0;
      }
    }
    return lr_;
  }

  double lr() const { return lr_; }
  int halvings() const { return halvings_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_improvement_ = 0;
  int halvings_ = 0;
};

}  // namespace tpt
