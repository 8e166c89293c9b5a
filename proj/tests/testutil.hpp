#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

#include "tpt/rng.hpp"
#include "tpt/tensor.hpp"

namespace tptt {

// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tpt_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Independent central-difference gradient of a plain function of one matrix.
// Deliberately avoids the tape: test oracles must not share code with the
// machinery they check.
template <class F>
tpt::Mat<double> numeric_grad(F&& f, tpt::Mat<double> x, double step = 1e-6) {
  tpt::Mat<double> g(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double orig = x(r, c);
      x(r, c) = orig + step;
      const double fp = f(x);
      x(r, c) = orig - step;
      const double fm = f(x);
      x(r, c) = orig;
      g(r, c) = (fp - fm) / (2.0 * step);
    }
  }
  return g;
}

inline tpt::Mat<double> random_mat(tpt::Rng& rng, Eigen::Index r, Eigen::Index c,
                                   double scale = 1.0) {
  tpt::Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

// Builds sum_ij w_ij * y_ij on y's tape (w fixed). Used to give FD oracles a
// non-trivial scalar loss over a matrix output.
inline tpt::Var<double> weighted_sum(tpt::Var<double> y, const tpt::Mat<double>& w) {
  tpt::Tape<double>& t = *y.tape;
  auto prod = matmul(y, t.constant(tpt::Mat<double>(w.transpose())));
  std::vector<tpt::Var<double>> diag;
  for (Eigen::Index i = 0; i < prod.rows(); ++i) diag.push_back(pick(prod, i, i));
  return sum_all(concat_cols(diag));
}

template <class S>
double max_abs_diff(const tpt::Mat<S>& a, const tpt::Mat<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    return std::numeric_limits<double>::infinity();
  }
  return static_cast<double>((a - b).cwiseAbs().maxCoeff());
}

// Relative error with the same denominator convention as the gradient
// checker: |a-b| / max(1, |a|, |b|).
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

template <class S>
double max_rel_diff(const tpt::Mat<S>& a, const tpt::Mat<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    return std::numeric_limits<double>::infinity();
  }
  double worst = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      worst = std::max(worst, rel_err(static_cast<double>(a(r, c)), static_cast<double>(b(r, c))));
    }
  }
  return worst;
}

}  // namespace tptt
