#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "tpt/nn.hpp"

using tpt::Mat;
using tpt::Parameter;
using tpt::Tape;
using tpt::TptError;

TEST_CASE("linear closed forms") {
  tpt::Rng rng(1);
  auto l = tpt::make_linear<double>(rng, "l", 2, 2);
  l.weight.value << 1, 0, 0, 1;
  l.bias.value.setZero();
  Tape<double> t;
  Mat<double> x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  auto y = linear(l, t.constant(x));
  CHECK(tptt::max_abs_diff(y.value(), x) == 0.0);

  auto l2 = tpt::make_linear<double>(rng, "l2", 2, 1);
  l2.weight.value << 1, 1;
  l2.bias.value << 1;
  Mat<double> x2(1, 2);
  x2 << 1, 1;
  auto y2 = linear(l2, t.constant(x2));
  CHECK(y2.value()(0, 0) == 3.0);

  Mat<double> wrong(1, 3);
  CHECK_THROWS_AS((void)linear(l2, t.constant(wrong)), TptError);
}

TEST_CASE("linear gradient matches finite differences") {
  tpt::Rng rng(2);
  auto l = tpt::make_linear<double>(rng, "l", 4, 3);
  l.bias.value = tptt::random_mat(rng, 1, 3, 0.1);
  Mat<double> x0 = tptt::random_mat(rng, 2, 4);
  Parameter<double> px("x", x0);
  auto build = [&](Tape<double>& t) { return mean_all(gelu(linear(l, t.leaf(px)))); };
  auto report = tpt::grad_check({&px, &l.weight, &l.bias}, build, 1e-5);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("feed_forward zero outer layer collapses to zero output") {
  tpt::Rng rng(3);
  auto ff = tpt::make_feed_forward<double>(rng, "ff", 4, 8);
  ff.outer.weight.value.setZero();
  ff.outer.bias.value.setZero();
  Tape<double> t;
  auto y = feed_forward(ff, t.constant(tptt::random_mat(rng, 3, 4)));
  CHECK(y.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("feed_forward d=1 identity-weight zero-input case") {
  tpt::Rng rng(4);
  auto ff = tpt::make_feed_forward<double>(rng, "ff", 1, 1);
  ff.inner.weight.value << 1;
  ff.outer.weight.value << 1;
  ff.inner.bias.value.setZero();
  ff.outer.bias.value.setZero();
  Tape<double> t;
  Mat<double> zero = Mat<double>::Zero(1, 1);
  auto y = feed_forward(ff, t.constant(zero));
  CHECK(y.value()(0, 0) == 0.0);
}

TEST_CASE("feed_forward gradient check") {
  tpt::Rng rng(5);
  auto ff = tpt::make_feed_forward<double>(rng, "ff", 3, 6);
  Mat<double> x0 = tptt::random_mat(rng, 2, 3);
  Parameter<double> px("x", x0);
  auto build = [&](Tape<double>& t) { return mean_all(feed_forward(ff, t.leaf(px))); };
  auto report =
      tpt::grad_check({&px, &ff.inner.weight, &ff.inner.bias, &ff.outer.weight, &ff.outer.bias},
                      build, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("adam first step moves by ~lr against a unit gradient") {
  Parameter<double> w("w", Mat<double>::Zero(1, 1));
  tpt::AdamState<double> adam({&w}, 0.1);
  w.grad(0, 0) = 1.0;
  adam.step();
  // mhat = 1, vhat = 1 -> update = lr / (1 + eps)
  CHECK(w.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(std::abs(w.value(0, 0)) <= 0.1 + 1e-9);
}

TEST_CASE("adam leaves parameters with zero gradient unchanged") {
  Parameter<double> w("w", Mat<double>::Ones(2, 2));
  tpt::AdamState<double> adam({&w}, 0.1);
  w.grad.setZero();
  adam.step();
  CHECK(tptt::max_abs_diff(w.value, Mat<double>(Mat<double>::Ones(2, 2))) == 0.0);
}

TEST_CASE("adam update magnitude respects the early-step bound") {
  tpt::Rng rng(6);
  Parameter<double> w("w", tptt::random_mat(rng, 4, 4));
  const double lr = 0.05;
  tpt::AdamState<double> adam({&w}, lr);
  const double bound = lr / (1.0 - 0.9) + 1e-6;
  for (int s = 0; s < 20; ++s) {
    Mat<double> before = w.value;
    w.grad = tptt::random_mat(rng, 4, 4, 3.0);
    adam.step();
    w.grad.setZero();
    CHECK((w.value - before).cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("adam converges on a 2-d quadratic in 200 steps") {
  Mat<double> w0(1, 2);
  w0 << 1.5, -2.0;
  Parameter<double> w("w", w0);
  tpt::AdamState<double> adam({&w}, 0.05);
  double loss = 0.0;
  for (int s = 0; s < 200; ++s) {
    Tape<double> t;
    auto l = sum_all(square(t.leaf(w)));
    loss = l.value()(0, 0);
    t.backward(l);
    adam.step();
    tpt::zero_grads<double>({&w});
  }
  CHECK(loss < 1e-3);
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
  Parameter<double> w("block3.ff.inner.weight", Mat<double>::Zero(1, 1));
  tpt::AdamState<double> adam({&w}, 0.1);
  w.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    adam.step();
    CHECK(false);
  } catch (const TptError& e) {
    CHECK(std::string(e.what()).find("block3.ff.inner.weight") != std::string::npos);
  }
}

TEST_CASE("adam skips frozen parameters") {
  Parameter<double> w("w", Mat<double>::Ones(1, 1));
  w.trainable = false;
  tpt::AdamState<double> adam({&w}, 0.1);
  w.grad(0, 0) = 1.0;
  adam.step();
  CHECK(w.value(0, 0) == 1.0);
}

TEST_CASE("scheduler keeps lr while loss improves") {
  tpt::PlateauScheduler sched(1e-4, 5);
  CHECK(sched.observe(5.0) == 1e-4);
  CHECK(sched.observe(4.0) == 1e-4);
  CHECK(sched.observe(3.0) == 1e-4);
  CHECK(sched.halvings() == 0);
}

TEST_CASE("scheduler halves exactly at the patience boundary and again after") {
  tpt::PlateauScheduler sched(1e-4, 5);
  // Epoch 0 improves over +inf; epochs 1..4 stagnate; epoch 5 triggers.
  std::vector<double> lrs;
  for (int e = 0; e <= 10; ++e) lrs.push_back(sched.observe(1.0));
  CHECK(lrs[4] == 1e-4);
  CHECK(lrs[5] == 5e-5);
  CHECK(lrs[9] == 5e-5);
  CHECK(lrs[10] == 2.5e-5);
  CHECK(sched.halvings() == 2);
  // lr is exactly lr0 * 2^-h.
  CHECK(sched.lr() == 1e-4 * 0.5 * 0.5);
}

TEST_CASE("scheduler requires strict improvement") {
  tpt::PlateauScheduler sched(1.0, 2);
  sched.observe(3.0);  // best = 3
  sched.observe(3.0);  // equal is not an improvement
  CHECK(sched.observe(3.0) == 0.5);
}

TEST_CASE("glorot init variance matches 2/(fan_in+fan_out) within 20%") {
  tpt::Rng rng(7);
  Mat<double> w = tpt::glorot_uniform<double>(rng, 100, 100);
  const double target = 2.0 / 200.0;
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
  CHECK(var == doctest::Approx(target).epsilon(0.2));
}

TEST_CASE("initialization is deterministic under the seed") {
  tpt::Rng a(42), b(42);
  Mat<double> wa = tpt::glorot_uniform<double>(a, 8, 8);
  Mat<double> wb = tpt::glorot_uniform<double>(b, 8, 8);
  CHECK((wa.array() == wb.array()).all());
}

TEST_CASE("layer norm params initialize to ones/zeros and apply") {
  auto ln = tpt::make_layer_norm<double>("ln", 4);
  CHECK((ln.gain.value.array() == 1.0).all());
  CHECK((ln.bias.value.array() == 0.0).all());
  Tape<double> t;
  Mat<double> x(1, 4);
  x << 1, 1, 1, 1;
  auto y = layer_norm(ln, t.constant(x));
  CHECK(y.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("embedding table: gather + projection routes gradient to touched rows only") {
  tpt::Rng rng(8);
  auto emb = tpt::make_embedding<double>(rng, "embed", 6, 5);
  auto proj = tpt::make_linear<double>(rng, "proj", 5, 3);
  Tape<double> t;
  auto x = linear(proj, row_gather(t.leaf(emb.table), {2, 4, 2}));
  CHECK(x.rows() == 3);
  CHECK(x.cols() == 3);
  auto loss = mean_all(x);
  t.backward(loss);
  CHECK(emb.table.grad.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(emb.table.grad.row(2).cwiseAbs().maxCoeff() > 0.0);
  CHECK(emb.table.grad.row(4).cwiseAbs().maxCoeff() > 0.0);
}
