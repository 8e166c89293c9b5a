#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "testutil.hpp"
#include "tpt/text_encoder.hpp"

using tpt::Mask;
using tpt::Mat;
using tpt::Parameter;
using tpt::Tape;
using tpt::TptError;
using tpt::Var;
using tpt::Vocab;

namespace {

std::vector<tpt::Parameter<double>*> collect(tpt::MtlParams<double>& p) {
  return {&p.mma.w_q,        &p.mma.w_k,        &p.mma.w_v,        &p.mma.w_o,
          &p.mma.ln_q.gain,  &p.mma.ln_q.bias,  &p.mma.ln_kv.gain, &p.mma.ln_kv.bias,
          &p.ff.inner.weight, &p.ff.inner.bias,  &p.ff.outer.weight, &p.ff.outer.bias,
          &p.ln_ff.gain,     &p.ln_ff.bias};
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
  auto toks = tpt::tokenize("What color IS the ball?");
  REQUIRE(toks.size() == 5);
  CHECK(toks[0] == "what");
  CHECK(toks[1] == "color");
  CHECK(toks[2] == "is");
  CHECK(toks[3] == "the");
  CHECK(toks[4] == "ball");

  auto hyph = tpt::tokenize("re-enter,  now!");
  REQUIRE(hyph.size() == 3);
  CHECK(hyph[0] == "re");
  CHECK(hyph[1] == "enter");
  CHECK(hyph[2] == "now");

  auto digits = tpt::tokenize("count 3 objects");
  REQUIRE(digits.size() == 3);
  CHECK(digits[1] == "3");

  CHECK(tpt::tokenize("").empty());
  CHECK(tpt::tokenize("  ... !!").empty());
}

TEST_CASE("vocab reserves pad and unk, maps unknown words to unk") {
  auto v = Vocab::from_tokens({"the", "ball", "the", "red"});
  REQUIRE(v.size() == 5);  // pad, unk, the, ball, red
  CHECK(v.token(Vocab::kPadId) == "<pad>");
  CHECK(v.token(Vocab::kUnkId) == "<unk>");
  CHECK(v.id("the") == 2);
  CHECK(v.id("ball") == 3);
  CHECK(v.id("red") == 4);
  CHECK(v.id("zebra") == Vocab::kUnkId);

  auto ids = v.encode("The RED ball, the ball!");
  REQUIRE(ids.size() == 5);
  CHECK(ids[0] == 2);
  CHECK(ids[1] == 4);
  CHECK(ids[2] == 3);
  CHECK(ids[3] == 2);
  CHECK(ids[4] == 3);

  CHECK_THROWS_AS((void)v.token(-1), TptError);
  CHECK_THROWS_AS((void)v.token(v.size()), TptError);
}

TEST_CASE("vocab file round trip and malformed files") {
  tptt::TempDir dir("text");
  auto path = (dir.path() / "vocab.txt").string();

  auto v = Vocab::from_tokens({"alpha", "beta", "gamma"});
  v.save(path);
  auto back = Vocab::load(path);
  REQUIRE(back.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(back.token(i) == v.token(i));
  CHECK(back.id("beta") == v.id("beta"));

  auto bad_reserved = (dir.path() / "bad1.txt").string();
  write_text(bad_reserved, "alpha\nbeta\n");
  CHECK_THROWS_AS((void)Vocab::load(bad_reserved), TptError);

  auto dup = (dir.path() / "bad2.txt").string();
  write_text(dup, "<pad>\n<unk>\nalpha\nalpha\n");
  CHECK_THROWS_AS((void)Vocab::load(dup), TptError);

  CHECK_THROWS_AS((void)Vocab::load((dir.path() / "missing.txt").string()), TptError);
}

TEST_CASE("embedding vector file replaces only listed known tokens") {
  auto v = Vocab::from_tokens({"red", "ball"});  // pad unk red ball
  Mat<float> table = Mat<float>::Ones(4, 3);

  tptt::TempDir dir("text");
  auto path = (dir.path() / "vectors.txt").string();
  write_text(path, "red 1.5 -2 3\nzebra 9 9 9\n");

  int replaced = tpt::load_embedding_vectors(path, v, table);
  CHECK(replaced == 1);
  CHECK(table(2, 0) == doctest::Approx(1.5));
  CHECK(table(2, 1) == doctest::Approx(-2.0));
  CHECK(table(2, 2) == doctest::Approx(3.0));
  CHECK(table(0, 0) == 1.0f);  // pad untouched
  CHECK(table(3, 0) == 1.0f);  // ball untouched

  auto bad = (dir.path() / "short.txt").string();
  write_text(bad, "ball 1 2\n");
  CHECK_THROWS_AS((void)tpt::load_embedding_vectors(bad, v, table), TptError);

  Mat<float> wrong = Mat<float>::Ones(3, 3);
  CHECK_THROWS_AS((void)tpt::load_embedding_vectors(path, v, wrong), TptError);
}

TEST_CASE("embed_tokens gathers table rows through the projection") {
  Mat<double> table(4, 3);
  table << 0, 0, 0, 1, 1, 1, 2, 3, 4, 5, 6, 7;
  tpt::EmbeddingTable<double> emb{Parameter<double>("emb", table), true, ""};

  tpt::LinearLayer<double> proj{Parameter<double>("proj.weight", Mat<double>::Identity(3, 3)),
                                Parameter<double>("proj.bias", Mat<double>::Zero(1, 3))};

  Tape<double> t;
  auto out = tpt::embed_tokens(t, emb, proj, {2, 3, 2});
  REQUIRE(out.rows() == 3);
  REQUIRE(out.cols() == 3);
  CHECK(out.value().row(0) == table.row(2));
  CHECK(out.value().row(1) == table.row(3));
  CHECK(out.value().row(2) == table.row(2));

  // Gradient reaches only the gathered rows; the duplicated row accumulates.
  tpt::zero_grads<double>({&emb.table, &proj.weight, &proj.bias});
  t.backward(sum_all(out));
  CHECK(emb.table.grad.row(0).isZero());
  CHECK(emb.table.grad.row(1).isZero());
  CHECK(emb.table.grad(2, 0) == doctest::Approx(2.0));
  CHECK(emb.table.grad(3, 0) == doctest::Approx(1.0));
}

TEST_CASE("embed_tokens rejects ids outside the table and empty input") {
  tpt::Rng rng(3);
  auto emb = tpt::make_embedding<double>(rng, "emb", 4, 3);
  auto proj = tpt::make_linear<double>(rng, "proj", 3, 4);
  Tape<double> t;
  CHECK_THROWS_AS((void)tpt::embed_tokens(t, emb, proj, {0, 4}), TptError);
  CHECK_THROWS_AS((void)tpt::embed_tokens(t, emb, proj, {-1}), TptError);
  CHECK_THROWS_AS((void)tpt::embed_tokens(t, emb, proj, {}), TptError);
}

TEST_CASE("self_encode on a single token attends with weight exactly 1") {
  tpt::Rng rng(11);
  std::vector<tpt::MtlParams<double>> layers;
  layers.push_back(tpt::make_mtl<double>(rng, "enc.layer0", 4, 2, 8, false));

  Tape<double> t;
  Mat<double> x(1, 4);
  x << 0.3, -0.7, 1.1, 0.2;
  Mask mask = Mask::Constant(1, true);
  tpt::AttnTrace<double> trace;
  auto seq = tpt::self_encode(t.constant(x), mask, layers, 1e-5, &trace);
  CHECK(seq.length == 1);
  REQUIRE(trace.size() == 2);  // one matrix per head
  for (const auto& attn : trace) {
    REQUIRE(attn.rows() == 1);
    REQUIRE(attn.cols() == 1);
    CHECK(attn(0, 0) == 1.0);
  }
}

TEST_CASE("appending masked padding tokens leaves real positions unchanged") {
  tpt::Rng rng(5);
  std::vector<tpt::MtlParams<double>> layers;
  for (int r = 0; r < 2; ++r) {
    layers.push_back(
        tpt::make_mtl<double>(rng, "enc.layer" + std::to_string(r), 8, 2, 16, false));
  }

  Mat<double> real = tptt::random_mat(rng, 3, 8);
  Mat<double> padded(5, 8);
  padded.topRows(3) = real;
  padded.bottomRows(2).setConstant(42.0);  // garbage that the mask must hide

  Tape<double> t1;
  auto short_seq = tpt::self_encode(t1.constant(real), Mask::Constant(3, true), layers);

  Tape<double> t2;
  Mask mask(5);
  mask << true, true, true, false, false;
  auto long_seq = tpt::self_encode(t2.constant(padded), mask, layers);

  Mat<double> a = short_seq.tokens.value();
  Mat<double> b = long_seq.tokens.value().topRows(3);
  CHECK(tptt::max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("self_encode rejects fully masked input and mask length mismatch") {
  tpt::Rng rng(6);
  std::vector<tpt::MtlParams<double>> layers;
  layers.push_back(tpt::make_mtl<double>(rng, "enc.layer0", 4, 2, 8, false));

  Tape<double> t;
  Mat<double> x = tptt::random_mat(rng, 2, 4);
  CHECK_THROWS_AS((void)tpt::self_encode(t.constant(x), Mask::Constant(2, false), layers),
                  TptError);
  CHECK_THROWS_AS((void)tpt::self_encode(t.constant(x), Mask::Constant(3, true), layers),
                  TptError);
}

TEST_CASE("gradients through embedding, projection, and encoder layer") {
  tpt::Rng rng(17);
  auto emb = tpt::make_embedding<double>(rng, "emb", 5, 6);
  auto proj = tpt::make_linear<double>(rng, "proj", 6, 4);
  std::vector<tpt::MtlParams<double>> layers;
  layers.push_back(tpt::make_mtl<double>(rng, "enc.layer0", 4, 2, 8, false));

  std::vector<int> ids = {2, 4, 2};  // duplicate id exercises gather accumulation
  Mask mask = Mask::Constant(3, true);
  Mat<double> w = tptt::random_mat(rng, 3, 4);

  std::vector<Parameter<double>*> params = {&emb.table, &proj.weight, &proj.bias};
  for (auto* p : collect(layers[0])) params.push_back(p);

  auto report = tpt::grad_check(params, [&](Tape<double>& t) {
    auto x = tpt::embed_tokens(t, emb, proj, ids);
    auto seq = tpt::self_encode(x, mask, layers);
    return tptt::weighted_sum(seq.tokens, w);
  });
  INFO("worst: ", report.worst.param, " rel=", report.max_rel_error);
  CHECK(report.pass(1e-4));
}
