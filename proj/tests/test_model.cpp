#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "bsrt/errors.hpp"
#include "bsrt/model.hpp"
#include "bsrt/rng.hpp"

using namespace bsrt;
using namespace bsrt::model;

namespace {

// 3 tokens of width 2, tiny FFN, two classes — small enough that the expected
// numbers were recomputed independently with a separate linear-algebra stack
// and frozen here.
EncoderConfig tiny_cfg() { return EncoderConfig{3, 2, 2, 2}; }

ParamVector tiny_params() {
  return ParamVector{{
      0.2, -0.1, 0.4, 0.3,    // W_Q
      -0.3, 0.5, 0.1, 0.2,    // W_K
      0.6, -0.2, -0.4, 0.1,   // W_V
      0.25, -0.5, 0.75, 0.1,  // W_1
      -0.2, 0.35, 0.15, 0.4,  // W_2
      0.5, -0.25, -0.1, 0.3,  // W_out
      0.05, -0.05,            // b_out
  }};
}

std::vector<double> tiny_tokens() { return {0.5, -1.0, 2.0, 0.25, -0.75, 1.5}; }

}  // namespace

TEST_CASE("parameter layout and count") {
  EncoderConfig cfg;  // defaults 16/16/32/8
  CHECK(cfg.param_count() == 3u * 16 * 16 + 16 * 32 + 32 * 16 + 16 * 8 + 8);
  CHECK(cfg.param_count() == 1928);
  ParamLayout lay = ParamLayout::of(cfg);
  CHECK(lay.wq == 0);
  CHECK(lay.wk == 256);
  CHECK(lay.wv == 512);
  CHECK(lay.w1 == 768);
  CHECK(lay.w2 == 768 + 512);
  CHECK(lay.wout == 768 + 1024);
  CHECK(lay.bout == 768 + 1024 + 128);
  CHECK(lay.total == 1928);
  EncoderConfig degenerate{0, 1, 1, 1};
  CHECK_THROWS_AS(degenerate.validate(), Error);
}

TEST_CASE("forward pass reproduces the frozen tiny-instance logits") {
  std::vector<std::uint32_t> retained{0, 2};
  std::vector<double> logits = forward(tiny_cfg(), tiny_params(), tiny_tokens(), retained);
  REQUIRE(logits.size() == 2);
  CHECK(logits[0] == doctest::Approx(-0.18712927320230904).epsilon(1e-12));
  CHECK(logits[1] == doctest::Approx(0.21762819957650475).epsilon(1e-12));
}

TEST_CASE("loss matches the frozen tiny-instance cross-entropy") {
  Sample s{tiny_tokens(), 1};
  std::vector<std::uint32_t> retained{0, 2};
  BatchItem item{&s, &retained};
  ParamVector grad = ParamVector::zeros(tiny_params().size());
  double loss = loss_and_grad(tiny_cfg(), tiny_params(), {&item, 1}, grad);
  CHECK(loss == doctest::Approx(0.51110873799029566).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches in-test central differences on the tiny instance") {
  EncoderConfig cfg = tiny_cfg();
  ParamVector p = tiny_params();
  Sample s0{tiny_tokens(), 1};
  Sample s1{{-0.2, 0.8, 1.1, -0.4, 0.3, 0.9}, 0};
  std::vector<std::uint32_t> r0{0, 2}, r1{0, 1, 2};
  std::vector<BatchItem> batch{{&s0, &r0}, {&s1, &r1}};

  ParamVector grad = ParamVector::zeros(p.size());
  loss_and_grad(cfg, p, batch, grad);

  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ParamVector up = p, dn = p;
    up[i] += h;
    dn[i] -= h;
    ParamVector scratch = ParamVector::zeros(p.size());
    double lu = loss_and_grad(cfg, up, batch, scratch);
    double ld = loss_and_grad(cfg, dn, batch, scratch);
    double fd = (lu - ld) / (2.0 * h);
    double rel = std::abs(fd - grad[i]) / std::max({1.0, std::abs(fd), std::abs(grad[i])});
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("built-in gradcheck stays under tolerance") {
  GradcheckReport rep = gradcheck(5, 1);
  CHECK(rep.instances == 5);
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("retention schedule hits both endpoints exactly and decays monotonically") {
  RetentionSchedule sched;  // 0.80 -> 0.60 over 15
  CHECK(retention_ratio(0, sched) == 0.80);
  CHECK(retention_ratio(15, sched) == 0.60);
  double prev = 2.0;
  for (std::uint32_t r = 0; r <= 15; ++r) {
    double k = retention_ratio(r, sched);
    CHECK(k <= prev);
    CHECK(k <= 0.80);
    CHECK(k >= 0.60);
    prev = k;
  }
  CHECK(retention_ratio(5, sched) == doctest::Approx(0.80 - (5.0 / 15.0) * 0.20).epsilon(1e-15));
  CHECK_THROWS_AS(retention_ratio(16, sched), Error);
  RetentionSchedule bad{0.5, 0.8, 15};  // k_end > k_start
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("token scores are normalized row magnitudes") {
  // Rows with norms 5, 0, 1, 2.
  std::vector<double> toks{3.0, 4.0, 0.0, 0.0, 1.0, 0.0, -2.0, 0.0};
  std::vector<double> s = token_scores(toks, 4, 2);
  REQUIRE(s.size() == 4);
  CHECK(s[0] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s[2] == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(s[3] == doctest::Approx(0.25).epsilon(1e-15));

  // All-zero rows fall back to uniform scores.
  std::vector<double> z(8, 0.0);
  std::vector<double> u = token_scores(z, 4, 2);
  for (double v : u) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("token selection keeps ceil(k*N), breaks ties low, sorts ascending") {
  std::vector<double> s{0.625, 0.0, 0.125, 0.25};
  CHECK(select_tokens(s, 0.5) == std::vector<std::uint32_t>{0, 3});
  CHECK(select_tokens(s, 0.75) == std::vector<std::uint32_t>{0, 2, 3});
  CHECK(select_tokens(s, 1.0) == std::vector<std::uint32_t>{0, 1, 2, 3});
  // ceil(0.26 * 4) = 2
  CHECK(select_tokens(s, 0.26).size() == 2);
  // Minimum of one token even for tiny k.
  CHECK(select_tokens(s, 1e-9) == std::vector<std::uint32_t>{0});

  // Equal scores: lower indices win.
  std::vector<double> ties{0.25, 0.25, 0.25, 0.25};
  CHECK(select_tokens(ties, 0.5) == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("checkpoint serialization round-trips and digests only the payload") {
  EncoderConfig cfg{4, 3, 5, 2};
  ParamVector p = random_init(cfg, 0.05, 123);
  REQUIRE(p.size() == cfg.param_count());
  Bytes blob = serialize_params(cfg, p);
  CHECK(blob.size() == 4 + 16 + 8 * p.size());
  auto [cfg2, p2] = deserialize_params(blob);
  CHECK(cfg2 == cfg);
  CHECK(p2 == p);

  CHECK(param_digest(p) == crypto::digest(param_bytes(p)));

  Bytes corrupt = blob;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(deserialize_params(corrupt), Error);
  Bytes truncated(blob.begin(), blob.end() - 3);
  CHECK_THROWS_AS(deserialize_params(truncated), Error);
}

TEST_CASE("random_init is seed-deterministic and scale-bounded") {
  EncoderConfig cfg;
  ParamVector a = random_init(cfg, 0.05, 9);
  ParamVector b = random_init(cfg, 0.05, 9);
  ParamVector c = random_init(cfg, 0.05, 10);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  double norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) norm = std::max(norm, std::abs(a[i]));
  CHECK(norm > 0.0);
  CHECK(norm < 0.05 * 6.0);  // gaussian tail at scale 0.05
}

TEST_CASE("flops estimate follows the quadratic attention law") {
  EncoderConfig cfg{128, 256, 512, 8};
  FlopsBreakdown full = flops_estimate(128, cfg);
  CHECK(full.scoring == 65536);
  CHECK(full.projections == 50331648);
  CHECK(full.attention_quadratic == 16777216);
  CHECK(full.ffn == 67108864);
  CHECK(full.head == 4096);
  CHECK(full.total() ==
        full.scoring + full.projections + full.attention_quadratic + full.ffn + full.head);

  FlopsBreakdown half = flops_estimate(64, cfg);
  CHECK(half.attention_quadratic * 4 == full.attention_quadratic);
  CHECK(half.projections * 2 == full.projections);
  CHECK(half.scoring == full.scoring);  // scoring always touches all N rows

  CHECK_THROWS_AS(flops_estimate(0, cfg), Error);
  CHECK_THROWS_AS(flops_estimate(129, cfg), Error);
}

TEST_CASE("local_train improves on a separable toy dataset and is deterministic") {
  EncoderConfig cfg{4, 4, 8, 2};
  Rng rng(5);
  Dataset data;
  for (int i = 0; i < 40; ++i) {
    Sample s;
    s.label = static_cast<std::uint32_t>(i % 2);
    s.tokens.resize(16);
    for (std::size_t j = 0; j < 16; ++j)
      s.tokens[j] = 0.1 * rng.next_gaussian() + (s.label == 0 ? 1.0 : -1.0);
    data.samples.push_back(std::move(s));
  }
  RetentionSchedule sched{1.0, 1.0, 3};
  ParamVector w0 = random_init(cfg, 0.05, 7);
  TrainHyper hyper{8, 0.05, 11};

  TrainResult a = local_train(cfg, w0, data, 6, 0, sched, hyper);
  TrainResult b = local_train(cfg, w0, data, 6, 0, sched, hyper);
  CHECK(a.best == b.best);
  REQUIRE(a.trace.size() == 6);
  CHECK(a.trace.back().mean_loss < a.trace.front().mean_loss);

  EvalResult before = evaluate(cfg, w0, data, 1.0);
  EvalResult after = evaluate(cfg, a.best, data, 1.0);
  CHECK(after.accuracy > before.accuracy);
  CHECK(after.accuracy > 0.9);

  // Zero epochs: parameters pass through untouched.
  TrainResult zero = local_train(cfg, w0, data, 0, 0, sched, hyper);
  CHECK(zero.best == w0);
  CHECK(zero.trace.empty());

  // Empty dataset: flagged, parameters unchanged.
  TrainResult none = local_train(cfg, w0, Dataset{}, 3, 0, sched, hyper);
  CHECK(none.empty_dataset);
  CHECK(none.best == w0);
}

TEST_CASE("evaluate reports per-class recall with gaps for absent classes") {
  EncoderConfig cfg{3, 2, 2, 2};
  ParamVector p = tiny_params();

  // Full retention flips the frozen instance toward class 0; the expected
  // logits come from the same independent recomputation as the m=2 case.
  std::vector<std::uint32_t> all{0, 1, 2};
  std::vector<double> logits = forward(cfg, p, tiny_tokens(), all);
  CHECK(logits[0] == doctest::Approx(0.35595515595942379).epsilon(1e-12));
  CHECK(logits[1] == doctest::Approx(-0.099803664468182368).epsilon(1e-12));

  Dataset data;
  data.samples.push_back({tiny_tokens(), 0});
  EvalResult r = evaluate(cfg, p, data, 1.0);
  REQUIRE(r.per_class_recall.size() == 2);
  REQUIRE(r.per_class_recall[0].has_value());
  CHECK_FALSE(r.per_class_recall[1].has_value());  // no class-1 samples
  CHECK(*r.per_class_recall[0] == 1.0);
  CHECK(r.accuracy == 1.0);
  CHECK(predict(cfg, p, data.samples[0], 1.0) == 0);
}

TEST_CASE("param vector arithmetic") {
  ParamVector a{{1.0, 2.0, 3.0}};
  ParamVector b{{0.5, -1.0, 2.0}};
  ParamVector d = sub(a, b);
  CHECK(d.v == std::vector<double>{0.5, 3.0, 1.0});
  a.axpy(2.0, b);
  CHECK(a.v == std::vector<double>{2.0, 0.0, 7.0});
  a.scale(0.5);
  CHECK(a.v == std::vector<double>{1.0, 0.0, 3.5});
  CHECK(ParamVector{{3.0, 4.0}}.l2_norm() == doctest::Approx(5.0).epsilon(1e-15));
}
