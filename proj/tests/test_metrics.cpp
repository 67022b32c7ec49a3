#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sprune/metrics.hpp"
#include "test_support.hpp"

using namespace sprune;

TEST_CASE("unmasked lenet-300-100 counts 266,610 parameters") {
  auto spec = lenet300_spec();
  auto masks = MaskRegistry::all_alive(spec);
  auto rep = count_params(spec, masks);
  CHECK(rep.total == 266610);
  CHECK(rep.original == 266610);
  CHECK(rep.compression == doctest::Approx(1.0));
  CHECK(rep.remaining_pct == doctest::Approx(100.0));
}

TEST_CASE("masking half a dense layer halves its weight count") {
  auto spec = lenet300_spec();
  auto masks = MaskRegistry::all_alive(spec);
  PruneDecision d{{}, "t", 1};
  for (Index u = 0; u < 150; ++u) d.units.emplace_back(1, u);
  apply_decision(masks, d);
  auto rep = count_params(spec, masks);
  // layer 1 keeps 150 neurons: 150*784 weights + 150 biases
  CHECK(rep.per_layer[0].params == 150 * 784 + 150);
  CHECK(rep.total == rep.per_layer[0].params + (300 * 100 + 100) + (100 * 10 + 10));
}

TEST_CASE("compression ratio at 12.9% remaining is 7.75x") {
  // pure arithmetic on the report fields
  CHECK(100.0 / 12.9 == doctest::Approx(7.75).epsilon(0.001));
  std::vector<PruneRoundRecord> records(2);
  records[0].round = 0;
  records[0].remaining_pct = 100.0;
  records[0].top1_acc = 97.0;
  records[1].round = 1;
  records[1].remaining_pct = 12.9;
  records[1].top1_acc = 96.5;
  auto c = compression_at_drop(records, 97.0, 1.0);
  CHECK(c.qualified);
  CHECK(c.ratio == doctest::Approx(7.7519).epsilon(0.001));
}

TEST_CASE("dense-layer flops: 784 -> 300 costs 470,400") {
  ModelSpec spec;
  spec.id = "one";
  spec.input_chw = {1, 28, 28};
  spec.layers = {
      {LayerKind::flatten},
      {LayerKind::dense, 784, 300, 0, 1, 0, true, PruneClass::dense},
  };
  // classifier-prunability validation is irrelevant here; count directly
  auto masks = MaskRegistry::all_alive(spec);
  auto rep = count_flops(spec, masks);
  CHECK(rep.per_layer[1].flops == 470400);
  CHECK(rep.mac_flops == 470400);
}

TEST_CASE("conv flops by MAC enumeration: 4 filters of 3x3 over 8x8") {
  ModelSpec spec;
  spec.id = "conv";
  spec.input_chw = {1, 8, 8};
  spec.layers = {
      {LayerKind::conv2d, 1, 4, 3, 1, 0, true, PruneClass::conv},
  };
  auto masks = MaskRegistry::all_alive(spec);
  auto rep = count_flops(spec, masks);
  CHECK(rep.total == 2 * 4 * 36 * 9);  // 2,592
  CHECK(rep.total == oracle::enumerate_flops(spec, masks, false));

  // masking half the filters halves the layer's flops
  PruneDecision d{{{0, 0}, {0, 2}}, "t", 1};
  apply_decision(masks, d);
  CHECK(count_flops(spec, masks).total == rep.total / 2);
}

TEST_CASE("dense-model flop golden values for both networks") {
  {
    auto spec = lenet300_spec();
    auto masks = MaskRegistry::all_alive(spec);
    auto rep = count_flops(spec, masks);
    const std::int64_t macs = 2 * (784 * 300 + 300 * 100 + 100 * 10);
    const std::int64_t elementwise = 300 + 100;
    CHECK(rep.mac_flops == macs);
    CHECK(rep.elementwise == elementwise);
    CHECK(rep.total == macs + elementwise);
    CHECK(rep.total == 532800);  // 532,400 MAC flops + 400 elementwise
  }
  {
    auto spec = lenet5_spec();
    auto masks = MaskRegistry::all_alive(spec);
    auto rep = count_flops(spec, masks);
    const std::int64_t macs = 2 * (64LL * 3 * 25 * 32 * 32 + 64LL * 64 * 25 * 16 * 16 +
                                   4096LL * 1024 + 1024LL * 10);
    const std::int64_t elementwise =
        (64 * 32 * 32 + 64 * 16 * 16) + (64 * 16 * 16 + 64 * 8 * 8) + 1024;
    CHECK(rep.mac_flops == macs);
    CHECK(rep.total == macs + elementwise);
    CHECK(rep.total == oracle::enumerate_flops(spec, masks, false));
  }
}

TEST_CASE("counters agree with brute-force enumeration on 50 random masked models") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    auto toy = oracle::random_toy_model(rng);
    auto fp = count_params(toy.spec, toy.masks);
    CHECK(fp.total == oracle::enumerate_params(toy.spec, toy.masks));
    for (bool cascade : {false, true}) {
      auto fl = count_flops(toy.spec, toy.masks, cascade);
      CHECK(fl.total == oracle::enumerate_flops(toy.spec, toy.masks, cascade));
    }
  }
}

TEST_CASE("cascade reduces flops when upstream units die") {
  std::mt19937_64 rng(9);
  auto toy = oracle::random_toy_model(rng);
  const auto plain = count_flops(toy.spec, toy.masks, false).total;
  const auto cascaded = count_flops(toy.spec, toy.masks, true).total;
  CHECK(cascaded <= plain);
}

TEST_CASE("stability: identical, single-scalar, and random oracle") {
  auto a = build_lenet300(5);
  auto masks = MaskRegistry::all_alive(a.spec);
  CHECK(stability(a, a, masks).l2 == doctest::Approx(0.0));

  auto b = a;
  b.params[1].w(7, 3) += 3.0f;
  CHECK(stability(b, a, masks).l2 == doctest::Approx(3.0).epsilon(1e-6));

  std::mt19937_64 rng(11);
  auto c = a;
  double acc = 0;
  for (auto* t : c.param_tensors()) {
    for (Index i = 0; i < t->size(); ++i) {
      const float bump = static_cast<float>((rng() % 100) / 1000.0);
      (*t)[i] += bump;
    }
  }
  const auto ta = a.param_tensors(), tc = c.param_tensors();
  for (std::size_t i = 0; i < ta.size(); ++i)
    for (Index j = 0; j < ta[i]->size(); ++j) {
      const double d = static_cast<double>((*tc[i])[j]) - (*ta[i])[j];
      acc += d * d;
    }
  CHECK(stability(c, a, masks).l2 == doctest::Approx(std::sqrt(acc)).epsilon(1e-6));

  // masked entries are excluded
  auto masked = MaskRegistry::all_alive(a.spec);
  apply_decision(masked, {{{1, 7}}, "t", 1});
  auto d2 = a;
  d2.params[1].w(7, 3) += 100.0f;  // only a masked unit differs
  CHECK(stability(d2, a, masked).l2 == doctest::Approx(0.0));
}

TEST_CASE("stability rejects mismatched architectures") {
  auto a = build_lenet300(5);
  auto b = build_lenet5(5);
  auto masks = MaskRegistry::all_alive(a.spec);
  CHECK_THROWS_AS(stability(b, a, masks), IntegrityError);
}

TEST_CASE("compression_at_drop flags runs that never qualify") {
  std::vector<PruneRoundRecord> records(1);
  records[0].round = 1;  // no round-0 baseline in this record set
  records[0].remaining_pct = 50.0;
  records[0].top1_acc = 90.0;
  auto c = compression_at_drop(records, 97.0, 0.0);
  CHECK_FALSE(c.qualified);
  CHECK(c.ratio == doctest::Approx(1.0));
  CHECK_THROWS_AS(compression_at_drop({}, 97.0, 0.0), UsageError);
}

TEST_CASE("compression_at_drop is monotone in the allowed drop") {
  std::mt19937_64 rng(77);
  std::vector<PruneRoundRecord> records;
  double pct = 100.0;
  for (int r = 0; r <= 12; ++r) {
    PruneRoundRecord rec;
    rec.round = r;
    rec.remaining_pct = pct;
    rec.top1_acc = 97.0 - 0.8 * r + (rng() % 100) / 200.0;
    records.push_back(rec);
    pct *= 0.8;
  }
  double prev = 0;
  for (double drop : {0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0}) {
    const auto c = compression_at_drop(records, records[0].top1_acc, drop);
    CHECK(c.ratio >= prev);
    prev = c.ratio;
  }
}
