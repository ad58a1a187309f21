#include <doctest.h>

#include <numeric>

#include "beta/engine.hpp"
#include "beta/errors.hpp"
#include "beta/oracle.hpp"
#include "beta/random.hpp"
#include "helpers.hpp"

using namespace beta;

namespace {

const PEMode w1a1{QmmKind::activation_weight, 1};
const PEMode w1a4{QmmKind::activation_weight, 4};
const PEMode w1a8{QmmKind::activation_weight, 8};
const PEMode a4a4{QmmKind::activation_activation, 4};

// Depth by the Wallace sequence 2,3,4,6,9,13,19,...: d stages reduce at most
// wallace(d) addends to two, so the depth is the smallest d with wallace(d) >= n.
int wallace_depth(int n) {
  int w = 2, d = 0;
  while (w < n) {
    w += w / 2;
    ++d;
  }
  return d;
}

std::int64_t plain(std::span<const std::int64_t> v) { return std::accumulate(v.begin(), v.end(), std::int64_t{0}); }

}  // namespace

TEST_CASE("lane rule") {
  CHECK(w1a1.lanes(8) == 8);
  CHECK(w1a4.lanes(8) == 2);
  CHECK(w1a8.lanes(8) == 1);
  CHECK(a4a4.serial_cycles() == 4);
  CHECK(w1a4.serial_cycles() == 1);
}

TEST_CASE("pe_cycle") {
  const std::uint32_t lanes[] = {5, 3};
  const std::uint32_t packed = pack_lanes(lanes, 4, 8);
  CHECK(packed == 0x35u);
  const LaneProducts on = pe_cycle(w1a4, 8, packed, true);
  CHECK(on.count == 2);
  CHECK(on.value[0] == 5);
  CHECK(on.value[1] == 3);
  const LaneProducts off = pe_cycle(w1a4, 8, packed, false);
  CHECK(off.value[0] == 0);
  CHECK(off.value[1] == 0);
  const LaneProducts serial = pe_cycle(a4a4, 8, packed, true, 2);
  CHECK(serial.value[0] == 20);
  CHECK(serial.value[1] == 12);

  const std::uint32_t too_wide[] = {16};
  CHECK_THROWS_AS(pack_lanes(too_wide, 4, 8), EncodingError);
}

TEST_CASE("compressor tree") {
  SUBCASE("zeros") {
    const std::int64_t zeros[4] = {};
    const CompressorTreeState s = compressor_reduce(zeros, {}, 32);
    CHECK(s.sum_word == 0);
    CHECK(s.carry_word == 0);
  }
  SUBCASE("three ones") {
    const std::int64_t p[] = {1, 1, 1};
    const CompressorTreeState s = compressor_reduce(p, {}, 32);
    CHECK(final_add(s, 32) == 3);
    CHECK(carry_save_consistent(s, 32));
  }
  SUBCASE("accumulating 5 then 10") {
    const std::int64_t a[] = {5};
    const std::int64_t b[] = {10};
    CHECK(final_add(compressor_reduce(b, compressor_reduce(a, {}, 32), 32), 32) == 15);
  }
  SUBCASE("depth follows the Wallace sequence") {
    CHECK(wallace_depth(258) == 13);
    for (int n : {3, 4, 5, 9, 13, 14, 100, 258, 514, 1026}) CHECK(compressor_depth(n) == wallace_depth(n));
  }
  SUBCASE("random 512-element streams equal plain sums") {
    Rng rng(11);
    std::uniform_int_distribution<std::int64_t> v(-1000, 1000);
    for (int t = 0; t < 1000; ++t) {
      std::vector<std::int64_t> stream(512);
      for (auto& x : stream) x = v(rng);
      CompressorTreeState s;
      for (std::size_t off = 0; off < stream.size(); off += 256) {
        s = compressor_reduce(std::span(stream).subspan(off, 256), s, 32);
        REQUIRE(carry_save_consistent(s, 32));
      }
      REQUIRE(final_add(s, 32) == plain(stream));
    }
  }
  SUBCASE("overflow past the accumulator width") {
    const std::int64_t p[] = {100, 100};
    CHECK_THROWS_AS(compressor_reduce(p, {}, 8), OverflowError);
  }
}

TEST_CASE("dot-product cycles") {
  const EngineConfig cfg;
  Rng rng(2);
  auto run = [&](const PEMode& mode, Index k) {
    const IntMatrix row = random_payload(1, k, mode.act_bits, rng);
    const IntMatrix col = random_payload(1, k, mode.kind == QmmKind::activation_weight ? 1 : mode.act_bits, rng);
    const DotProductResult r = dpu_dot_product(mode, cfg, row.row(0), col.row(0));
    CHECK(r.values[0] == oracle::plain_dot(row.row(0), col.row(0)));
    return r;
  };
  // Lanes hold different output rows, so a K-element dot product takes ceil(K/J) cycles.
  const DotProductResult a1 = run(w1a1, 2048);
  CHECK(a1.compute_cycles == 8);
  CHECK(a1.drain_cycles == 1);
  CHECK(run(w1a8, 2048).compute_cycles == 8);
  CHECK(run(a4a4, 1024).compute_cycles == 16);
  CHECK(run(w1a1, 1).compute_cycles == 1);
  CHECK(a1.stage_count == 13);
}

TEST_CASE("packed lanes compute independent rows") {
  const EngineConfig cfg;
  Rng rng(4);
  for (const PEMode& mode : {w1a1, w1a4, w1a8, a4a4, PEMode{QmmKind::activation_activation, 2}}) {
    const int lanes = mode.lanes(cfg.pe_width);
    const IntMatrix rows = random_payload(lanes, 700, mode.act_bits, rng);
    const IntMatrix col = random_payload(1, 700, mode.kind == QmmKind::activation_weight ? 1 : mode.act_bits, rng);
    std::vector<std::span<const std::uint8_t>> spans;
    for (Index r = 0; r < lanes; ++r) spans.push_back(rows.row(r));
    const DotProductResult res = dpu_dot_product(mode, cfg, spans, col.row(0));
    REQUIRE(res.values.size() == static_cast<std::size_t>(lanes));
    for (Index r = 0; r < lanes; ++r) CHECK(res.values[r] == oracle::plain_dot(rows.row(r), col.row(0)));
    CHECK(res.compute_cycles == 3 * mode.serial_cycles());
  }
}

TEST_CASE("closed-form cycle model") {
  EngineConfig cfg;
  SUBCASE("single tile") {
    const CycleReport r = estimate_cycles(w1a1, cfg.n_dpu * 8, cfg.j_unfold, 1, cfg);
    CHECK(r.compute_cycles == 1);
    CHECK(r.drain_cycles == 1);
  }
  SUBCASE("BiT-Base FFN layer") {
    // ceil(128 / 16) passes per column, 768 columns, ceil(3072 / 256) cycles each.
    const CycleReport r = estimate_cycles(w1a1, 128, 3072, 768, cfg);
    CHECK(r.compute_cycles == 8 * 768 * 12);
    CHECK(r.compute_cycles == 73728);
    CHECK(r.drain_cycles == 8 * 768);
    CHECK(r.load_cycles == (128 * 3072 + 3072 * 768 + 255) / 256);
    CHECK(r.effective_ops == 2ull * 128 * 3072 * 768);
  }
  SUBCASE("1 : 4 : 8 across W1A1, W1A4, W1A8 at full tiles") {
    const Index m = 64, k = 512, n = 10;
    const CycleReport r1 = estimate_cycles(w1a1, m, k, n, cfg);
    const CycleReport r4 = estimate_cycles(w1a4, m, k, n, cfg);
    const CycleReport r8 = estimate_cycles(w1a8, m, k, n, cfg);
    CHECK(r4.compute_cycles == 4 * r1.compute_cycles);
    CHECK(r8.compute_cycles == 8 * r1.compute_cycles);
    CHECK(r4.drain_cycles == 4 * r1.drain_cycles);
    CHECK(r8.drain_cycles == 8 * r1.drain_cycles);
  }
  SUBCASE("load overlap") {
    cfg.overlap_load = true;
    const CycleReport r = estimate_cycles(w1a8, 64, 512, 64, cfg);
    CHECK(r.load_cycles == 0);
    CHECK(r.hidden_load_cycles == (64 * 512 + 512 * 64) / 256);
  }
  CHECK(peak_ops_per_cycle(w1a1, cfg) == 8192.0);
  CHECK(peak_ops_per_cycle(w1a8, cfg) == 1024.0);
  CHECK(peak_ops_per_cycle(a4a4, cfg) == 512.0);  // 2 lanes, 4 serial cycles
}

TEST_CASE("engine runs match the functional path and reset between modes") {
  Rng rng(8);
  QmmEngine engine(EngineConfig{});
  for (int bits : {1, 2, 4, 8}) {
    const AffineOperand a = random_operand(19, 300, bits, Role::activation, rng);
    const AffineOperand w = random_operand(300, 7, 1, Role::weight, rng);
    const QmmPlan plan = make_plan(QmmKind::activation_weight, a, w);
    const EngineResult fast = engine.run(plan, a, w, Fidelity::functional);
    const EngineResult exact = engine.run(plan, a, w, Fidelity::bit_accurate);
    CHECK(fast.product == exact.product);
    CHECK(fast.report == exact.report);
    CHECK(exact.product.cast<std::int64_t>() == oracle::plain_integer_mm(a.payload, w.payload));

    const AffineOperand q = random_operand(9, 40, bits, Role::activation, rng);
    const AffineOperand k = random_operand(11, 40, bits, Role::activation, rng);
    const QmmPlan aa = make_plan(QmmKind::activation_activation, q, k);
    const EngineResult g = engine.run(aa, q, k, Fidelity::bit_accurate);
    CHECK(g.product.cast<std::int64_t>() == oracle::plain_integer_mm(q.payload, k.payload.transposed()));
    CHECK(g.report.compute_cycles == estimate_cycles(g.mode, 9, 40, 11, engine.config()).compute_cycles);
    for (const auto& s : engine.state()) CHECK(s == CompressorTreeState{});
  }
  CHECK(engine.runs() == 12);
}

TEST_CASE("mode mismatches and capacity") {
  Rng rng(9);
  const AffineOperand a = random_operand(4, 8, 2, Role::activation, rng);
  const AffineOperand b = random_operand(4, 8, 4, Role::activation, rng);
  CHECK_THROWS_AS(mode_for(make_plan(QmmKind::activation_activation, a, b)), DimensionError);

  EngineConfig small;
  small.buffer_capacity = 10;
  QmmEngine engine(small);
  const AffineOperand w = random_operand(8, 4, 1, Role::weight, rng);
  CHECK_THROWS_AS(engine.run(make_plan(QmmKind::activation_weight, a, w), a, w), CapacityError);
}

TEST_CASE("config validation names the field") {
  EngineConfig cfg;
  cfg.j_unfold = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "engine.j_unfold");
  }
  cfg = {};
  cfg.pe_width = 12;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("a dropped lane is caught against plain summation") {
  EngineConfig cfg;
  cfg.fault = Fault::drop_last_lane;
  Rng rng(12);
  const IntMatrix rows = random_payload(8, 64, 1, rng);
  Matrix<std::int64_t> ones = Matrix<std::int64_t>::Ones(1, 64);
  const IntMatrix col = IntMatrix::from(ones, 1);
  std::vector<std::span<const std::uint8_t>> spans;
  for (Index r = 0; r < 8; ++r) spans.push_back(rows.row(r));
  const DotProductResult res = dpu_dot_product(w1a1, cfg, spans, col.row(0));
  bool differs = false;
  for (Index r = 0; r < 8; ++r) differs |= res.values[r] != oracle::plain_dot(rows.row(r), col.row(0));
  CHECK(differs);
}

TEST_CASE("invariant checking on a long stream") {
  EngineConfig cfg;
  cfg.check_invariants = true;
  Rng rng(13);
  const IntMatrix row = random_payload(1, 4096, 8, rng);
  const IntMatrix col = random_payload(1, 4096, 8, rng);
  const DotProductResult r = dpu_dot_product(PEMode{QmmKind::activation_activation, 8}, cfg, row.row(0), col.row(0));
  CHECK(r.values[0] == oracle::plain_dot(row.row(0), col.row(0)));
  CHECK(r.compute_cycles == 16 * 8);
}
