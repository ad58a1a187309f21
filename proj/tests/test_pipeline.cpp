#include <doctest.h>

#include <map>

#include "beta/errors.hpp"
#include "beta/oracle.hpp"
#include "beta/pipeline.hpp"

using namespace beta;

namespace {

using Taps = std::vector<std::pair<std::string, FixedMatrix>>;

QmmTap recorder(Taps& taps) {
  return [&taps](std::string_view site, const FixedMatrix& m) { taps.emplace_back(std::string(site), m); };
}

LayerSpec small_spec(Index s, Index d, Index h, Index f, int bits) {
  LayerSpec spec;
  spec.seq_len = s;
  spec.hidden = d;
  spec.heads = h;
  spec.ffn_dim = f;
  spec.bits = SiteBits::uniform(bits);
  return spec;
}

RealTensor input(const LayerSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return random_normal(spec.seq_len, spec.hidden, 1.0, rng);
}

}  // namespace

TEST_CASE("single-token attention passes V through") {
  const LayerSpec spec = small_spec(1, 4, 1, 3, 4);
  const Model model = random_model(spec, 1, 17);
  Taps taps;
  PipelineConfig cfg;
  cfg.tap = recorder(taps);
  run_mha(input(spec, 1), model.weights[0], spec, cfg);

  std::map<std::string, FixedMatrix> by_site(taps.begin(), taps.end());
  // Softmax of a 1x1 score is 1; its quantization is the constant rule
  // (payload 0, offset 1.0), so the context equals the quantized V row.
  const RealTensor v = by_site.at("v_proj").to_real();
  const AffineOperand vq = quantize(v.transpose(), spec.bits.sv, QuantScheme::minmax_affine);
  CHECK(by_site.at("sv.0").to_real() == dequantize(vq).transpose());
}

TEST_CASE("zero input with sign-binary activations") {
  const LayerSpec spec = small_spec(3, 8, 2, 5, 1);
  const Model model = random_model(spec, 1, 5);
  PipelineConfig cfg;
  cfg.scheme = QuantScheme::sign_binary;
  Taps taps;
  cfg.tap = recorder(taps);
  const auto [y, trace] = run_mha(RealTensor::Zero(3, 8), model.weights[0], spec, cfg);
  for (const auto& [site, m] : taps) CHECK_MESSAGE(m.raw.isZero(), site);
  for (Index i = 0; i < 3; ++i) CHECK(y.row(i) == model.weights[0].ln1_bias);
}

TEST_CASE("W1A8 block matches the reference bit-exactly") {
  const LayerSpec spec = small_spec(8, 16, 2, 32, 8);
  const Model model = random_model(spec, 1, 2024);
  const RealTensor x = input(spec, 3);
  Taps got, want;
  PipelineConfig cfg;
  cfg.tap = recorder(got);
  const ModelResult r = run_model(model, x, cfg);
  const RealTensor ref = oracle::reference_model(model, x, cfg.scheme, kDefaultFracBits, recorder(want));
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].first == want[i].first);
    CHECK(got[i].second == want[i].second);
  }
  CHECK(r.output == ref);
}

TEST_CASE("mixed-precision blocks match the reference under both fidelities") {
  Rng rng(77);
  const int widths[] = {1, 2, 4, 8};
  for (int t = 0; t < 6; ++t) {
    LayerSpec spec = small_spec(2 + t, 8 + 4 * t, t % 2 ? 2 : 4, 6 + t, 1);
    spec.bits = {widths[rng() % 4], widths[rng() % 4], widths[rng() % 4],
                 widths[rng() % 4], widths[rng() % 4], widths[rng() % 4]};
    const Model model = random_model(spec, 2, rng());
    const RealTensor x = input(spec, rng());
    PipelineConfig cfg;
    cfg.scheme = t % 3 == 0 ? QuantScheme::sign_binary : QuantScheme::minmax_affine;
    const ModelResult fast = run_model(model, x, cfg);
    cfg.fidelity = Fidelity::bit_accurate;
    const ModelResult exact = run_model(model, x, cfg);
    CHECK(fast.output == exact.output);
    CHECK(fast.trace.total_cycles == exact.trace.total_cycles);
    CHECK(fast.output == oracle::reference_model(model, x, cfg.scheme));
  }
}

TEST_CASE("model composition") {
  const LayerSpec spec = small_spec(4, 8, 2, 8, 2);
  const RealTensor x = input(spec, 9);
  const PipelineConfig cfg;

  const ModelResult empty = run_model(Model{}, x, cfg);
  CHECK(empty.output == x);
  CHECK(empty.trace.total_cycles == 0);

  const Model one = random_model(spec, 1, 10);
  const ModelResult r = run_model(one, x, cfg);
  const auto [attended, t1] = run_mha(x, one.weights[0], spec, cfg);
  const auto [out, t2] = run_ffn(attended, one.weights[0], spec, cfg);
  CHECK(r.output == out);
  CHECK(r.trace.total_cycles == t1.total_cycles + t2.total_cycles);
  CHECK(r.trace.qmms.size() == t1.qmms.size() + t2.qmms.size());
  // q, k, v, 2 per head, out, ffn1, ffn2
  CHECK(r.trace.qmms.size() == 3 + 2 * 2 + 1 + 2);
}

TEST_CASE("cycle additivity") {
  const LayerSpec spec = small_spec(8, 32, 4, 64, 4);
  const Model model = random_model(spec, 2, 1);
  PipelineConfig cfg;
  for (bool overlap : {true, false}) {
    cfg.vpu.overlap = overlap;
    const ModelResult r = run_model(model, input(spec, 2), cfg);
    CHECK(r.trace.total_cycles == r.trace.component_cycles());
    std::int64_t engine = 0, vpu = 0;
    for (const auto& q : r.trace.qmms) {
      engine += q.engine.total_cycles;
      vpu += q.vpu_cycles;
    }
    if (!overlap) CHECK(r.trace.total_cycles == engine + vpu);
    if (overlap) CHECK(r.trace.total_cycles <= engine + vpu);
  }
}

TEST_CASE("raising a site's precision never decreases cycles") {
  const LayerSpec base = small_spec(16, 64, 4, 128, 1);
  const Model model = random_model(base, 1, 3);
  const RealTensor x = input(base, 4);
  const PipelineConfig cfg;
  int SiteBits::*sites[] = {&SiteBits::proj_in, &SiteBits::qk,   &SiteBits::sv,
                            &SiteBits::proj_out, &SiteBits::ffn1, &SiteBits::ffn2};
  for (auto site : sites) {
    std::int64_t previous = 0;
    for (int bits : {1, 2, 4, 8}) {
      Model m = model;
      m.specs[0].bits.*site = bits;
      const std::int64_t cycles = run_model(m, x, cfg).trace.total_cycles;
      CHECK(cycles >= previous);
      previous = cycles;
    }
  }
}

TEST_CASE("spec validation") {
  auto field_of = [](const LayerSpec& s) {
    try {
      s.validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  LayerSpec s = small_spec(2, 6, 4, 3, 1);
  CHECK(field_of(s) == "model.heads");
  s = small_spec(2, 8, 2, 3, 1);
  s.bits.qk = 3;
  CHECK(field_of(s) == "model.bits.qk");
  s = small_spec(2, 1, 1, 3, 1);
  CHECK(field_of(s) == "model.hidden");
  s = small_spec(2, 8, 2, 3, 1);
  s.weight_bits = 2;
  CHECK(field_of(s) == "model.weight_bits");

  const LayerSpec ok = small_spec(2, 8, 2, 3, 1);
  const Model model = random_model(ok, 1, 1);
  CHECK_THROWS_AS(run_mha(RealTensor::Zero(3, 8), model.weights[0], ok, PipelineConfig{}), DimensionError);
}

TEST_CASE("the trace records the seed-independent event sequence") {
  const LayerSpec spec = small_spec(2, 4, 1, 2, 1);
  const Model model = random_model(spec, 1, 1);
  const ModelResult r = run_model(model, input(spec, 1), PipelineConfig{});
  const std::vector<std::string> want = {"quantize:proj_in", "quantize:qk", "quantize:qk", "softmax", "quantize:sv",
                                         "quantize:sv", "quantize:proj_out", "layernorm", "quantize:ffn1", "gelu",
                                         "quantize:ffn2", "layernorm"};
  CHECK(r.trace.events == want);
}
