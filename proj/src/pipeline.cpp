#include "beta/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "beta/errors.hpp"

namespace beta {

void LayerSpec::validate() const {
  if (seq_len < 1) throw ConfigError("model.seq_len", "must be >= 1");
  if (hidden < 2) throw ConfigError("model.hidden", "must be >= 2 (layernorm rows)");
  if (heads < 1) throw ConfigError("model.heads", "must be >= 1");
  if (hidden % heads != 0) throw ConfigError("model.heads", "must divide model.hidden");
  if (ffn_dim < 1) throw ConfigError("model.ffn_dim", "must be >= 1");
  if (weight_bits != 1) throw ConfigError("model.weight_bits", "binary Transformers use 1-bit weights");
  const std::pair<const char*, int> sites[] = {{"model.bits.proj_in", bits.proj_in}, {"model.bits.qk", bits.qk},
                                               {"model.bits.sv", bits.sv},           {"model.bits.proj_out", bits.proj_out},
                                               {"model.bits.ffn1", bits.ffn1},       {"model.bits.ffn2", bits.ffn2}};
  for (const auto& [name, b] : sites) {
    if (!is_supported_bit_width(b)) throw ConfigError(name, "must be one of 1, 2, 4, 8");
  }
}

BlockWeights random_block_weights(const LayerSpec& spec, Rng& rng, int frac_bits) {
  auto binary = [&](Index rows, Index cols) {
    const RealTensor w = random_normal(rows, cols, 1.0 / std::sqrt(static_cast<double>(rows)), rng);
    return quantize(w, 1, QuantScheme::sign_binary, Role::weight, frac_bits);
  };
  auto around = [&](double centre) {
    return Eigen::RowVectorXd(random_normal(1, spec.hidden, 0.1, rng).array() + centre);
  };
  BlockWeights w;
  w.wq = binary(spec.hidden, spec.hidden);
  w.wk = binary(spec.hidden, spec.hidden);
  w.wv = binary(spec.hidden, spec.hidden);
  w.wo = binary(spec.hidden, spec.hidden);
  w.w1 = binary(spec.hidden, spec.ffn_dim);
  w.w2 = binary(spec.ffn_dim, spec.hidden);
  w.ln1_gain = around(1.0);
  w.ln1_bias = around(0.0);
  w.ln2_gain = around(1.0);
  w.ln2_bias = around(0.0);
  return w;
}

Model random_model(const LayerSpec& spec, int blocks, std::uint64_t seed, int frac_bits) {
  Rng rng(seed);
  Model model;
  for (int b = 0; b < blocks; ++b) {
    model.specs.push_back(spec);
    model.weights.push_back(random_block_weights(spec, rng, frac_bits));
  }
  return model;
}

QuantScheme site_scheme(QuantScheme configured, int bits) {
  return bits == 1 ? configured : QuantScheme::minmax_affine;
}

Fixed16 attention_scale(Index head_dim, int frac_bits) {
  return Fixed16::from_double(1.0 / std::sqrt(static_cast<double>(head_dim)), frac_bits);
}

void BlockTrace::add(QmmRecord record) {
  total_cycles += record.total_cycles();
  effective_ops += record.engine.effective_ops;
  qmms.push_back(std::move(record));
}

void BlockTrace::append(const BlockTrace& other) {
  qmms.insert(qmms.end(), other.qmms.begin(), other.qmms.end());
  events.insert(events.end(), other.events.begin(), other.events.end());
  total_cycles += other.total_cycles;
  effective_ops += other.effective_ops;
  ops += other.ops;
  saturations += other.saturations;
}

std::int64_t BlockTrace::component_cycles() const {
  std::int64_t sum = 0;
  for (const auto& q : qmms) sum += q.engine.load_cycles + q.engine.compute_cycles + q.engine.drain_cycles + q.vpu_exposed_cycles;
  return sum;
}

namespace {

// Shared state of one block execution.
class BlockRunner {
 public:
  BlockRunner(const LayerSpec& spec, const PipelineConfig& config) : spec_(spec), config_(config), engine_(config.engine) {
    spec.validate();
    config.vpu.validate();
  }

  AffineOperand quantize_site(const RealTensor& x, int bits, const char* site, bool force_minmax = false) {
    trace_.events.push_back(std::string("quantize:") + site);
    const QuantScheme scheme = force_minmax ? QuantScheme::minmax_affine : site_scheme(config_.scheme, bits);
    return quantize(x, bits, scheme, Role::activation, config_.vpu.frac_bits, &sat_);
  }

  FixedMatrix qmm(const std::string& site, QmmKind kind, const AffineOperand& lhs, const AffineOperand& rhs,
                  std::optional<Fixed16> extra = std::nullopt) {
    const QmmPlan plan = make_plan(kind, lhs, rhs, &trace_.ops, extra);
    const EngineResult er = engine_.run(plan, lhs, rhs, config_.fidelity);
    trace_.ops.add_iop(er.report.effective_ops, std::max(plan.lhs_bits, plan.rhs_bits));
    VpuResult vpu = vpu_apply(er.product, plan, er.lhs_row_sums, er.rhs_sums, config_.vpu, &trace_.ops, &sat_);

    QmmRecord record;
    record.site = site;
    record.mode = er.mode;
    record.m = plan.m;
    record.k = plan.k;
    record.n = plan.n;
    record.engine = er.report;
    record.vpu_cycles = vpu.cycles;
    record.vpu_stages = vpu.stages;
    const std::int64_t busy = er.report.compute_cycles + er.report.drain_cycles;
    record.vpu_exposed_cycles = config_.vpu.overlap ? std::max<std::int64_t>(0, vpu.cycles - busy) : vpu.cycles;
    trace_.add(std::move(record));
    if (config_.tap) config_.tap(site, vpu.output);
    return std::move(vpu.output);
  }

  void event(const char* name, std::uint64_t elements) {
    trace_.events.emplace_back(name);
    trace_.ops.add_nonlinear(elements);
  }

  BlockTrace finish() {
    trace_.saturations = sat_.events;
    return std::move(trace_);
  }

  const LayerSpec& spec() const { return spec_; }
  int frac_bits() const { return config_.vpu.frac_bits; }

 private:
  const LayerSpec& spec_;
  const PipelineConfig& config_;
  QmmEngine engine_;
  BlockTrace trace_;
  SaturationCounter sat_;
};

void require_shape(const RealTensor& x, const LayerSpec& spec) {
  if (x.rows() != spec.seq_len || x.cols() != spec.hidden) {
    throw DimensionError("block input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         ", expected " + std::to_string(spec.seq_len) + "x" + std::to_string(spec.hidden));
  }
}

}  // namespace

std::pair<RealTensor, BlockTrace> run_mha(const RealTensor& x, const BlockWeights& weights, const LayerSpec& spec,
                                          const PipelineConfig& config) {
  require_shape(x, spec);
  BlockRunner run(spec, config);
  const auto& bits = spec.bits;
  const Index dh = spec.head_dim();

  const AffineOperand xq = run.quantize_site(x, bits.proj_in, "proj_in");
  const RealTensor q = run.qmm("q_proj", QmmKind::activation_weight, xq, weights.wq).to_real();
  const RealTensor k = run.qmm("k_proj", QmmKind::activation_weight, xq, weights.wk).to_real();
  const RealTensor v = run.qmm("v_proj", QmmKind::activation_weight, xq, weights.wv).to_real();

  const Fixed16 scale = attention_scale(dh, run.frac_bits());
  RealTensor context(spec.seq_len, spec.hidden);
  for (Index h = 0; h < spec.heads; ++h) {
    const std::string head = std::to_string(h);
    const AffineOperand qh = run.quantize_site(q.middleCols(h * dh, dh), bits.qk, "qk");
    const AffineOperand kh = run.quantize_site(k.middleCols(h * dh, dh), bits.qk, "qk");
    const RealTensor scores = run.qmm("qk." + head, QmmKind::activation_activation, qh, kh, scale).to_real();
    run.event("softmax", static_cast<std::uint64_t>(scores.size()));
    const AffineOperand probs = run.quantize_site(softmax(scores), bits.sv, "sv", true);
    const AffineOperand vh = run.quantize_site(v.middleCols(h * dh, dh).transpose(), bits.sv, "sv");
    context.middleCols(h * dh, dh) = run.qmm("sv." + head, QmmKind::activation_activation, probs, vh).to_real();
  }

  const AffineOperand cq = run.quantize_site(context, bits.proj_out, "proj_out");
  const RealTensor out = run.qmm("out_proj", QmmKind::activation_weight, cq, weights.wo).to_real();
  run.event("layernorm", static_cast<std::uint64_t>(out.size()));
  RealTensor y = layernorm(out + x, weights.ln1_gain, weights.ln1_bias);
  return {std::move(y), run.finish()};
}

std::pair<RealTensor, BlockTrace> run_ffn(const RealTensor& x, const BlockWeights& weights, const LayerSpec& spec,
                                          const PipelineConfig& config) {
  require_shape(x, spec);
  BlockRunner run(spec, config);
  const AffineOperand xq = run.quantize_site(x, spec.bits.ffn1, "ffn1");
  const RealTensor hidden = run.qmm("ffn1", QmmKind::activation_weight, xq, weights.w1).to_real();
  run.event("gelu", static_cast<std::uint64_t>(hidden.size()));
  const AffineOperand gq = run.quantize_site(gelu(hidden), spec.bits.ffn2, "ffn2");
  const RealTensor out = run.qmm("ffn2", QmmKind::activation_weight, gq, weights.w2).to_real();
  run.event("layernorm", static_cast<std::uint64_t>(out.size()));
  RealTensor y = layernorm(out + x, weights.ln2_gain, weights.ln2_bias);
  return {std::move(y), run.finish()};
}

ModelResult run_model(const Model& model, const RealTensor& x, const PipelineConfig& config) {
  if (model.specs.size() != model.weights.size()) throw DimensionError("model specs and weights differ in count");
  ModelResult result{x, {}};
  for (std::size_t b = 0; b < model.specs.size(); ++b) {
    auto [attended, mha_trace] = run_mha(result.output, model.weights[b], model.specs[b], config);
    auto [out, ffn_trace] = run_ffn(attended, model.weights[b], model.specs[b], config);
    result.trace.append(mha_trace);
    result.trace.append(ffn_trace);
    result.output = std::move(out);
  }
  return result;
}

}  // namespace beta
