#include "beta/perf.hpp"

#include <bit>
#include <cstring>
#include <future>
#include <stdexcept>

#include "beta/errors.hpp"

namespace beta {

double peak_gops(const EngineConfig& config) {
  return peak_ops_per_cycle(PEMode{QmmKind::activation_weight, 1}, config) * config.freq_hz / 1e9;
}

ThroughputReport throughput_report(const BlockTrace& trace, const EngineConfig& config) {
  if (trace.qmms.empty() || trace.total_cycles <= 0) throw std::invalid_argument("throughput_report: empty trace");
  ThroughputReport r;
  r.cycles = trace.total_cycles;
  r.effective_ops = trace.effective_ops;
  r.seconds = static_cast<double>(trace.total_cycles) / config.freq_hz;
  r.gops = static_cast<double>(trace.effective_ops) / r.seconds / 1e9;
  r.peak_gops = peak_gops(config);
  r.utilization = r.gops / r.peak_gops;
  return r;
}

void EnergyProxyModel::validate() const {
  for (double c : iop_by_width) {
    if (!(c > 0)) throw ConfigError("energy.iop_by_width", "costs must be positive");
  }
  if (!(fixed16_op > 0)) throw ConfigError("energy.fixed16_op", "must be positive");
  if (!(nonlinear_op > 0)) throw ConfigError("energy.nonlinear_op", "must be positive");
}

double energy_units(const OpCounter& counter, const EnergyProxyModel& model) {
  double units = 0.0;
  for (std::size_t w = 0; w < counter.iop_by_width.size(); ++w) {
    units += static_cast<double>(counter.iop_by_width[w]) * model.iop_by_width[w];
  }
  units += static_cast<double>(counter.op) * model.fixed16_op;
  units += static_cast<double>(counter.nonlinear) * model.nonlinear_op;
  return units;
}

EnergyProxy energy_proxy(const OpCounter& abstracted, const OpCounter& naive, const EnergyProxyModel& model) {
  model.validate();
  EnergyProxy e;
  e.abstracted_units = energy_units(abstracted, model);
  e.naive_units = energy_units(naive, model);
  e.ratio = e.abstracted_units > 0 ? e.naive_units / e.abstracted_units : 0.0;
  return e;
}

OpCounter naive_counter(Index m, Index k, Index n) {
  OpCounter c;
  c.add_scale(static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(n));
  return c;
}

OpCounter naive_counter(const BlockTrace& trace) {
  OpCounter c;
  for (const auto& q : trace.qmms) c += naive_counter(q.m, q.k, q.n);
  c.add_nonlinear(trace.ops.nonlinear);
  return c;
}

std::uint64_t checksum(const RealTensor& x) {
  std::uint64_t h = 1469598103934665603ull;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint64_t>(x(i, j));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

namespace {

SweepPoint sweep_point(LayerSpec spec, int blocks, int bits, const PipelineConfig& config, std::uint64_t seed,
                       const EnergyProxyModel& energy) {
  spec.bits = SiteBits::uniform(bits);
  spec.validate();
  const Model model = random_model(spec, blocks, seed, config.vpu.frac_bits);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  const RealTensor x = random_normal(spec.seq_len, spec.hidden, 1.0, rng);
  PipelineConfig local = config;
  local.tap = nullptr;
  const ModelResult result = run_model(model, x, local);

  SweepPoint p;
  p.act_bits = bits;
  p.throughput = throughput_report(result.trace, config.engine);
  p.energy = energy_proxy(result.trace.ops, naive_counter(result.trace), energy);
  for (const auto& q : result.trace.qmms) {
    if (q.mode.kind == QmmKind::activation_weight) p.aw_ops += q.engine.effective_ops;
  }
  p.output_checksum = checksum(result.output);
  return p;
}

}  // namespace

std::vector<SweepPoint> precision_sweep(const LayerSpec& spec, int blocks, const std::vector<int>& bits,
                                        const PipelineConfig& config, std::uint64_t seed,
                                        const EnergyProxyModel& energy) {
  for (int b : bits) {
    if (!is_supported_bit_width(b)) throw ConfigError("sweep.bits", "unsupported width " + std::to_string(b));
  }
  if (blocks < 1) throw ConfigError("model.blocks", "a sweep needs at least one block");
  config.engine.validate();
  energy.validate();
  std::vector<std::future<SweepPoint>> jobs;
  jobs.reserve(bits.size());
  for (int b : bits) {
    jobs.push_back(std::async(std::launch::async, sweep_point, spec, blocks, b, std::cref(config), seed,
                              std::cref(energy)));
  }
  std::vector<SweepPoint> points;
  points.reserve(bits.size());
  for (auto& j : jobs) points.push_back(j.get());
  return points;
}

}  // namespace beta
