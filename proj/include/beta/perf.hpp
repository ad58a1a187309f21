#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "beta/pipeline.hpp"

namespace beta {

/// Effective ops are 2 * M * K * N per QMM (multiply and add counted apart).
struct ThroughputReport {
  double gops = 0.0;
  double peak_gops = 0.0;  // W1A1 lane rule
  double utilization = 0.0;
  std::int64_t cycles = 0;
  std::uint64_t effective_ops = 0;
  double seconds = 0.0;
};

// Throws std::invalid_argument on an empty trace.
ThroughputReport throughput_report(const BlockTrace& trace, const EngineConfig& config);
double peak_gops(const EngineConfig& config);

/// Dimensionless energy units per operation class.
struct EnergyProxyModel {
  std::array<double, 4> iop_by_width{1.0, 2.0, 4.0, 8.0};  // 1, 2, 4, 8-bit Iop
  double fixed16_op = 40.0;
  double nonlinear_op = 40.0;

  void validate() const;
};

struct EnergyProxy {
  double abstracted_units = 0.0;
  double naive_units = 0.0;
  double ratio = 0.0;  // naive / abstracted
};

// Units charged for one counter under `model`.
double energy_units(const OpCounter& counter, const EnergyProxyModel& model);
EnergyProxy energy_proxy(const OpCounter& abstracted, const OpCounter& naive, const EnergyProxyModel& model);

// Unabstracted count of an (M x K) * (K x N) QMM: one FIX-16 Op per multiply.
OpCounter naive_counter(Index m, Index k, Index n);
// Naive counts for every QMM of a trace, nonlinear work carried over.
OpCounter naive_counter(const BlockTrace& trace);

struct SweepPoint {
  int act_bits = 1;
  ThroughputReport throughput;
  EnergyProxy energy;
  std::uint64_t aw_ops = 0;  // activation x weight share of effective ops
  std::uint64_t output_checksum = 0;
};

/// Runs `blocks` blocks of `spec` with every site at each width in `bits`.
/// Points run concurrently; the result follows the order of `bits`.
std::vector<SweepPoint> precision_sweep(const LayerSpec& spec, int blocks, const std::vector<int>& bits,
                                        const PipelineConfig& config, std::uint64_t seed,
                                        const EnergyProxyModel& energy = {});

// Order-sensitive FNV-1a over the raw bytes of a tensor's doubles.
std::uint64_t checksum(const RealTensor& x);

}  // namespace beta
