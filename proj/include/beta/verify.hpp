#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "beta/engine.hpp"

namespace beta {

/// Randomized oracle-equivalence checks. Every trial is a pure function of
/// its seed, so a failure can be replayed from the seed it reports.
struct TrialOutcome {
  bool ok = true;
  std::string counterexample;  // operands, seed and the first differing element
};

// Abstracted QMM (both kinds, b_a in {1,2,4,8}, dims <= max_dim) against the
// exact rational product rounded once; the integer MM must match exactly.
TrialOutcome check_qmm_trial(std::uint64_t seed, Index max_dim = 16);

// Bit-accurate DPU pass against plain summation, K <= max_k. The mode is
// drawn from the seed unless given.
TrialOutcome check_dot_trial(std::uint64_t seed, const EngineConfig& engine, Index max_k = 4096,
                             std::optional<PEMode> mode = std::nullopt);

// Pipeline against the reference model on a small random configuration
// (S <= 8, d <= 32), compared at every QMM output and at the model output.
TrialOutcome check_block_trial(std::uint64_t seed, const EngineConfig& engine, Fidelity fidelity);

struct SuiteCount {
  std::uint64_t passed = 0;
  std::uint64_t failed = 0;
};

struct VerifySummary {
  SuiteCount qmm, dot, block;
  std::string first_counterexample;

  bool ok() const { return qmm.failed + dot.failed + block.failed == 0; }
};

// `trials` QMM and dot-product trials; one block trial per 50 (at least one).
VerifySummary run_verification(std::uint64_t seed, int trials, const EngineConfig& engine);

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace beta
