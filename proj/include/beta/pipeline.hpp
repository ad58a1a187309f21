#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "beta/abstraction.hpp"
#include "beta/engine.hpp"
#include "beta/random.hpp"
#include "beta/vpu.hpp"

namespace beta {

// Activation precision at each QMM site of a block.
struct SiteBits {
  int proj_in = 1;   // input to the Q/K/V projections
  int qk = 1;        // Q and K in the score product
  int sv = 1;        // softmax scores and V
  int proj_out = 1;  // attention context into the output projection
  int ffn1 = 1;      // block input into the first FFN layer
  int ffn2 = 1;      // GELU output into the second FFN layer

  static SiteBits uniform(int bits) { return {bits, bits, bits, bits, bits, bits}; }
  friend bool operator==(const SiteBits&, const SiteBits&) = default;
};

/// Shape and precision of one binary Transformer block (MHA then FFN).
struct LayerSpec {
  Index seq_len = 1;
  Index hidden = 2;
  Index heads = 1;
  Index ffn_dim = 2;
  int weight_bits = 1;
  SiteBits bits;

  Index head_dim() const { return hidden / heads; }
  // Throws ConfigError naming the offending field.
  void validate() const;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct BlockWeights {
  AffineOperand wq, wk, wv, wo;  // hidden x hidden
  AffineOperand w1;              // hidden x ffn_dim
  AffineOperand w2;              // ffn_dim x hidden
  Eigen::RowVectorXd ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct Model {
  std::vector<LayerSpec> specs;
  std::vector<BlockWeights> weights;
};

// Gaussian weights binarized with the sign quantizer; layernorm gain near 1.
BlockWeights random_block_weights(const LayerSpec& spec, Rng& rng, int frac_bits = kDefaultFracBits);
Model random_model(const LayerSpec& spec, int blocks, std::uint64_t seed, int frac_bits = kDefaultFracBits);

// Receives every QMM output (site name, FIX-16 result) in execution order.
using QmmTap = std::function<void(std::string_view site, const FixedMatrix& output)>;

struct PipelineConfig {
  EngineConfig engine;
  VpuConfig vpu;
  QuantScheme scheme = QuantScheme::minmax_affine;
  Fidelity fidelity = Fidelity::functional;
  QmmTap tap;
};

// Quantizer used at an activation site: the configured scheme at 1-bit sites,
// min-max affine elsewhere (sign-binary is 1-bit only).
QuantScheme site_scheme(QuantScheme configured, int bits);

// FIX-16 constant 1/sqrt(d_head) folded into the score coefficients.
Fixed16 attention_scale(Index head_dim, int frac_bits);

struct QmmRecord {
  std::string site;
  PEMode mode;
  Index m = 0, k = 0, n = 0;
  CycleReport engine;
  std::int64_t vpu_cycles = 0;
  std::int64_t vpu_exposed_cycles = 0;
  int vpu_stages = 0;

  std::int64_t total_cycles() const { return engine.total_cycles + vpu_exposed_cycles; }
};

/// Cycle trace of one or more blocks. Nonlinear functions and host
/// quantization are listed as events and charged zero cycles.
struct BlockTrace {
  std::vector<QmmRecord> qmms;
  std::vector<std::string> events;
  std::int64_t total_cycles = 0;
  std::uint64_t effective_ops = 0;
  OpCounter ops;
  std::uint64_t saturations = 0;
  std::uint64_t seed = 0;

  void add(QmmRecord record);
  void append(const BlockTrace& other);
  // Sum over the recorded components; equals total_cycles.
  std::int64_t component_cycles() const;
};

std::pair<RealTensor, BlockTrace> run_mha(const RealTensor& x, const BlockWeights& weights, const LayerSpec& spec,
                                          const PipelineConfig& config);
std::pair<RealTensor, BlockTrace> run_ffn(const RealTensor& x, const BlockWeights& weights, const LayerSpec& spec,
                                          const PipelineConfig& config);

struct ModelResult {
  RealTensor output;
  BlockTrace trace;
};

// Applies every block (MHA then FFN) in order; zero blocks is the identity.
ModelResult run_model(const Model& model, const RealTensor& x, const PipelineConfig& config);

}  // namespace beta
