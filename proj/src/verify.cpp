#include "beta/verify.hpp"

#include <sstream>

#include "beta/abstraction.hpp"
#include "beta/oracle.hpp"
#include "beta/pipeline.hpp"
#include "beta/random.hpp"

namespace beta {

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 step
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

constexpr int kWidths[] = {1, 2, 4, 8};

Index uniform(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

void describe(std::ostream& os, const char* name, const AffineOperand& op) {
  os << name << ": scale_raw=" << op.scale.raw() << " offset_raw=";
  if (op.offset) {
    os << op.offset->raw();
  } else {
    os << "none";
  }
  os << " frac_bits=" << op.frac_bits() << "\n";
  format_matrix(os, op.payload);
}

}  // namespace

TrialOutcome check_qmm_trial(std::uint64_t seed, Index max_dim) {
  Rng rng(seed);
  const bool aa = uniform(rng, 0, 1) == 1;
  const int bits = kWidths[uniform(rng, 0, 3)];
  const Index m = uniform(rng, 1, max_dim), k = uniform(rng, 1, max_dim), n = uniform(rng, 1, max_dim);
  const AffineOperand lhs = random_operand(m, k, bits, Role::activation, rng);
  const AffineOperand rhs = aa ? random_operand(n, k, bits, Role::activation, rng)
                               : random_operand(k, n, 1, Role::weight, rng);

  OpCounter counter;
  SaturationCounter sat;
  const FixedMatrix got = aa ? qmm_activation_activation(lhs, rhs, counter, &sat)
                             : qmm_activation_weight(lhs, rhs, counter, &sat);
  const Matrix<std::int32_t> intmm = aa ? integer_gram(lhs.payload, rhs.payload) : integer_matmul(lhs.payload, rhs.payload);
  const Matrix<std::int64_t> plain = oracle::plain_integer_mm(lhs.payload, aa ? rhs.payload.transposed() : rhs.payload);
  const FixedMatrix want = oracle::to_fixed16(aa ? oracle::exact_affine_gram(lhs, rhs) : oracle::exact_affine_mm(lhs, rhs),
                                              lhs.frac_bits());

  TrialOutcome out;
  std::ostringstream os;
  for (Index i = 0; i < m && out.ok; ++i) {
    for (Index j = 0; j < n && out.ok; ++j) {
      if (intmm(i, j) != plain(i, j)) {
        out.ok = false;
        os << "integer MM (" << i << "," << j << "): " << intmm(i, j) << " != " << plain(i, j) << "\n";
      } else if (std::abs(int{got.raw(i, j)} - int{want.raw(i, j)}) > 1) {
        out.ok = false;
        os << "output (" << i << "," << j << ") raw " << got.raw(i, j) << " vs oracle " << want.raw(i, j) << "\n";
      }
    }
  }
  if (!out.ok) {
    std::ostringstream full;
    full << "qmm trial seed=" << seed << " kind=" << (aa ? "activation_activation" : "activation_weight")
         << " bits=" << bits << " M=" << m << " K=" << k << " N=" << n << "\n"
         << os.str();
    describe(full, "lhs", lhs);
    describe(full, aa ? "rhs_t" : "rhs", rhs);
    out.counterexample = full.str();
  }
  return out;
}

TrialOutcome check_dot_trial(std::uint64_t seed, const EngineConfig& engine, Index max_k,
                             std::optional<PEMode> fixed_mode) {
  Rng rng(seed);
  const PEMode drawn{uniform(rng, 0, 1) ? QmmKind::activation_activation : QmmKind::activation_weight,
                     kWidths[uniform(rng, 0, 3)]};
  const PEMode mode = fixed_mode.value_or(drawn);
  const Index k = uniform(rng, 1, max_k);
  const Index rows = uniform(rng, 1, mode.lanes(engine.pe_width));
  const IntMatrix lhs = random_payload(rows, k, mode.act_bits, rng);
  const int column_bits = mode.kind == QmmKind::activation_weight ? 1 : mode.act_bits;
  const IntMatrix column = random_payload(1, k, column_bits, rng);

  std::vector<std::span<const std::uint8_t>> spans;
  for (Index r = 0; r < rows; ++r) spans.push_back(lhs.row(r));
  TrialOutcome out;
  std::ostringstream os;
  try {
    const DotProductResult got = dpu_dot_product(mode, engine, spans, column.row(0));
    const std::int64_t expected_compute =
        (k + engine.j_unfold - 1) / engine.j_unfold * static_cast<std::int64_t>(mode.serial_cycles());
    if (got.compute_cycles != expected_compute) {
      out.ok = false;
      os << "compute cycles " << got.compute_cycles << " != " << expected_compute << "\n";
    }
    for (Index r = 0; r < rows && out.ok; ++r) {
      const std::int64_t want = oracle::plain_dot(lhs.row(r), column.row(0));
      if (got.values[static_cast<std::size_t>(r)] != want) {
        out.ok = false;
        os << "lane " << r << ": " << got.values[static_cast<std::size_t>(r)] << " != " << want << "\n";
      }
    }
  } catch (const std::exception& e) {
    out.ok = false;
    os << "exception: " << e.what() << "\n";
  }
  if (!out.ok) {
    std::ostringstream full;
    full << "dot trial seed=" << seed << " kind=" << to_string(mode.kind) << " bits=" << mode.act_bits << " K=" << k
         << " rows=" << rows << "\n"
         << os.str() << "rows:\n";
    format_matrix(full, lhs);
    full << "column:\n";
    format_matrix(full, column);
    out.counterexample = full.str();
  }
  return out;
}

TrialOutcome check_block_trial(std::uint64_t seed, const EngineConfig& engine, Fidelity fidelity) {
  Rng rng(seed);
  LayerSpec spec;
  spec.seq_len = uniform(rng, 1, 8);
  spec.heads = kWidths[uniform(rng, 0, 2)];  // 1, 2 or 4
  spec.hidden = spec.heads * uniform(rng, 1, 32 / spec.heads);
  if (spec.hidden < 2) spec.hidden = 2 * spec.heads;
  spec.ffn_dim = uniform(rng, 1, 32);
  spec.bits = {kWidths[uniform(rng, 0, 3)], kWidths[uniform(rng, 0, 3)], kWidths[uniform(rng, 0, 3)],
               kWidths[uniform(rng, 0, 3)], kWidths[uniform(rng, 0, 3)], kWidths[uniform(rng, 0, 3)]};
  const int blocks = static_cast<int>(uniform(rng, 1, 2));
  const QuantScheme scheme = uniform(rng, 0, 1) ? QuantScheme::sign_binary : QuantScheme::minmax_affine;
  const Model model = random_model(spec, blocks, rng());
  const RealTensor x = random_normal(spec.seq_len, spec.hidden, 1.0, rng);

  std::vector<std::pair<std::string, FixedMatrix>> got_taps, want_taps;
  PipelineConfig config;
  config.engine = engine;
  config.scheme = scheme;
  config.fidelity = fidelity;
  config.tap = [&](std::string_view site, const FixedMatrix& m) { got_taps.emplace_back(std::string(site), m); };

  TrialOutcome out;
  std::ostringstream os;
  try {
    const ModelResult got = run_model(model, x, config);
    const RealTensor want = oracle::reference_model(model, x, scheme, kDefaultFracBits,
                                                    [&](std::string_view site, const FixedMatrix& m) {
                                                      want_taps.emplace_back(std::string(site), m);
                                                    });
    if (got_taps.size() != want_taps.size()) {
      out.ok = false;
      os << "tap count " << got_taps.size() << " != " << want_taps.size() << "\n";
    }
    for (std::size_t t = 0; t < got_taps.size() && t < want_taps.size() && out.ok; ++t) {
      if (got_taps[t].first != want_taps[t].first || !(got_taps[t].second == want_taps[t].second)) {
        out.ok = false;
        os << "QMM output #" << t << " (" << got_taps[t].first << ") differs from reference\n";
      }
    }
    if (out.ok && got.output != want) {
      out.ok = false;
      os << "model output differs from reference\n";
    }
  } catch (const std::exception& e) {
    out.ok = false;
    os << "exception: " << e.what() << "\n";
  }
  if (!out.ok) {
    std::ostringstream full;
    full << "block trial seed=" << seed << " S=" << spec.seq_len << " d=" << spec.hidden << " h=" << spec.heads
         << " d_ff=" << spec.ffn_dim << " blocks=" << blocks << " scheme=" << to_string(scheme) << " bits="
         << spec.bits.proj_in << "," << spec.bits.qk << "," << spec.bits.sv << "," << spec.bits.proj_out << ","
         << spec.bits.ffn1 << "," << spec.bits.ffn2 << "\n"
         << os.str();
    out.counterexample = full.str();
  }
  return out;
}

VerifySummary run_verification(std::uint64_t seed, int trials, const EngineConfig& engine) {
  VerifySummary s;
  auto record = [&s](SuiteCount& count, const TrialOutcome& o) {
    if (o.ok) {
      ++count.passed;
    } else {
      ++count.failed;
      if (s.first_counterexample.empty()) s.first_counterexample = o.counterexample;
    }
  };
  for (int t = 0; t < trials; ++t) {
    record(s.qmm, check_qmm_trial(trial_seed(seed, 3 * static_cast<std::uint64_t>(t))));
    record(s.dot, check_dot_trial(trial_seed(seed, 3 * static_cast<std::uint64_t>(t) + 1), engine, 1024));
  }
  const int block_trials = std::max(1, trials / 50);
  for (int t = 0; t < block_trials; ++t) {
    record(s.block, check_block_trial(trial_seed(seed, 3 * static_cast<std::uint64_t>(t) + 2), engine,
                                      Fidelity::bit_accurate));
  }
  return s;
}

}  // namespace beta
