#include "beta/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>

#include "beta/errors.hpp"

namespace beta {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(key, "expected an integer, got '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw ConfigError(key, "expected a number, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + value + "'");
}

Fidelity parse_fidelity(const std::string& key, const std::string& value) {
  if (value == "functional") return Fidelity::functional;
  if (value == "bit_accurate") return Fidelity::bit_accurate;
  throw ConfigError(key, "expected functional or bit_accurate, got '" + value + "'");
}

}  // namespace

void RunConfig::validate() const {
  pipeline.engine.validate();
  pipeline.vpu.validate();
  spec.validate();
  energy.validate();
  if (blocks < 0) throw ConfigError("model.blocks", "must be >= 0");
  if (!(weight_scale > 0)) throw ConfigError("model.weight_scale", "must be positive");
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig c;
  std::optional<int> act_bits;
  std::map<std::string, int> site_bits;
  auto& e = c.pipeline.engine;
  auto& v = c.pipeline.vpu;
  auto& s = c.spec;

  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  auto integer = [](auto& field) {
    return Setter([&field](const std::string& k, const std::string& val) {
      field = parse_integer<std::remove_reference_t<decltype(field)>>(k, val);
    });
  };
  auto real = [](double& field) {
    return Setter([&field](const std::string& k, const std::string& val) { field = parse_real(k, val); });
  };
  auto boolean = [](bool& field) {
    return Setter([&field](const std::string& k, const std::string& val) { field = parse_bool(k, val); });
  };
  auto site = [&site_bits](const std::string& k, const std::string& val) { site_bits[k] = parse_integer<int>(k, val); };

  const std::map<std::string, Setter> setters = {
      {"engine.n_dpu", integer(e.n_dpu)},
      {"engine.j_unfold", integer(e.j_unfold)},
      {"engine.pe_width", integer(e.pe_width)},
      {"engine.acc_width", integer(e.acc_width)},
      {"engine.freq_hz", real(e.freq_hz)},
      {"engine.load_bandwidth", integer(e.load_bandwidth)},
      {"engine.overlap_load", boolean(e.overlap_load)},
      {"engine.buffer_capacity", integer(e.buffer_capacity)},
      {"engine.check_invariants", boolean(e.check_invariants)},
      {"engine.fidelity",
       [&c](const std::string& k, const std::string& val) { c.pipeline.fidelity = parse_fidelity(k, val); }},
      {"vpu.vector_width", integer(v.vector_width)},
      {"vpu.frac_bits", integer(v.frac_bits)},
      {"vpu.overlap", boolean(v.overlap)},
      {"model.blocks", integer(c.blocks)},
      {"model.seq_len", integer(s.seq_len)},
      {"model.hidden", integer(s.hidden)},
      {"model.heads", integer(s.heads)},
      {"model.ffn_dim", integer(s.ffn_dim)},
      {"model.weight_bits", integer(s.weight_bits)},
      {"model.act_bits", [&act_bits](const std::string& k, const std::string& val) { act_bits = parse_integer<int>(k, val); }},
      {"model.bits.proj_in", site},
      {"model.bits.qk", site},
      {"model.bits.sv", site},
      {"model.bits.proj_out", site},
      {"model.bits.ffn1", site},
      {"model.bits.ffn2", site},
      {"model.weights_dir", [&c](const std::string&, const std::string& val) { c.weights_dir = val; }},
      {"model.weight_scale", real(c.weight_scale)},
      {"quant.scheme",
       [&c](const std::string&, const std::string& val) { c.pipeline.scheme = parse_quant_scheme(val); }},
      {"energy.iop_1", real(c.energy.iop_by_width[0])},
      {"energy.iop_2", real(c.energy.iop_by_width[1])},
      {"energy.iop_4", real(c.energy.iop_by_width[2])},
      {"energy.iop_8", real(c.energy.iop_by_width[3])},
      {"energy.fixed16_op", real(c.energy.fixed16_op)},
      {"energy.nonlinear_op", real(c.energy.nonlinear_op)},
      {"run.seed", integer(c.seed)},
      {"run.output", [&c](const std::string&, const std::string& val) { c.output = val; }},
  };

  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'section.key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "repeated key");
    if (value.empty()) throw ConfigError(key, "missing value");
    it->second(key, value);
  }

  if (act_bits) s.bits = SiteBits::uniform(*act_bits);
  const std::pair<const char*, int SiteBits::*> sites[] = {
      {"model.bits.proj_in", &SiteBits::proj_in}, {"model.bits.qk", &SiteBits::qk},
      {"model.bits.sv", &SiteBits::sv},           {"model.bits.proj_out", &SiteBits::proj_out},
      {"model.bits.ffn1", &SiteBits::ffn1},       {"model.bits.ffn2", &SiteBits::ffn2}};
  for (const auto& [name, member] : sites) {
    if (auto it = site_bits.find(name); it != site_bits.end()) s.bits.*member = it->second;
  }
  if (act_bits && !is_supported_bit_width(*act_bits)) throw ConfigError("model.act_bits", "must be one of 1, 2, 4, 8");
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read '" + path + "'");
  return parse_run_config(in);
}

Model build_model(const RunConfig& config) {
  const int frac_bits = config.pipeline.vpu.frac_bits;
  if (config.weights_dir.empty()) return random_model(config.spec, config.blocks, config.seed, frac_bits);

  const Fixed16 scale = Fixed16::from_double(2 * config.weight_scale, frac_bits);
  const Fixed16 offset = Fixed16::from_double(-config.weight_scale, frac_bits);
  if (scale.is_zero()) throw ConfigError("model.weight_scale", "rounds to zero at vpu.frac_bits");
  const Index d = config.spec.hidden;
  const Index f = config.spec.ffn_dim;
  Model model;
  for (int b = 0; b < config.blocks; ++b) {
    auto load = [&](const char* name, Index rows, Index cols) {
      const std::string path = config.weights_dir + "/block" + std::to_string(b) + "_" + name + ".mat";
      IntMatrix payload = read_matrix_file(path);
      if (payload.rows() != rows || payload.cols() != cols || payload.bit_width() != 1) {
        throw ConfigError("model.weights_dir", path + " must hold a " + std::to_string(rows) + "x" +
                                                   std::to_string(cols) + " 1-bit matrix");
      }
      return AffineOperand{std::move(payload), scale, offset, Role::weight};
    };
    BlockWeights w;
    w.wq = load("wq", d, d);
    w.wk = load("wk", d, d);
    w.wv = load("wv", d, d);
    w.wo = load("wo", d, d);
    w.w1 = load("w1", d, f);
    w.w2 = load("w2", f, d);
    w.ln1_gain = w.ln2_gain = Eigen::RowVectorXd::Ones(d);
    w.ln1_bias = w.ln2_bias = Eigen::RowVectorXd::Zero(d);
    model.specs.push_back(config.spec);
    model.weights.push_back(std::move(w));
  }
  return model;
}

RealTensor build_input(const RunConfig& config) {
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  return random_normal(config.spec.seq_len, config.spec.hidden, 1.0, rng);
}

}  // namespace beta
