#include "beta/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "beta/errors.hpp"

namespace beta {

ReportFormat parse_report_format(std::string_view name) {
  if (name == "human") return ReportFormat::human;
  if (name == "machine") return ReportFormat::machine;
  throw ConfigError("--format", "expected human or machine, got '" + std::string(name) + "'");
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

void Report::add_int(std::string name, long long value) { metrics.emplace_back(std::move(name), std::to_string(value)); }
void Report::add_uint(std::string name, unsigned long long value) {
  metrics.emplace_back(std::move(name), std::to_string(value));
}
void Report::add_real(std::string name, double value) { metrics.emplace_back(std::move(name), format_real(value)); }
void Report::add_text(std::string name, std::string value) { metrics.emplace_back(std::move(name), std::move(value)); }

namespace {

void render_table(std::ostringstream& out, const ReportTable& t) {
  std::vector<std::size_t> width(t.header.size(), 0);
  for (std::size_t c = 0; c < t.header.size(); ++c) width[c] = t.header[c].size();
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << "  ";
      out << std::string(width[c] - cells[c].size(), ' ') << cells[c];
    }
    out << '\n';
  };
  line(t.header);
  for (const auto& row : t.rows) line(row);
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string render(const Report& report, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::machine) {
    for (const auto& [name, value] : report.metrics) out << "metric." << name << '=' << value << '\n';
    return out.str();
  }
  out << report.title << '\n';
  for (const auto& n : report.notes) out << "# " << n << '\n';
  std::size_t width = 0;
  for (const auto& m : report.metrics) width = std::max(width, m.first.size());
  for (const auto& [name, value] : report.metrics) {
    out << "  " << name << std::string(width - name.size() + 2, ' ') << value << '\n';
  }
  for (const auto& t : report.tables) {
    out << '\n';
    render_table(out, t);
  }
  return out.str();
}

namespace {

void add_common(Report& r, const RunConfig& config) {
  r.add_uint("seed", config.seed);
  r.add_text("ops_convention", "2MKN");
  r.notes.push_back(std::string("ops: ") + kOpsConvention);
  r.notes.push_back("seed: " + std::to_string(config.seed));
  r.notes.push_back("host quantization and nonlinear functions are charged zero engine cycles");
  const auto& s = config.spec;
  r.add_int("model.blocks", config.blocks);
  r.add_int("model.seq_len", s.seq_len);
  r.add_int("model.hidden", s.hidden);
  r.add_int("model.heads", s.heads);
  r.add_int("model.ffn_dim", s.ffn_dim);
}

}  // namespace

Report run_report(const RunConfig& config, const ModelResult& result) {
  Report r;
  r.title = "run report";
  add_common(r, config);
  const auto& b = config.spec.bits;
  r.add_text("model.bits", std::to_string(b.proj_in) + "," + std::to_string(b.qk) + "," + std::to_string(b.sv) + "," +
                               std::to_string(b.proj_out) + "," + std::to_string(b.ffn1) + "," + std::to_string(b.ffn2));
  const BlockTrace& trace = result.trace;
  const ThroughputReport tp = throughput_report(trace, config.pipeline.engine);

  std::int64_t load = 0, hidden = 0, compute = 0, drain = 0, vpu = 0, vpu_exposed = 0;
  // Per site, blocks and heads folded together ("qk.3" -> "qk").
  std::map<std::string, std::pair<std::int64_t, std::uint64_t>> by_site;
  std::vector<std::string> site_order;
  for (const auto& q : trace.qmms) {
    load += q.engine.load_cycles;
    hidden += q.engine.hidden_load_cycles;
    compute += q.engine.compute_cycles;
    drain += q.engine.drain_cycles;
    vpu += q.vpu_cycles;
    vpu_exposed += q.vpu_exposed_cycles;
    const std::string site = q.site.substr(0, q.site.find('.'));
    if (!by_site.contains(site)) site_order.push_back(site);
    by_site[site].first += q.total_cycles();
    by_site[site].second += q.engine.effective_ops;
  }
  r.add_int("cycles", tp.cycles);
  r.add_int("cycles.load", load);
  r.add_int("cycles.load_hidden", hidden);
  r.add_int("cycles.compute", compute);
  r.add_int("cycles.drain", drain);
  r.add_int("cycles.vpu", vpu);
  r.add_int("cycles.vpu_exposed", vpu_exposed);
  r.add_uint("effective_ops", tp.effective_ops);
  r.add_real("seconds", tp.seconds);
  r.add_real("gops", tp.gops);
  r.add_real("peak_gops", tp.peak_gops);
  r.add_real("utilization", tp.utilization);
  r.add_uint("iop", trace.ops.iop);
  r.add_uint("op", trace.ops.op);
  r.add_uint("nonlinear", trace.ops.nonlinear);
  r.add_uint("saturations", trace.saturations);
  const EnergyProxy e = energy_proxy(trace.ops, naive_counter(trace), config.energy);
  r.add_real("energy.abstracted_units", e.abstracted_units);
  r.add_real("energy.naive_units", e.naive_units);
  r.add_real("energy.ratio", e.ratio);
  r.add_text("output_checksum", hex(checksum(result.output)));

  ReportTable t{{"site", "cycles", "ops", "gops"}, {}};
  for (const auto& site : site_order) {
    const auto [cycles, ops] = by_site[site];
    const double gops = static_cast<double>(ops) / (static_cast<double>(cycles) / config.pipeline.engine.freq_hz) / 1e9;
    t.rows.push_back({site, std::to_string(cycles), std::to_string(ops), format_real(gops)});
  }
  r.tables.push_back(std::move(t));
  return r;
}

Report sweep_report(const RunConfig& config, const std::vector<SweepPoint>& points) {
  Report r;
  r.title = "precision sweep";
  add_common(r, config);
  ReportTable t{{"act_bits", "cycles", "gops", "utilization", "aw_share", "energy_ratio"}, {}};
  for (const auto& p : points) {
    const std::string key = "sweep.a" + std::to_string(p.act_bits);
    const double aw_share = static_cast<double>(p.aw_ops) / static_cast<double>(p.throughput.effective_ops);
    r.add_int(key + ".cycles", p.throughput.cycles);
    r.add_real(key + ".gops", p.throughput.gops);
    r.add_real(key + ".utilization", p.throughput.utilization);
    r.add_real(key + ".aw_share", aw_share);
    r.add_real(key + ".energy_ratio", p.energy.ratio);
    r.add_text(key + ".output_checksum", hex(p.output_checksum));
    t.rows.push_back({std::to_string(p.act_bits), std::to_string(p.throughput.cycles), format_real(p.throughput.gops),
                      format_real(p.throughput.utilization), format_real(aw_share), format_real(p.energy.ratio)});
  }
  if (!points.empty()) r.add_real("peak_gops", points.front().throughput.peak_gops);
  r.tables.push_back(std::move(t));
  return r;
}

Report count_ops_report(const std::vector<CountRow>& rows) {
  Report r;
  r.title = "operation counts, N x N activation x weight (activation offset, no weight offset)";
  r.notes.push_back("formula: 2N^3 Iop, 3N^2+2 Op");
  ReportTable t{{"N", "iop", "op", "2N^3", "3N^2+2", "match"}, {}};
  bool all = true;
  for (const auto& row : rows) {
    const auto& c = row.counts;
    const bool match = c.iop == c.expected_iop && c.op == c.expected_op;
    all = all && match;
    const std::string key = "count.n" + std::to_string(row.n);
    r.add_uint(key + ".iop", c.iop);
    r.add_uint(key + ".op", c.op);
    r.add_text(key + ".match", match ? "true" : "false");
    t.rows.push_back({std::to_string(row.n), std::to_string(c.iop), std::to_string(c.op),
                      std::to_string(c.expected_iop), std::to_string(c.expected_op), match ? "yes" : "MISMATCH"});
    if (!match) r.notes.push_back(c.diagnostic);
  }
  r.add_text("count.all_match", all ? "true" : "false");
  r.tables.push_back(std::move(t));
  return r;
}

}  // namespace beta
