#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "beta/config.hpp"
#include "beta/perf.hpp"

namespace beta {

enum class ReportFormat { human, machine };

ReportFormat parse_report_format(std::string_view name);

struct ReportTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Ordered metrics plus optional tables. Machine form is one
/// `metric.<name>=<value>` line per metric (reals to 6 significant digits);
/// tables and notes appear in the human form only.
struct Report {
  std::string title;
  std::vector<std::string> notes;
  std::vector<std::pair<std::string, std::string>> metrics;
  std::vector<ReportTable> tables;

  void add_int(std::string name, long long value);
  void add_uint(std::string name, unsigned long long value);
  void add_real(std::string name, double value);
  void add_text(std::string name, std::string value);
};

std::string format_real(double value);
std::string render(const Report& report, ReportFormat format);

inline constexpr const char* kOpsConvention = "2*M*K*N effective ops per QMM (multiply and add counted separately)";

Report run_report(const RunConfig& config, const ModelResult& result);
Report sweep_report(const RunConfig& config, const std::vector<SweepPoint>& points);

struct CountRow {
  Index n = 0;
  CountReport counts;
};
Report count_ops_report(const std::vector<CountRow>& rows);

}  // namespace beta
