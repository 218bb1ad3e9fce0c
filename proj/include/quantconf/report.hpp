#pragma once

#include <string>
#include <vector>

#include "quantconf/compare.hpp"
#include "quantconf/divergence.hpp"

namespace quantconf {

enum class ReportFormat { markdown, csv, json };

ReportFormat report_format_from_string(const std::string& s);

// Markdown tables show fractions as percentages with 2 decimals (entropy ×100
// as well); csv/json keep full precision in fractional units.
std::string render(const ComparisonReport& report, ReportFormat format);

// Inverse of render(report, json).
ComparisonReport parse_report_json(const std::string& text);

std::string render_jsd_table(const std::vector<ModelJsd>& rows, ReportFormat format);

// Round-half-away to hundredths of a percent: 0.6503 -> 6503.
long long percent_cents(double fraction);
// "65.03"; with_sign gives "+1.06" / "-1.56".
std::string format_cents(long long cents, bool with_sign = false);

}  // namespace quantconf
