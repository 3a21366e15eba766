#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace q2t::cli {

enum class CsvKind { kEval, kSweep };

// Decided from the header line; throws kNoRows for an empty file and kParse
// for an unknown header.
CsvKind detect_csv_kind(std::string_view text, std::string_view origin);

struct SweepSeries {
  std::string axis;
  std::vector<std::string> names;  // A_m, A_i, A_n, A_p
  std::vector<double> x;
  // points[series][row]; empty for failed or absent values
  std::vector<std::vector<std::optional<double>>> points;
};

// Throws kNoRows when the file has no data rows.
SweepSeries parse_sweep_csv(std::string_view text, std::string_view origin);

// Line plot, one polyline per series, metric in percent.
std::string render_sweep_svg(const SweepSeries& series, std::string_view title);

}  // namespace q2t::cli
