#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace entransformer {

enum class Granularity { kHalfHour, kHourly, kDaily };

std::string to_string(Granularity g);
Granularity parse_granularity(const std::string& name);
std::int64_t granularity_seconds(Granularity g);
// Seasonal period used for mean imputation: 48, 24 and 7 slots respectively.
std::size_t season_length(Granularity g);

// Half-open row range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

// T x D multivariate series on a regular time grid. Missing cells hold NaN.
struct SeriesPanel {
  std::vector<std::int64_t> timestamps;  // naive local seconds since 1970-01-01
  Granularity granularity = Granularity::kHourly;
  std::vector<std::string> node_names;
  std::vector<double> values;  // row-major, length T * D

  std::size_t length() const { return timestamps.size(); }
  std::size_t nodes() const { return node_names.size(); }
  double value(std::size_t t, std::size_t d) const { return values[t * nodes() + d]; }
  double& value(std::size_t t, std::size_t d) { return values[t * nodes() + d]; }
  bool missing(std::size_t t, std::size_t d) const { return std::isnan(value(t, d)); }
  std::size_t missing_count() const;

  // Throws DataError if shapes disagree or the time grid is irregular.
  void validate() const;
};

// Parses "YYYY-MM-DD HH:MM[:SS]", "YYYY-MM-DD" or RFC 3339
// ("YYYY-MM-DDTHH:MM:SS[.frac](Z|+hh:mm|-hh:mm)"). Offsets are ignored:
// timestamps are treated as naive local time.
std::optional<std::int64_t> parse_timestamp(const std::string& text);
// "YYYY-MM-DDTHH:MM:SS"
std::string format_timestamp(std::int64_t seconds);

// Reads the panel CSV layout: header `timestamp,<node>,...`, one row per time
// step, empty field or NaN token for missing cells. Granularity is inferred
// from the spacing unless a hint is given. Errors carry the line number.
SeriesPanel parse_panel(std::istream& in, std::optional<Granularity> hint = std::nullopt,
                        const std::string& source = "<stream>");
SeriesPanel load_panel(const std::filesystem::path& path, std::optional<Granularity> hint = std::nullopt);

void write_panel(std::ostream& out, const SeriesPanel& panel);

// Rows [range.begin, range.end) as a new panel.
SeriesPanel slice_rows(const SeriesPanel& panel, IndexRange range);

}  // namespace entransformer
