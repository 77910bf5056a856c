#include "entransformer/panel.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "entransformer/errors.hpp"

namespace entransformer {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::int64_t civil_to_seconds(int y, unsigned mo, unsigned d, int h, int mi, int s) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok()) return std::numeric_limits<std::int64_t>::min();
  const sys_days days{ymd};
  return static_cast<std::int64_t>(days.time_since_epoch().count()) * 86400 + h * 3600 + mi * 60 + s;
}

std::optional<double> parse_cell(const std::string& text) {
  if (text.empty() || text == "NaN" || text == "nan" || text == "NAN" || text == "NA") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::kHalfHour:
      return "30min";
    case Granularity::kHourly:
      return "hourly";
    case Granularity::kDaily:
      return "daily";
  }
  return "hourly";
}

Granularity parse_granularity(const std::string& name) {
  if (name == "30min" || name == "half_hour") return Granularity::kHalfHour;
  if (name == "hourly" || name == "1h" || name == "hour") return Granularity::kHourly;
  if (name == "daily" || name == "1d" || name == "day") return Granularity::kDaily;
  throw ConfigError("granularity", "unknown granularity '" + name + "' (expected 30min, hourly or daily)");
}

std::int64_t granularity_seconds(Granularity g) {
  switch (g) {
    case Granularity::kHalfHour:
      return 1800;
    case Granularity::kHourly:
      return 3600;
    case Granularity::kDaily:
      return 86400;
  }
  return 3600;
}

std::size_t season_length(Granularity g) {
  switch (g) {
    case Granularity::kHalfHour:
      return 48;
    case Granularity::kHourly:
      return 24;
    case Granularity::kDaily:
      return 7;
  }
  return 24;
}

std::size_t SeriesPanel::missing_count() const {
  std::size_t n = 0;
  for (double v : values) n += std::isnan(v) ? 1 : 0;
  return n;
}

void SeriesPanel::validate() const {
  if (nodes() < 1) throw DataError("panel has no nodes");
  if (length() < 1) throw DataError("panel has no rows");
  if (values.size() != length() * nodes()) throw DataError("panel values do not match T x D");
  const std::int64_t step = granularity_seconds(granularity);
  for (std::size_t t = 1; t < length(); ++t) {
    if (timestamps[t] - timestamps[t - 1] != step) {
      throw DataError("irregular time grid between " + format_timestamp(timestamps[t - 1]) + " and " +
                      format_timestamp(timestamps[t]));
    }
  }
}

std::optional<std::int64_t> parse_timestamp(const std::string& raw) {
  const std::string text = trim(raw);
  int y = 0, n = 0;
  unsigned mo = 0, d = 0;
  int h = 0, mi = 0, s = 0;
  if (std::sscanf(text.c_str(), "%4d-%2u-%2u%n", &y, &mo, &d, &n) != 3 || n != 10) return std::nullopt;
  std::size_t pos = 10;
  if (pos < text.size()) {
    if (text[pos] != ' ' && text[pos] != 'T') return std::nullopt;
    ++pos;
    int used = 0;
    if (std::sscanf(text.c_str() + pos, "%2d:%2d%n", &h, &mi, &used) != 2 || used != 5) return std::nullopt;
    pos += 5;
    if (pos < text.size() && text[pos] == ':') {
      if (std::sscanf(text.c_str() + pos, ":%2d%n", &s, &used) != 1 || used != 3) return std::nullopt;
      pos += 3;
      if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      }
    }
    if (pos < text.size()) {
      const std::string zone = text.substr(pos);
      int zh = 0, zm = 0;
      const bool ok = zone == "Z" || zone == "z" ||
                      ((zone[0] == '+' || zone[0] == '-') && zone.size() == 6 &&
                       std::sscanf(zone.c_str() + 1, "%2d:%2d", &zh, &zm) == 2);
      if (!ok) return std::nullopt;
    }
  }
  if (h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) return std::nullopt;
  const std::int64_t secs = civil_to_seconds(y, mo, d, h, mi, s);
  if (secs == std::numeric_limits<std::int64_t>::min()) return std::nullopt;
  return secs;
}

std::string format_timestamp(std::int64_t seconds) {
  using namespace std::chrono;
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>((rem % 3600) / 60), static_cast<int>(rem % 60));
  return buf;
}

SeriesPanel parse_panel(std::istream& in, std::optional<Granularity> hint, const std::string& source) {
  SeriesPanel panel;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw DataError(source + ", line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DataError(source + ": empty file");
  auto header = split_csv_line(trim(line));
  if (header.empty() || header[0] != "timestamp") fail("first header column must be 'timestamp'");
  if (header.size() < 2) fail("header names no node columns");
  panel.node_names.assign(header.begin() + 1, header.end());
  const std::size_t width = header.size();

  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    auto fields = split_csv_line(row);
    if (fields.size() != width) {
      fail("expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    auto ts = parse_timestamp(fields[0]);
    if (!ts) fail("unparseable timestamp '" + fields[0] + "'");
    if (!panel.timestamps.empty()) {
      const std::int64_t prev = panel.timestamps.back();
      if (*ts <= prev) fail("timestamp " + fields[0] + " is not after " + format_timestamp(prev));
      const std::int64_t gap = *ts - prev;
      if (!hint) {
        if (panel.timestamps.size() == 1) {
          if (gap == 1800) {
            hint = Granularity::kHalfHour;
          } else if (gap == 3600) {
            hint = Granularity::kHourly;
          } else if (gap == 86400) {
            hint = Granularity::kDaily;
          } else {
            fail("unsupported time spacing of " + std::to_string(gap) + " seconds");
          }
        }
      }
      if (gap != granularity_seconds(*hint)) {
        fail("time gap between " + format_timestamp(prev) + " and " + format_timestamp(*ts) + " (expected " +
             to_string(*hint) + " spacing)");
      }
    }
    panel.timestamps.push_back(*ts);
    for (std::size_t j = 1; j < width; ++j) {
      auto v = parse_cell(fields[j]);
      if (!v) fail("unparseable value '" + fields[j] + "' in column '" + header[j] + "'");
      panel.values.push_back(*v);
    }
  }
  if (panel.timestamps.empty()) throw DataError(source + ": no data rows");
  panel.granularity = hint.value_or(Granularity::kHourly);
  return panel;
}

SeriesPanel load_panel(const std::filesystem::path& path, std::optional<Granularity> hint) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open panel file " + path.string());
  return parse_panel(in, hint, path.string());
}

void write_panel(std::ostream& out, const SeriesPanel& panel) {
  out << "timestamp";
  for (const auto& name : panel.node_names) out << ',' << name;
  out << '\n';
  char buf[64];
  for (std::size_t t = 0; t < panel.length(); ++t) {
    out << format_timestamp(panel.timestamps[t]);
    for (std::size_t d = 0; d < panel.nodes(); ++d) {
      out << ',';
      if (!panel.missing(t, d)) {
        std::snprintf(buf, sizeof buf, "%.17g", panel.value(t, d));
        out << buf;
      }
    }
    out << '\n';
  }
}

SeriesPanel slice_rows(const SeriesPanel& panel, IndexRange range) {
  if (range.end > panel.length() || range.begin > range.end) throw DataError("slice_rows: range out of bounds");
  SeriesPanel out;
  out.granularity = panel.granularity;
  out.node_names = panel.node_names;
  out.timestamps.assign(panel.timestamps.begin() + range.begin, panel.timestamps.begin() + range.end);
  out.values.assign(panel.values.begin() + range.begin * panel.nodes(),
                    panel.values.begin() + range.end * panel.nodes());
  return out;
}

}  // namespace entransformer
