#include "ddqn/market_data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <limits>
#include <string_view>

#include "ddqn/errors.hpp"

namespace ddqn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

enum class TimeFormat { Unknown, Epoch, Iso };

}  // namespace

bool parse_iso8601(const std::string& text, std::int64_t& epoch_seconds) {
  std::string_view s = trim(text);
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
  // YYYY-MM-DD[T ]HH:MM[:SS]
  if (s.size() != 16 && s.size() != 19) return false;
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') return false;
  if (s.size() == 19 && s[16] != ':') return false;
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) ||
      !parse_int(s.substr(8, 2), d) || !parse_int(s.substr(11, 2), h) ||
      !parse_int(s.substr(14, 2), mi))
    return false;
  if (s.size() == 19 && !parse_int(s.substr(17, 2), sec)) return false;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return false;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  epoch_seconds = static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + sec;
  return true;
}

std::string check_bar(const Bar& b) {
  if (!(b.open > 0.0)) return "open must be positive";
  if (!(b.low <= b.high)) return "low exceeds high";
  if (!(b.low <= b.open && b.open <= b.high)) return "open outside [low, high]";
  if (!(b.low <= b.close && b.close <= b.high)) return "close outside [low, high]";
  if (!(b.volume >= 0.0)) return "negative volume";
  return {};
}

std::vector<Bar> parse_bars(std::istream& in, const BarFormat& format) {
  std::string line;
  std::size_t line_no = 0;

  // Skip leading '#' comment lines (format_version markers) and blank lines.
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);  // BOM
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    have_header = true;
    break;
  }
  if (!have_header) throw MalformedRow("missing header row", line_no == 0 ? 1 : line_no);

  const auto header = split_fields(line);
  const std::array<std::string, 6> wanted{lower(format.timestamp), lower(format.open),
                                          lower(format.high),      lower(format.low),
                                          lower(format.close),     lower(format.volume)};
  std::array<std::size_t, 6> col{};
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](std::string_view h) { return lower(h) == wanted[k]; });
    if (it == header.end()) throw MalformedRow("header lacks column '" + wanted[k] + "'", line_no);
    col[k] = static_cast<std::size_t>(it - header.begin());
  }
  const std::size_t min_fields = *std::max_element(col.begin(), col.end()) + 1;

  std::vector<Bar> bars;
  TimeFormat time_format = TimeFormat::Unknown;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() < min_fields) throw MalformedRow("too few fields", line_no);

    Bar bar;
    const auto ts = fields[col[0]];
    if (time_format == TimeFormat::Unknown) {
      time_format = parse_int(ts, bar.timestamp) ? TimeFormat::Epoch : TimeFormat::Iso;
    }
    const bool ts_ok = time_format == TimeFormat::Epoch
                           ? parse_int(ts, bar.timestamp)
                           : parse_iso8601(std::string(ts), bar.timestamp);
    if (!ts_ok) throw MalformedRow("unparsable timestamp '" + std::string(ts) + "'", line_no);
    if (!parse_double(fields[col[1]], bar.open) || !parse_double(fields[col[2]], bar.high) ||
        !parse_double(fields[col[3]], bar.low) || !parse_double(fields[col[4]], bar.close) ||
        !parse_double(fields[col[5]], bar.volume))
      throw MalformedRow("unparsable numeric field", line_no);

    if (const auto why = check_bar(bar); !why.empty()) throw InvariantViolation(why, line_no);
    if (!bars.empty() && bar.timestamp <= bars.back().timestamp)
      throw NonMonotonicTimestamp("timestamp does not strictly increase", line_no);
    bars.push_back(bar);
  }
  return bars;
}

std::vector<Bar> load_bars(const std::string& path, const BarFormat& format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_bars(in, format);
}

void write_bars(std::ostream& out, const std::vector<Bar>& bars) {
  out << "timestamp,open,high,low,close,volume\n";
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& b : bars) {
    out << b.timestamp << ',' << b.open << ',' << b.high << ',' << b.low << ',' << b.close
        << ',' << b.volume << '\n';
  }
  out.precision(old_precision);
}

RelativeBar encode_relative(const Bar& bar, double volume_scale) {
  return {(bar.high - bar.open) / bar.open, (bar.low - bar.open) / bar.open,
          (bar.close - bar.open) / bar.open, bar.volume / volume_scale};
}

double volume_scale_of(const std::vector<Bar>& bars) {
  if (bars.empty()) throw EmptySeries("volume scale of an empty series");
  double sum = 0.0;
  for (const auto& b : bars) sum += b.volume;
  const double mean = sum / static_cast<double>(bars.size());
  return mean > 0.0 ? mean : 1.0;
}

PriceSeries make_series(std::vector<Bar> bars, double volume_scale, std::string source_id) {
  PriceSeries s;
  s.rel.reserve(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    if (i > 0 && bars[i].timestamp <= bars[i - 1].timestamp)
      throw NonMonotonicTimestamp("timestamp does not strictly increase", i + 1);
    s.rel.push_back(encode_relative(bars[i], volume_scale));
  }
  s.bars = std::move(bars);
  s.source_id = std::move(source_id);
  return s;
}

std::pair<PriceSeries, PriceSeries> split_series(const PriceSeries& series,
                                                 std::int64_t boundary) {
  const auto it = std::lower_bound(
      series.bars.begin(), series.bars.end(), boundary,
      [](const Bar& b, std::int64_t t) { return b.timestamp < t; });
  const auto cut = static_cast<std::size_t>(it - series.bars.begin());

  PriceSeries left, right;
  left.source_id = right.source_id = series.source_id;
  left.bars.assign(series.bars.begin(), series.bars.begin() + cut);
  left.rel.assign(series.rel.begin(), series.rel.begin() + cut);
  right.bars.assign(series.bars.begin() + cut, series.bars.end());
  right.rel.assign(series.rel.begin() + cut, series.rel.end());
  return {std::move(left), std::move(right)};
}

}  // namespace ddqn
