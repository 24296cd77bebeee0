#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace ddqn {

// One minute of raw market data.
struct Bar {
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  bool operator==(const Bar&) const = default;
};

// High, low and close as ratios to the bar's open (0.02 means +2%), plus
// volume divided by a series-level scale.
struct RelativeBar {
  double rel_high = 0.0;
  double rel_low = 0.0;
  double rel_close = 0.0;
  double norm_volume = 0.0;

  bool operator==(const RelativeBar&) const = default;
};

struct PriceSeries {
  std::vector<Bar> bars;
  std::vector<RelativeBar> rel;
  std::string source_id;

  std::size_t size() const { return bars.size(); }
  bool empty() const { return bars.empty(); }
};

// Header names of the six required columns. Matching is case-insensitive and
// the columns may appear in any order; extra columns are ignored.
struct BarFormat {
  std::string timestamp = "timestamp";
  std::string open = "open";
  std::string high = "high";
  std::string low = "low";
  std::string close = "close";
  std::string volume = "volume";
};

// Returns the bar's invariant violation message, or empty when it is valid.
std::string check_bar(const Bar& bar);

// Parses a CSV stream with a header row. Timestamps are ISO-8601
// (YYYY-MM-DD[T ]HH:MM[:SS][Z]) or integer epoch seconds, detected from the
// first data row and required to be uniform thereafter.
// Throws MalformedRow, InvariantViolation or NonMonotonicTimestamp with the
// 1-based line number (the header is line 1).
std::vector<Bar> parse_bars(std::istream& in, const BarFormat& format = {});
std::vector<Bar> load_bars(const std::string& path, const BarFormat& format = {});

// Writes bars as CSV with epoch-second timestamps and round-trippable decimals.
void write_bars(std::ostream& out, const std::vector<Bar>& bars);

RelativeBar encode_relative(const Bar& bar, double volume_scale);

// Mean volume, or 1.0 when the mean is zero. Throws EmptySeries.
double volume_scale_of(const std::vector<Bar>& bars);

// Builds a series whose relative encoding uses the given volume scale.
// Throws NonMonotonicTimestamp if timestamps do not strictly increase.
PriceSeries make_series(std::vector<Bar> bars, double volume_scale, std::string source_id);

// Partitions by timestamp: bars strictly before `boundary` go left.
std::pair<PriceSeries, PriceSeries> split_series(const PriceSeries& series,
                                                 std::int64_t boundary);

// Parses one ISO-8601 timestamp to epoch seconds; returns false on failure.
bool parse_iso8601(const std::string& text, std::int64_t& epoch_seconds);

}  // namespace ddqn
