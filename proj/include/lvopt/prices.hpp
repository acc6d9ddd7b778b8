#pragma once

#include <string>
#include <vector>

namespace lvopt {

// Hourly day-ahead electricity prices resampled to the 15-minute grid by
// holding each hour's value across its four steps.
struct PriceSeries {
  std::vector<std::string> stamps;  // one per hour, as ingested; empty for synthetic series
  std::vector<double> hourly;       // $/kWh
  std::vector<double> steps;        // 4 per hour, hold-last

  int hours() const { return static_cast<int>(hourly.size()); }

  // Step prices for one day of the given horizon, starting at day * horizon.
  // Throws when the series ends before the requested day.
  std::vector<double> day_slice(int day, int horizon) const;
};

// Parses a CSV with header `timestamp,price` and hourly rows. Timestamps may
// be `YYYY-MM-DD HH:MM` or `MM/DD/YYYY HH:MM` (the NYISO export style) and
// must advance in whole-hour increments. Throws naming the offense: a bad
// header, wrong column counts, unparsable or negative prices, sub-hourly
// stamps, or coverage gaps between consecutive rows.
PriceSeries ingest_prices(const std::string& path);
PriceSeries parse_prices_text(const std::string& text);

// Built-in price shape lambda(h) = 0.09 - 0.06 cos(2 pi (h - 5) / 24):
// 0.03 $/kWh at 05:00 rising to a 0.15 peak at 17:00, repeated daily.
PriceSeries synthetic_prices(int days);

}  // namespace lvopt
