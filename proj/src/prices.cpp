#include "lvopt/prices.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lvopt/tensor.hpp"

namespace lvopt {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's
// civil-days algorithm), so hour arithmetic survives month and year edges.
long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

// Accepts `YYYY-MM-DD HH:MM` and the NYISO export style `MM/DD/YYYY HH:MM`;
// returns hours since the 1970 epoch.
long parse_stamp(const std::string& stamp) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  int n = std::sscanf(stamp.c_str(), "%d-%d-%d %d:%d", &y, &mo, &d, &h, &mi);
  if (n != 5) {
    n = std::sscanf(stamp.c_str(), "%d/%d/%d %d:%d", &mo, &d, &y, &h, &mi);
    check(n == 5, "ingest_prices: unparsable timestamp '" + stamp + "'");
  }
  check(mo >= 1 && mo <= 12 && d >= 1 && d <= 31 && h >= 0 && h <= 23 && mi >= 0 && mi <= 59,
        "ingest_prices: timestamp out of range '" + stamp + "'");
  check(mi == 0, "ingest_prices: sub-hourly timestamp '" + stamp + "'");
  return days_from_civil(y, mo, d) * 24 + h;
}

void resample(PriceSeries& s) {
  s.steps.clear();
  s.steps.reserve(s.hourly.size() * 4);
  for (double v : s.hourly)
    for (int k = 0; k < 4; ++k) s.steps.push_back(v);
}

}  // namespace

std::vector<double> PriceSeries::day_slice(int day, int horizon) const {
  check(day >= 0 && horizon >= 1, "prices: day and horizon must be nonnegative");
  const size_t end = (static_cast<size_t>(day) + 1) * static_cast<size_t>(horizon);
  check(end <= steps.size(), "prices: series has " + std::to_string(steps.size()) +
                                 " steps but day " + std::to_string(day) + " needs " +
                                 std::to_string(end));
  std::vector<double> out(steps.begin() + static_cast<long>(end) - horizon,
                          steps.begin() + static_cast<long>(end));
  return out;
}

PriceSeries parse_prices_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  check(static_cast<bool>(std::getline(in, line)), "ingest_prices: empty file");
  std::string header = trim(line);
  header.erase(std::remove(header.begin(), header.end(), ' '), header.end());
  check(header == "timestamp,price",
        "ingest_prices: expected header 'timestamp,price', got '" + trim(line) + "'");

  PriceSeries s;
  long prev_hour = 0;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const size_t c1 = line.find(',');
    check(c1 != std::string::npos,
          "ingest_prices: row " + std::to_string(row) + " has 1 column, expected 2");
    check(line.find(',', c1 + 1) == std::string::npos,
          "ingest_prices: row " + std::to_string(row) + " has more than 2 columns");
    const std::string stamp = trim(line.substr(0, c1));
    const std::string value = trim(line.substr(c1 + 1));

    const long hour = parse_stamp(stamp);
    if (!s.stamps.empty())
      check(hour == prev_hour + 1,
            "ingest_prices: coverage gap between '" + s.stamps.back() + "' and '" + stamp + "'");
    prev_hour = hour;

    const char* begin = value.c_str();
    char* end = nullptr;
    const double price = std::strtod(begin, &end);
    check(end != begin && *end == '\0' && std::isfinite(price),
          "ingest_prices: price '" + value + "' at '" + stamp + "' is not a finite number");
    check(price >= 0, "ingest_prices: negative price at '" + stamp + "'");

    s.stamps.push_back(stamp);
    s.hourly.push_back(price);
  }
  check(!s.hourly.empty(), "ingest_prices: no price rows");
  resample(s);
  return s;
}

PriceSeries ingest_prices(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "ingest_prices: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_prices_text(buf.str());
}

PriceSeries synthetic_prices(int days) {
  check(days >= 1, "synthetic_prices: days must be positive");
  PriceSeries s;
  s.hourly.reserve(static_cast<size_t>(days) * 24);
  const double pi = std::acos(-1.0);
  for (int d = 0; d < days; ++d)
    for (int h = 0; h < 24; ++h)
      s.hourly.push_back(0.09 - 0.06 * std::cos(2.0 * pi * (h - 5) / 24.0));
  resample(s);
  return s;
}

}  // namespace lvopt
