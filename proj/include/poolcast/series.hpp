// Copyright 2026 The Poolcast Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "poolcast/common.hpp"

namespace poolcast {

namespace detail {

inline bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  const int month = (s[5] - '0') * 10 + (s[6] - '0');
  const int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Univariate observations, optionally dated. Immutable once constructed.
class ObservedSeries {
 public:
  explicit ObservedSeries(std::vector<double> values, std::vector<std::string> dates = {})
      : values_(std::move(values)), dates_(std::move(dates)) {
    require(values_.size() >= 2, "series needs at least 2 observations");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i]))
        throw InvalidArgument("non-finite value at index " + std::to_string(i));
    if (!dates_.empty()) {
      require(dates_.size() == values_.size(), "dates and values differ in length");
      for (std::size_t i = 0; i < dates_.size(); ++i) {
        require(detail::is_iso_date(dates_[i]), "malformed date at index " + std::to_string(i));
        if (i > 0 && !(dates_[i - 1] < dates_[i]))
          throw InvalidArgument("dates not strictly increasing at index " + std::to_string(i));
      }
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<std::string>& dates() const noexcept { return dates_; }
  bool has_dates() const noexcept { return !dates_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Copy of [begin, end).
  ObservedSeries slice(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= size(), "slice out of range");
    std::vector<double> v(values_.begin() + begin, values_.begin() + end);
    std::vector<std::string> d;
    if (has_dates()) d.assign(dates_.begin() + begin, dates_.begin() + end);
    return ObservedSeries(std::move(v), std::move(d));
  }

 private:
  std::vector<double> values_;
  std::vector<std::string> dates_;
};

/// Fixed estimation window of length n followed by a holdout of length tau.
struct SampleSplit {
  std::size_t in_sample_len = 0;
  std::size_t holdout_len = 0;

  void validate(std::size_t series_len) const {
    require(in_sample_len >= 2, "in-sample length must be at least 2");
    require(holdout_len >= 1, "holdout length must be at least 1");
    require(in_sample_len + holdout_len <= series_len,
            "split n + tau = " + std::to_string(in_sample_len + holdout_len) +
                " exceeds series length " + std::to_string(series_len));
  }
};

inline std::pair<ObservedSeries, ObservedSeries> split(const ObservedSeries& series,
                                                       const SampleSplit& spec) {
  spec.validate(series.size());
  const std::size_t n = spec.in_sample_len;
  // ObservedSeries needs two values; score shorter holdouts with
  // out_of_sample_score() on the full series instead.
  require(spec.holdout_len >= 2, "split() needs a holdout of at least 2 values");
  return {series.slice(0, n), series.slice(n, n + spec.holdout_len)};
}

/// Parses `date,value` or `value` CSV text. Row numbers in errors are 1-based
/// file lines (the header is line 1).
inline ObservedSeries parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty file");
  std::string_view header = detail::trim(line);
  if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.remove_prefix(3);
  bool dated = false;
  if (header == "date,value") {
    dated = true;
  } else if (header != "value") {
    throw ParseError(1, "expected header 'date,value' or 'value'");
  }
  std::vector<double> values;
  std::vector<std::string> dates;
  std::size_t row = 1;
  std::size_t blank_row = 0;
  while (std::getline(in, line)) {
    ++row;
    std::string_view text = detail::trim(line);
    if (text.empty()) {
      if (blank_row == 0) blank_row = row;
      continue;
    }
    if (blank_row != 0) throw ParseError(blank_row, "blank line inside data");
    std::string_view value_text = text;
    if (dated) {
      const auto comma = text.find(',');
      if (comma == std::string_view::npos) throw ParseError(row, "expected 'date,value'");
      std::string_view date = detail::trim(text.substr(0, comma));
      value_text = text.substr(comma + 1);
      if (!detail::is_iso_date(date)) throw ParseError(row, "malformed ISO-8601 date");
      if (!dates.empty() && !(dates.back() < date))
        throw ParseError(row, "dates not strictly increasing");
      dates.emplace_back(date);
    } else if (text.find(',') != std::string_view::npos) {
      throw ParseError(row, "unexpected extra column");
    }
    auto v = detail::parse_double(value_text);
    if (!v) throw ParseError(row, "malformed number '" + std::string(detail::trim(value_text)) + "'");
    if (!std::isfinite(*v)) throw ParseError(row, "non-finite value");
    values.push_back(*v);
  }
  if (values.size() < 2) throw ParseError(row, "series needs at least 2 observations");
  return ObservedSeries(std::move(values), std::move(dates));
}

inline ObservedSeries load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return parse_csv(in);
}

inline void write_csv(std::ostream& out, const ObservedSeries& series) {
  out << (series.has_dates() ? "date,value\n" : "value\n");
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.has_dates()) out << series.dates()[i] << ',';
    out << format_double(series[i]) << '\n';
  }
}

inline void write_csv(const std::string& path, const ObservedSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_csv(out, series);
}

}  // namespace poolcast
