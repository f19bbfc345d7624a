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

#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "poolcast/rng.hpp"
#include "poolcast/series.hpp"

using namespace poolcast;

namespace {

ObservedSeries parse(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

std::size_t error_row(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.row();
  }
  return 0;
}

}  // namespace

TEST(Series, ParsesDatedCsv) {
  const auto s = parse("date,value\n2020-01-02,0.5\n2020-01-03,-1.25\n2020-01-06,3\n");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.dates()[2], "2020-01-06");
  EXPECT_DOUBLE_EQ(s[1], -1.25);
}

TEST(Series, ToleratesBomCrlfAndTrailingBlankLines) {
  const auto s = parse("\xEF\xBB\xBFvalue\r\n1.5\r\n2.5\r\n\r\n\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_FALSE(s.has_dates());
  EXPECT_DOUBLE_EQ(s[1], 2.5);
}

TEST(Series, ReportsFileLineOfBadRows) {
  EXPECT_EQ(error_row("date,value\n2020-01-02,0.5\n2020-01-03,abc\n"), 3u);
  EXPECT_EQ(error_row("date,value\n2020-01-02,0.5\n\n2020-01-03,1\n"), 3u);
  EXPECT_EQ(error_row("date,value\n2020-01-02,0.5\n2020-13-03,1\n"), 3u);
  EXPECT_EQ(error_row("date,value\n2020-01-02,0.5\n2020-01-02,1\n"), 3u);
  EXPECT_EQ(error_row("value\n1\nnan\n"), 3u);
}

TEST(Series, RejectsTooShortOrNonFinite) {
  EXPECT_THROW(ObservedSeries({1.0}), InvalidArgument);
  EXPECT_THROW(ObservedSeries({1.0, std::numeric_limits<double>::infinity()}), InvalidArgument);
  EXPECT_THROW(ObservedSeries({1.0, 2.0}, {"2020-01-02", "2020-01-01"}), InvalidArgument);
}

TEST(Series, SplitIsFixedWindow) {
  const ObservedSeries s({1, 2, 3, 4, 5, 6});
  const auto [in, out] = split(s, {4, 2});
  EXPECT_EQ(in.values(), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(out.values(), (std::vector<double>{5, 6}));
  EXPECT_THROW(split(s, {5, 2}), InvalidArgument);
  EXPECT_THROW(SampleSplit({4, 0}).validate(6), InvalidArgument);
}

// Property: write then parse reproduces values and dates exactly.
TEST(Series, CsvRoundTripOnRandomSeries) {
  RngStream rng(2718);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.below(300);
    std::vector<double> v(n);
    std::vector<std::string> d;
    const bool dated = rng.below(2) == 1;
    int day = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(12)) - 6.0);
      if (dated) {
        day += 1 + static_cast<int>(rng.below(3));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", 1990 + day / 336, 1 + (day / 28) % 12, 1 + day % 28);
        d.emplace_back(buf);
      }
    }
    const ObservedSeries s(v, d);
    std::ostringstream out;
    write_csv(out, s);
    const auto back = parse(out.str());
    ASSERT_EQ(back.values(), s.values()) << rep;
    ASSERT_EQ(back.dates(), s.dates()) << rep;
  }
}
