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

// Writes a dated GARCH(1,1) return series with Student-t innovations, used
// as the bundled stand-in for daily index returns.
//
//   poolcast_synth <rows> <seed> > data/synthetic_returns.csv

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "poolcast/common.hpp"
#include "poolcast/rng.hpp"
#include "poolcast/series.hpp"

namespace {

constexpr int kDof = 6;
constexpr double kMean = 0.04;
constexpr double kOmega = 0.015;
constexpr double kAlpha = 0.08;
constexpr double kBeta = 0.90;

double student_t(poolcast::RngStream& rng) {
  double chi2 = 0.0;
  for (int i = 0; i < kDof; ++i) {
    const double z = rng.normal();
    chi2 += z * z;
  }
  return rng.normal() * std::sqrt((kDof - 2.0) / chi2);
}

std::vector<std::string> business_days(std::chrono::year_month_day start, std::size_t n) {
  using namespace std::chrono;
  std::vector<std::string> out;
  sys_days d{start};
  while (out.size() < n) {
    const weekday wd{d};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day ymd{d};
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
      out.emplace_back(buf);
    }
    d += days{1};
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: poolcast_synth <rows> <seed>\n";
    return 2;
  }
  const auto n = static_cast<std::size_t>(std::stoull(argv[1]));
  poolcast::RngStream rng(std::stoull(argv[2]));
  std::vector<double> r(n);
  double h = kOmega / (1.0 - kAlpha - kBeta);
  double prev = 0.0;
  for (std::size_t burn = 0; burn < 500 + n; ++burn) {
    h = kOmega + kAlpha * prev * prev + kBeta * h;
    const double e = std::sqrt(h) * student_t(rng);
    prev = e;
    if (burn >= 500) {
      // Round to basis points of a percent, as published return series are.
      r[burn - 500] = std::round((kMean + e) * 1e4) / 1e4;
    }
  }
  using namespace std::chrono;
  const poolcast::ObservedSeries s(r, business_days(year{1988} / January / 5, n));
  poolcast::write_csv(std::cout, s);
  return 0;
}
