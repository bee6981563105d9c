// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/types.hpp"

#include <algorithm>
#include <cstdio>

namespace aqop {

// Civil-from-days / days-from-civil (Howard Hinnant's algorithms).
std::int64_t Date::to_days() const {
  int y = year;
  const int m = month;
  const int d = day;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date Date::from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

namespace {

bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return kDays[month - 1];
}

}  // namespace

Date Date::parse(const std::string& iso) {
  Date d;
  if (std::sscanf(iso.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3 ||
      d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
    throw Error("invalid ISO date: '" + iso + "'");
  }
  return d;
}

std::string Date::str() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

ImageType parse_image_type(const std::string& s) {
  if (s == "RGB") return ImageType::RGB;
  if (s == "TOAR") return ImageType::TOAR;
  throw Error("unknown image type: '" + s + "'");
}

std::string to_string(ImageType t) { return t == ImageType::RGB ? "RGB" : "TOAR"; }

const std::array<std::string, MetVector::kDim>& MetVector::names() {
  static const std::array<std::string, kDim> n = {"t2m", "rh",     "sp",
                                                  "wind_u", "wind_v", "blh"};
  return n;
}

void ScenePatch::validate() const {
  if (bands.dim() != 3) throw Error("scene bands must be CxHxW");
  const auto c = bands.size(0);
  if (bands.size(1) != kPatchSize || bands.size(2) != kPatchSize) {
    throw Error("scene patch must be " + std::to_string(kPatchSize) + "x" +
                std::to_string(kPatchSize));
  }
  if (c != channel_count(image_type)) {
    throw Error("scene channel count " + std::to_string(c) + " does not match image type " +
                to_string(image_type));
  }
  if (!bands.isfinite().all().item<bool>()) throw Error("scene contains non-finite values");
  if (image_type == ImageType::TOAR && bands.min().item<float>() < 0.f) {
    throw Error("TOAR reflectance values must be >= 0");
  }
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split SplitAssignment::at(const Date& d) const {
  auto it = std::lower_bound(by_date.begin(), by_date.end(), d,
                             [](const auto& p, const Date& x) { return p.first < x; });
  if (it == by_date.end() || it->first != d) throw Error("date " + d.str() + " not in split");
  return it->second;
}

bool SplitAssignment::contains(const Date& d) const {
  auto it = std::lower_bound(by_date.begin(), by_date.end(), d,
                             [](const auto& p, const Date& x) { return p.first < x; });
  return it != by_date.end() && it->first == d;
}

Target parse_target(const std::string& s) {
  if (s == "pm10") return Target::PM10;
  if (s == "op_aa") return Target::OpAA;
  if (s == "op_dtt") return Target::OpDTT;
  throw Error("unknown target: '" + s + "'");
}

std::string to_string(Target t) {
  switch (t) {
    case Target::PM10: return "pm10";
    case Target::OpAA: return "op_aa";
    case Target::OpDTT: return "op_dtt";
  }
  return "?";
}

std::optional<double> target_value(const AQObservation& aq, Target t) {
  switch (t) {
    case Target::PM10: return aq.pm10;
    case Target::OpAA: return aq.op_aa;
    case Target::OpDTT: return aq.op_dtt;
  }
  return std::nullopt;
}

}  // namespace aqop
