// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace aqop {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Calendar day. Stored as civil fields; ordering and day arithmetic go
// through the days-since-epoch conversion.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static Date parse(const std::string& iso);  // "YYYY-MM-DD"
  static Date from_days(std::int64_t days_since_epoch);
  std::int64_t to_days() const;
  Date plus_days(int n) const { return from_days(to_days() + n); }
  std::string str() const;

  auto operator<=>(const Date&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const Date& d) { return os << d.str(); }

enum class ImageType { RGB, TOAR };

inline int channel_count(ImageType t) { return t == ImageType::RGB ? 3 : 4; }
ImageType parse_image_type(const std::string& s);
std::string to_string(ImageType t);

inline constexpr int kPatchSize = 334;
inline constexpr int kFeatureDim = 2048;

// Six daily-mean meteorological covariates.
struct MetVector {
  double t2m = 0;     // 2 m air temperature
  double rh = 0;      // relative humidity
  double sp = 0;      // surface pressure
  double wind_u = 0;  // 10 m wind, U component
  double wind_v = 0;  // 10 m wind, V component
  double blh = 0;     // boundary-layer height

  static constexpr int kDim = 6;
  std::array<double, kDim> values() const { return {t2m, rh, sp, wind_u, wind_v, blh}; }
  static MetVector from_values(const std::array<double, kDim>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  static const std::array<std::string, kDim>& names();
};

struct AQObservation {
  std::string station_id;
  Date date;
  std::optional<double> pm10;    // µg/m³
  std::optional<double> op_aa;   // nmol·min⁻¹·m⁻³
  std::optional<double> op_dtt;  // nmol·min⁻¹·m⁻³

  bool empty() const { return !pm10 && !op_aa && !op_dtt; }
};

// Scene manifest row. `acquired` is the overpass acquisition time
// ("HH:MM:SS"), used to break cloud-cover ties when deduplicating.
struct SceneMeta {
  std::string station_id;
  Date date;
  ImageType image_type = ImageType::RGB;
  std::string instrument;
  double cover = 0;
  double cloud_cover = 0;
  std::optional<double> green_q05;
  std::optional<double> green_q50;
  std::optional<double> green_q95;
  std::string path;
  std::string acquired;
};

// One 334x334 image patch. `bands` is a float32 CxHxW tensor; band order is
// R,G,B for RGB and B,G,R,NIR for TOAR.
struct ScenePatch {
  std::string station_id;
  Date date;
  ImageType image_type = ImageType::RGB;
  std::string instrument;
  torch::Tensor bands;

  void validate() const;
};

struct StationDayRecord {
  std::string station_id;
  Date date;
  MetVector met;
  std::optional<SceneMeta> scene;
  std::optional<AQObservation> aq;
};

enum class Split { Train, Val, Test };
std::string to_string(Split s);
inline std::ostream& operator<<(std::ostream& os, Split s) { return os << to_string(s); }

struct SplitAssignment {
  std::vector<std::pair<Date, Split>> by_date;  // sorted by date

  Split at(const Date& d) const;
  bool contains(const Date& d) const;
};

// Per-channel normalization statistics, train split only, population std.
struct NormStats {
  ImageType image_type = ImageType::RGB;
  std::vector<double> mean;
  std::vector<double> std;
};

enum class Target { PM10, OpAA, OpDTT };
Target parse_target(const std::string& s);
std::string to_string(Target t);

std::optional<double> target_value(const AQObservation& aq, Target t);

}  // namespace aqop
