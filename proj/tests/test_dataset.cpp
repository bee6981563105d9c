// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <set>

#include "aqop_doctest.h"

#include "aqop/dataset.hpp"
#include "aqop/types.hpp"

using aqop::AQObservation;
using aqop::CloudFilterConfig;
using aqop::Date;
using aqop::MetVector;
using aqop::SceneMeta;

TEST_CASE("outlier filter drops only measures strictly above threshold") {
  AQObservation aq;
  aq.pm10 = 50.0;
  aq.op_aa = 6.0;
  aq.op_dtt = 5.0;
  auto kept = aqop::apply_outlier_filter(aq);
  CHECK(kept.pm10.has_value());
  CHECK(kept.op_aa.has_value());
  CHECK(kept.op_dtt.has_value());

  aq.pm10 = 50.0001;
  aq.op_aa = 6.0001;
  aq.op_dtt = 5.0001;
  auto dropped = aqop::apply_outlier_filter(aq);
  CHECK_FALSE(dropped.pm10.has_value());
  CHECK_FALSE(dropped.op_aa.has_value());
  CHECK_FALSE(dropped.op_dtt.has_value());

  AQObservation mixed;
  mixed.pm10 = 80.0;
  mixed.op_aa = 1.0;
  auto m = aqop::apply_outlier_filter(mixed);
  CHECK_FALSE(m.pm10.has_value());
  CHECK(*m.op_aa == 1.0);
}

namespace {

SceneMeta scene(double cover, double cloud, double q05, double q50, double q95,
                const std::string& date = "2020-06-01", const std::string& station = "UB",
                const std::string& instrument = "PS2") {
  SceneMeta s;
  s.station_id = station;
  s.date = Date::parse(date);
  s.instrument = instrument;
  s.cover = cover;
  s.cloud_cover = cloud;
  s.green_q05 = q05;
  s.green_q50 = q50;
  s.green_q95 = q95;
  return s;
}

CloudFilterConfig test_filter() {
  CloudFilterConfig c;
  c.clear_exclusions = {{Date::parse("2021-01-07"), "", ""},
                        {Date::parse("2019-12-06"), "UC", ""},
                        {Date::parse("2020-05-10"), "", "PS2"},
                        {Date::parse("2021-08-12"), "UC", "PS2"}};
  c.partial_allow_dates = {Date::parse("2018-05-05"), Date::parse("2020-01-13")};
  return c;
}

}  // namespace

TEST_CASE("cloud filter branch logic") {
  const auto c = test_filter();

  CHECK(aqop::apply_cloud_filter(scene(1.0, 0.0, 0.10, 0.2, 0.3), c));
  CHECK_FALSE(aqop::apply_cloud_filter(scene(1.0, 0.0, 0.25, 0.2, 0.3), c));

  SUBCASE("exclusions") {
    CHECK_FALSE(aqop::apply_cloud_filter(scene(1.0, 0.0, 0.1, 0.2, 0.3, "2021-01-07"), c));
    CHECK_FALSE(
        aqop::apply_cloud_filter(scene(1.0, 0.0, 0.1, 0.2, 0.3, "2019-12-06", "UC"), c));
    CHECK(aqop::apply_cloud_filter(scene(1.0, 0.0, 0.1, 0.2, 0.3, "2019-12-06", "SU"), c));
    CHECK_FALSE(aqop::apply_cloud_filter(
        scene(1.0, 0.0, 0.1, 0.2, 0.3, "2020-05-10", "UB", "PS2"), c));
    CHECK(aqop::apply_cloud_filter(
        scene(1.0, 0.0, 0.1, 0.2, 0.3, "2020-05-10", "UB", "PSB.SD"), c));
    CHECK_FALSE(aqop::apply_cloud_filter(
        scene(1.0, 0.0, 0.1, 0.2, 0.3, "2021-08-12", "UC", "PS2"), c));
    CHECK(aqop::apply_cloud_filter(
        scene(1.0, 0.0, 0.1, 0.2, 0.3, "2021-08-12", "UB", "PS2"), c));
  }

  SUBCASE("partial cloud requires the allow list and quantile bounds") {
    CHECK(aqop::apply_cloud_filter(scene(1.0, 0.4, 0.1, 0.2, 0.45, "2018-05-05"), c));
    CHECK_FALSE(aqop::apply_cloud_filter(scene(1.0, 0.4, 0.1, 0.2, 0.45, "2018-05-06"), c));
    CHECK_FALSE(aqop::apply_cloud_filter(scene(1.0, 0.4, 0.1, 0.27, 0.45, "2018-05-05"), c));
    CHECK_FALSE(aqop::apply_cloud_filter(scene(1.0, 0.4, 0.1, 0.2, 0.55, "2018-05-05"), c));
    CHECK_FALSE(aqop::apply_cloud_filter(scene(1.0, 1.0, 0.1, 0.2, 0.45, "2018-05-05"), c));
  }

  SUBCASE("partial coverage branch") {
    CHECK(aqop::apply_cloud_filter(scene(0.8, 0.9, 0.5, 0.5, 0.20), c));
    CHECK_FALSE(aqop::apply_cloud_filter(scene(0.8, 0.9, 0.5, 0.5, 0.21), c));
    CHECK_FALSE(aqop::apply_cloud_filter(scene(0.7, 0.9, 0.5, 0.5, 0.20), c));
    CHECK_FALSE(aqop::apply_cloud_filter(scene(0.6, 0.9, 0.5, 0.5, 0.15), c));
  }

  SUBCASE("missing quantiles reject with a diagnostic") {
    auto s = scene(1.0, 0.0, 0.1, 0.2, 0.3);
    s.green_q50.reset();
    std::string why;
    CHECK_FALSE(aqop::apply_cloud_filter(s, c, &why));
    CHECK(why.find("quantile") != std::string::npos);
  }
}

TEST_CASE("cloud filter config round trips through JSON") {
  const auto path = (std::filesystem::temp_directory_path() / "aqop_filter.json").string();
  auto c = test_filter();
  c.partial_cover_green_q95_max = 0.19;
  c.save(path);
  auto back = CloudFilterConfig::load(path);
  CHECK(back.partial_cover_green_q95_max == 0.19);
  CHECK(back.clear_exclusions.size() == 4);
  CHECK(back.partial_allow_dates == c.partial_allow_dates);
  CHECK(back.clear_exclusions[1].station_id == "UC");
  std::filesystem::remove(path);
}

TEST_CASE("met aggregation needs all 24 hours") {
  std::vector<MetVector> hourly;
  for (int h = 0; h < 24; ++h) hourly.push_back({double(h), 1, 2, 3, 4, 5});
  const auto mean = aqop::aggregate_met(hourly);
  CHECK(mean.t2m == doctest::Approx(11.5));
  CHECK(mean.rh == doctest::Approx(1.0));
  hourly.pop_back();
  CHECK_THROWS_AS(aqop::aggregate_met(hourly), aqop::Error);
  CHECK(aqop::met_day_complete(24));
  CHECK_FALSE(aqop::met_day_complete(23));
  CHECK_FALSE(aqop::met_day_complete(25));
}

TEST_CASE("bilinear interpolation matches the closed form") {
  // f(x, y) = 2 + 3x - y + 0.5xy is exactly reproduced by bilinear
  // interpolation from its corner values.
  auto f = [](double x, double y) { return 2 + 3 * x - y + 0.5 * x * y; };
  const double x0 = 1, x1 = 3, y0 = 10, y1 = 14;
  for (double x : {1.0, 1.7, 2.9}) {
    for (double y : {10.0, 11.3, 14.0}) {
      const double got = aqop::bilinear_interpolate(x0, y0, x1, y1, f(x0, y0), f(x1, y0),
                                                    f(x0, y1), f(x1, y1), x, y);
      CHECK(got == doctest::Approx(f(x, y)).epsilon(1e-12));
    }
  }
  CHECK(aqop::bilinear_interpolate(0, 0, 1, 1, 1, 2, 3, 4, 0.5, 0.5) == doctest::Approx(2.5));
  CHECK_THROWS_AS(aqop::bilinear_interpolate(0, 0, 1, 1, 1, 2, 3, 4, 1.5, 0.5), aqop::Error);
}

TEST_CASE("split sizes use floor for val and test") {
  std::set<Date> dates;
  for (int i = 0; i < 11; ++i) dates.insert(Date{2020, 1, 1}.plus_days(i));
  const auto s = aqop::assign_splits(dates, {0.6, 0.2, 0.2}, 7);
  int n_train = 0, n_val = 0, n_test = 0;
  for (const auto& [d, split] : s.by_date) {
    if (split == aqop::Split::Train) ++n_train;
    if (split == aqop::Split::Val) ++n_val;
    if (split == aqop::Split::Test) ++n_test;
  }
  // floor(0.2 * 11) = 2 for val and test, remainder 7 to train.
  CHECK(n_val == 2);
  CHECK(n_test == 2);
  CHECK(n_train == 7);
}

TEST_CASE("split assignment is deterministic and exhaustive") {
  std::set<Date> dates;
  for (int i = 0; i < 200; ++i) dates.insert(Date{2019, 1, 1}.plus_days(2 * i));
  const auto a = aqop::assign_splits(dates, {0.6, 0.2, 0.2}, 11);
  const auto b = aqop::assign_splits(dates, {0.6, 0.2, 0.2}, 11);
  CHECK(a.by_date == b.by_date);
  for (const auto& d : dates) CHECK(a.contains(d));
  CHECK(a.by_date.size() == dates.size());

  const auto c = aqop::assign_splits(dates, {0.6, 0.2, 0.2}, 12);
  CHECK(a.by_date != c.by_date);
}

TEST_CASE("norm stats from a hand-computed pair of scenes") {
  aqop::ScenePatch p1, p2;
  p1.image_type = p2.image_type = aqop::ImageType::RGB;
  p1.bands = torch::full({3, 4, 4}, 2.0f);
  p2.bands = torch::full({3, 4, 4}, 4.0f);
  p2.bands[1] = torch::full({4, 4}, 8.0f);

  const auto stats = aqop::compute_norm_stats({&p1, &p2}, aqop::ImageType::RGB);
  // Channel 0: values {2, 4} -> mean 3, population std 1.
  CHECK(stats.mean[0] == doctest::Approx(3.0));
  CHECK(stats.std[0] == doctest::Approx(1.0));
  // Channel 1: values {2, 8} -> mean 5, population std 3.
  CHECK(stats.mean[1] == doctest::Approx(5.0));
  CHECK(stats.std[1] == doctest::Approx(3.0));

  SUBCASE("normalize and denormalize invert") {
    auto n = aqop::normalize(p2, stats);
    CHECK(n.bands[0][0][0].item<float>() == doctest::Approx(1.0f));
    auto back = aqop::denormalize(n, stats);
    CHECK(torch::allclose(back.bands, p2.bands, 1e-5, 1e-5));
  }
  SUBCASE("zero variance channel is an error") {
    aqop::ScenePatch q1 = p1, q2 = p1;
    q2.bands = p1.bands.clone();
    CHECK_THROWS_AS(aqop::compute_norm_stats({&q1, &q2}, aqop::ImageType::RGB), aqop::Error);
  }
  SUBCASE("one scene is not enough") {
    CHECK_THROWS_AS(aqop::compute_norm_stats({&p1}, aqop::ImageType::RGB), aqop::Error);
  }
}

TEST_CASE("scene dedup prefers low cloud then late acquisition") {
  auto a = scene(1.0, 0.2, .1, .1, .1);
  a.acquired = "10:00:00";
  auto b = scene(1.0, 0.1, .1, .1, .1);
  b.acquired = "09:00:00";
  auto c = scene(1.0, 0.1, .1, .1, .1);
  c.acquired = "11:00:00";
  auto other = scene(1.0, 0.9, .1, .1, .1, "2020-06-02");

  const auto kept = aqop::dedup_scenes({a, b, c, other});
  REQUIRE(kept.size() == 2);
  bool found = false;
  for (const auto& s : kept) {
    if (s.date == a.date) {
      CHECK(s.cloud_cover == doctest::Approx(0.1));
      CHECK(s.acquired == "11:00:00");
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("record join requires met, tolerates missing scene and aq") {
  const Date d1 = Date::parse("2020-06-01");
  const Date d2 = Date::parse("2020-06-02");
  std::vector<std::pair<std::pair<std::string, Date>, MetVector>> met = {
      {{"UB", d1}, {1, 2, 3, 4, 5, 6}},
      {{"UB", d2}, {2, 2, 3, 4, 5, 6}},
  };
  AQObservation aq;
  aq.station_id = "UB";
  aq.date = d1;
  aq.pm10 = 15;
  auto s1 = scene(1.0, 0.0, .1, .1, .1, "2020-06-01");
  auto orphan = scene(1.0, 0.0, .1, .1, .1, "2020-06-03");

  const auto recs = aqop::build_records({s1, orphan}, met, {aq});
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].scene.has_value());
  CHECK(recs[0].aq.has_value());
  CHECK_FALSE(recs[1].scene.has_value());
  CHECK_FALSE(recs[1].aq.has_value());

  SUBCASE("duplicate met rows are an error") {
    met.push_back({{"UB", d1}, {9, 9, 9, 9, 9, 9}});
    CHECK_THROWS_AS(aqop::build_records({}, met, {}), aqop::Error);
  }
}
