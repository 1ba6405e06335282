// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_DATA_HPP
#define GEOTOPICS_DATA_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geotopics/common.hpp"

namespace geotopics {

// One raw check-in line. Timestamps are unix seconds (UTC).
struct CheckinRecord {
  std::string user_id;
  std::string venue_id;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string category;
  std::int64_t timestamp = 0;
  int utc_offset_minutes = 0;
};

// Canonical categorical feature order used throughout.
inline constexpr int kFeatureCategory = 0;
inline constexpr int kFeatureUsers = 1;
inline constexpr int kFeatureTimeOfDay = 2;
inline constexpr int kFeatureDayOfWeek = 3;
inline constexpr int kNumFeatures = 4;

inline constexpr std::array<const char*, 6> kTimeOfDayLabels = {
    "morning", "noon", "afternoon", "evening", "night", "late_night"};
inline constexpr std::array<const char*, 7> kDayOfWeekLabels = {
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};

struct FeatureDomain {
  std::string name;
  std::vector<std::string> labels;
  int size() const { return static_cast<int>(labels.size()); }
};

struct FeatureDomains {
  std::vector<FeatureDomain> features;

  int count() const { return static_cast<int>(features.size()); }
  int feature_index(const std::string& name) const;
  const FeatureDomain& at(int i) const { return features.at(static_cast<std::size_t>(i)); }
};

// Sparse value->count vector, sorted by value index.
using SparseCounts = std::vector<std::pair<int, double>>;

inline double counts_total(const SparseCounts& c) {
  double t = 0.0;
  for (const auto& [j, n] : c) t += n;
  return t;
}

struct Venue {
  std::string venue_id;
  Eigen::Vector2d location = Eigen::Vector2d::Zero();  // (x=longitude, y=latitude)
  int category_index = -1;
  std::vector<SparseCounts> counts;  // one per feature, canonical order
  double total_checkins = 0.0;
};

struct Dataset {
  std::vector<Venue> venues;
  FeatureDomains domains;
  // Optional user->super-user table, carried once a grouping has been applied.
  std::optional<std::vector<int>> user_grouping;
  int user_grouping_d = 0;

  int size() const { return static_cast<int>(venues.size()); }
};

// --- timestamp handling -----------------------------------------------------

// Accepts "YYYY-MM-DDTHH:MM:SS[.frac](Z|+hh:mm|-hh:mm)". Returns unix seconds.
std::int64_t parse_rfc3339(const std::string& text);
std::string format_rfc3339(std::int64_t unix_seconds);

// Local-time bin of a check-in: day_of_week 0..6 (Monday = 0) and
// time_of_day 0..5 in the order morning, noon, afternoon, evening, night,
// late_night. Bins are half-open on the hour: morning [6,10), noon [10,14),
// afternoon [14,18), evening [18,22), night [22,02), late_night [02,06).
// A check-in between 22:00 and 23:59 is `night` of that calendar day; one
// between 00:00 and 01:59 counts toward the day on which it occurs.
struct DayTimeBin {
  int day_of_week = 0;
  int time_of_day = 0;
};
DayTimeBin bin_timestamp(std::int64_t timestamp, int utc_offset_minutes);

// --- ingest operations ------------------------------------------------------

struct ParseResult {
  std::vector<CheckinRecord> records;
  std::size_t malformed_lines = 0;
};

// Line-delimited JSON, keys: user, venue, lat, lon, category, time (RFC 3339),
// utc_offset_min. Malformed lines are counted; more than 50% malformed means
// the file is the wrong format and throws.
ParseResult parse_checkins(std::istream& in);

// Drops every check-in of users seen at fewer than min_distinct_venues
// distinct venues. Applied once, not iterated to a fixpoint.
std::vector<CheckinRecord> filter_low_activity_users(
    const std::vector<CheckinRecord>& records, int min_distinct_venues = 5);

// One venue per distinct venue_id, with per-feature count vectors and domains
// enumerating observed category/user values (time and day domains are fixed).
Dataset aggregate_venues(const std::vector<CheckinRecord>& records);

// Random partition by seed; train size = floor(train_fraction * M). Both
// halves keep the full domains of ds.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction,
                                             std::uint64_t seed);

inline std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, std::uint64_t seed) {
  return split_train_test(ds, 0.8, seed);
}

// --- dataset file -----------------------------------------------------------

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

void validate_dataset(const Dataset& ds);

}  // namespace geotopics

#endif  // GEOTOPICS_DATA_HPP
