// Apache License, Version 2.0, refer to LICENSE.txt

#include "geotopics/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "geotopics/rng.hpp"

namespace geotopics {

using nlohmann::json;

int FeatureDomains::feature_index(const std::string& name) const {
  for (int i = 0; i < count(); ++i) {
    if (features[static_cast<std::size_t>(i)].name == name) return i;
  }
  throw DomainError("unknown feature: " + name);
}

// --- timestamps -------------------------------------------------------------

namespace {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool parse_fixed_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::int64_t parse_rfc3339(const std::string& text) {
  // YYYY-MM-DDTHH:MM:SS[.frac](Z|±hh:mm)
  int y, mo, d, h, mi, s;
  if (!parse_fixed_int(text, 0, 4, y) || text.size() < 20 || text[4] != '-' ||
      !parse_fixed_int(text, 5, 2, mo) || text[7] != '-' ||
      !parse_fixed_int(text, 8, 2, d) || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      !parse_fixed_int(text, 11, 2, h) || text[13] != ':' ||
      !parse_fixed_int(text, 14, 2, mi) || text[16] != ':' ||
      !parse_fixed_int(text, 17, 2, s)) {
    throw FormatError("bad RFC 3339 timestamp: " + text);
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) {
    throw FormatError("bad RFC 3339 timestamp: " + text);
  }
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  }
  if (pos >= text.size()) throw FormatError("missing timezone in timestamp: " + text);
  std::int64_t tz = 0;
  const char c = text[pos];
  if (c == 'Z' || c == 'z') {
    ++pos;
  } else if (c == '+' || c == '-') {
    int th, tm;
    if (!parse_fixed_int(text, pos + 1, 2, th) || text[pos + 3] != ':' ||
        !parse_fixed_int(text, pos + 4, 2, tm)) {
      throw FormatError("bad timezone in timestamp: " + text);
    }
    tz = (th * 3600 + tm * 60) * (c == '+' ? 1 : -1);
    pos += 6;
  } else {
    throw FormatError("bad timezone in timestamp: " + text);
  }
  if (pos != text.size()) throw FormatError("trailing characters in timestamp: " + text);
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s - tz;
}

std::string format_rfc3339(std::int64_t unix_seconds) {
  const std::int64_t days = floor_div(unix_seconds, 86400);
  std::int64_t rem = unix_seconds - days * 86400;
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                static_cast<int>(rem % 60));
  return buf;
}

DayTimeBin bin_timestamp(std::int64_t timestamp, int utc_offset_minutes) {
  const std::int64_t local = timestamp + static_cast<std::int64_t>(utc_offset_minutes) * 60;
  const std::int64_t days = floor_div(local, 86400);
  const int hour = static_cast<int>((local - days * 86400) / 3600);
  // 1970-01-01 was a Thursday; Monday = 0.
  const int dow = static_cast<int>(((days % 7) + 7 + 3) % 7);
  int tod;
  if (hour >= 6 && hour < 10) {
    tod = 0;  // morning
  } else if (hour >= 10 && hour < 14) {
    tod = 1;  // noon
  } else if (hour >= 14 && hour < 18) {
    tod = 2;  // afternoon
  } else if (hour >= 18 && hour < 22) {
    tod = 3;  // evening
  } else if (hour >= 22 || hour < 2) {
    tod = 4;  // night
  } else {
    tod = 5;  // late_night
  }
  return {dow, tod};
}

// --- parsing ----------------------------------------------------------------

ParseResult parse_checkins(std::istream& in) {
  if (!in.good()) throw IoError("parse_checkins: unreadable stream");
  ParseResult result;
  std::string line;
  std::size_t content_lines = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    ++content_lines;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      ++result.malformed_lines;
      continue;
    }
    try {
      CheckinRecord rec;
      rec.user_id = obj.at("user").get<std::string>();
      rec.venue_id = obj.at("venue").get<std::string>();
      rec.latitude = obj.at("lat").get<double>();
      rec.longitude = obj.at("lon").get<double>();
      rec.category = obj.at("category").get<std::string>();
      rec.timestamp = parse_rfc3339(obj.at("time").get<std::string>());
      rec.utc_offset_minutes = obj.at("utc_offset_min").get<int>();
      if (rec.user_id.empty() || rec.venue_id.empty() || rec.category.empty() ||
          rec.latitude < -90.0 || rec.latitude > 90.0 || rec.longitude < -180.0 ||
          rec.longitude > 180.0) {
        ++result.malformed_lines;
        continue;
      }
      result.records.push_back(std::move(rec));
    } catch (const json::exception&) {
      ++result.malformed_lines;
    } catch (const FormatError&) {
      ++result.malformed_lines;
    }
  }
  if (in.bad()) throw IoError("parse_checkins: stream read failed");
  if (content_lines > 0 && result.malformed_lines * 2 > content_lines) {
    throw FormatError("parse_checkins: more than half of the lines are malformed");
  }
  return result;
}

std::vector<CheckinRecord> filter_low_activity_users(
    const std::vector<CheckinRecord>& records, int min_distinct_venues) {
  std::unordered_map<std::string, std::unordered_set<std::string>> venues_of_user;
  for (const auto& r : records) venues_of_user[r.user_id].insert(r.venue_id);
  std::vector<CheckinRecord> kept;
  kept.reserve(records.size());
  for (const auto& r : records) {
    if (static_cast<int>(venues_of_user[r.user_id].size()) >= min_distinct_venues) {
      kept.push_back(r);
    }
  }
  return kept;
}

namespace {

void add_count(SparseCounts& c, int index, double amount) {
  auto it = std::lower_bound(c.begin(), c.end(), index,
                             [](const auto& p, int j) { return p.first < j; });
  if (it != c.end() && it->first == index) {
    it->second += amount;
  } else {
    c.insert(it, {index, amount});
  }
}

}  // namespace

Dataset aggregate_venues(const std::vector<CheckinRecord>& records) {
  // Deterministic venue order: sorted by venue_id.
  std::map<std::string, std::vector<std::size_t>> by_venue;
  for (std::size_t i = 0; i < records.size(); ++i) by_venue[records[i].venue_id].push_back(i);

  std::set<std::string> category_labels;
  std::set<std::string> user_labels;
  for (const auto& r : records) {
    category_labels.insert(r.category);
    user_labels.insert(r.user_id);
  }

  Dataset ds;
  ds.domains.features.resize(kNumFeatures);
  ds.domains.features[kFeatureCategory].name = "category";
  ds.domains.features[kFeatureCategory].labels.assign(category_labels.begin(),
                                                      category_labels.end());
  ds.domains.features[kFeatureUsers].name = "users";
  ds.domains.features[kFeatureUsers].labels.assign(user_labels.begin(), user_labels.end());
  ds.domains.features[kFeatureTimeOfDay].name = "time_of_day";
  ds.domains.features[kFeatureTimeOfDay].labels.assign(kTimeOfDayLabels.begin(),
                                                       kTimeOfDayLabels.end());
  ds.domains.features[kFeatureDayOfWeek].name = "day_of_week";
  ds.domains.features[kFeatureDayOfWeek].labels.assign(kDayOfWeekLabels.begin(),
                                                       kDayOfWeekLabels.end());

  std::unordered_map<std::string, int> category_index;
  for (int i = 0; i < ds.domains.at(kFeatureCategory).size(); ++i) {
    category_index[ds.domains.at(kFeatureCategory).labels[static_cast<std::size_t>(i)]] = i;
  }
  std::unordered_map<std::string, int> user_index;
  for (int i = 0; i < ds.domains.at(kFeatureUsers).size(); ++i) {
    user_index[ds.domains.at(kFeatureUsers).labels[static_cast<std::size_t>(i)]] = i;
  }

  ds.venues.reserve(by_venue.size());
  for (const auto& [venue_id, idxs] : by_venue) {
    Venue v;
    v.venue_id = venue_id;
    v.counts.resize(kNumFeatures);
    v.total_checkins = static_cast<double>(idxs.size());

    // Location: records must agree within 1e-6 degrees, else take the most
    // recent record's coordinate.
    bool agree = true;
    const auto& first = records[idxs.front()];
    std::size_t latest = idxs.front();
    for (std::size_t i : idxs) {
      const auto& r = records[i];
      if (std::abs(r.longitude - first.longitude) > 1e-6 ||
          std::abs(r.latitude - first.latitude) > 1e-6) {
        agree = false;
      }
      if (r.timestamp >= records[latest].timestamp) latest = i;
    }
    const auto& loc_rec = agree ? first : records[latest];
    v.location = {loc_rec.longitude, loc_rec.latitude};

    // Category: majority, ties broken lexicographically.
    std::map<std::string, int> cat_votes;
    for (std::size_t i : idxs) cat_votes[records[i].category]++;
    std::string best_cat;
    int best_votes = -1;
    for (const auto& [cat, votes] : cat_votes) {
      if (votes > best_votes) {
        best_cat = cat;
        best_votes = votes;
      }
    }
    v.category_index = category_index.at(best_cat);
    v.counts[kFeatureCategory] = {{v.category_index, 1.0}};

    for (std::size_t i : idxs) {
      const auto& r = records[i];
      add_count(v.counts[kFeatureUsers], user_index.at(r.user_id), 1.0);
      const DayTimeBin bin = bin_timestamp(r.timestamp, r.utc_offset_minutes);
      add_count(v.counts[kFeatureTimeOfDay], bin.time_of_day, 1.0);
      add_count(v.counts[kFeatureDayOfWeek], bin.day_of_week, 1.0);
    }
    ds.venues.push_back(std::move(v));
  }
  return ds;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction,
                                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("split_train_test: train_fraction must be in (0, 1)");
  }
  if (ds.size() < 2) throw DomainError("split_train_test: need at least 2 venues");

  std::vector<std::size_t> order(ds.venues.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t train_size =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.size())));
  Dataset train, test;
  train.domains = ds.domains;
  test.domains = ds.domains;
  train.user_grouping = ds.user_grouping;
  test.user_grouping = ds.user_grouping;
  train.user_grouping_d = ds.user_grouping_d;
  test.user_grouping_d = ds.user_grouping_d;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_size ? train : test).venues.push_back(ds.venues[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

// --- dataset file -----------------------------------------------------------

namespace {

json counts_to_json(const SparseCounts& c) {
  json arr = json::array();
  for (const auto& [j, n] : c) arr.push_back(json::array({j, n}));
  return arr;
}

SparseCounts counts_from_json(const json& arr) {
  SparseCounts c;
  for (const auto& e : arr) {
    c.emplace_back(e.at(0).get<int>(), e.at(1).get<double>());
  }
  std::sort(c.begin(), c.end());
  return c;
}

}  // namespace

void validate_dataset(const Dataset& ds) {
  if (ds.domains.count() != kNumFeatures) {
    throw FormatError("dataset: expected " + std::to_string(kNumFeatures) + " features");
  }
  for (const auto& v : ds.venues) {
    if (v.counts.size() != static_cast<std::size_t>(kNumFeatures)) {
      throw FormatError("dataset: venue " + v.venue_id + " has wrong count arity");
    }
    const auto& cat = v.counts[kFeatureCategory];
    if (cat.size() != 1 || cat[0].second != 1.0 || cat[0].first != v.category_index) {
      throw FormatError("dataset: venue " + v.venue_id + " category counts must be one entry of 1");
    }
    for (int i = 0; i < kNumFeatures; ++i) {
      for (const auto& [j, n] : v.counts[static_cast<std::size_t>(i)]) {
        if (j < 0 || j >= ds.domains.at(i).size()) {
          throw FormatError("dataset: venue " + v.venue_id + " has out-of-domain index");
        }
        if (n < 0.0) throw FormatError("dataset: negative count");
      }
    }
  }
}

void save_dataset(const Dataset& ds, const std::string& path) {
  json doc;
  doc["format"] = "geotopics-dataset";
  doc["version"] = 1;
  doc["features"] = json::array();
  for (const auto& f : ds.domains.features) {
    doc["features"].push_back({{"name", f.name}, {"labels", f.labels}});
  }
  doc["venues"] = json::array();
  for (const auto& v : ds.venues) {
    json jv;
    jv["id"] = v.venue_id;
    jv["x"] = v.location[0];
    jv["y"] = v.location[1];
    jv["category"] = v.category_index;
    jv["total"] = v.total_checkins;
    json counts = json::array();
    for (const auto& c : v.counts) counts.push_back(counts_to_json(c));
    jv["counts"] = std::move(counts);
    doc["venues"].push_back(std::move(jv));
  }
  if (ds.user_grouping.has_value()) {
    doc["user_grouping"] = {{"d", ds.user_grouping_d}, {"assignment", *ds.user_grouping}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << doc.dump(1) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError("dataset file is not valid JSON: " + path);
  try {
    if (doc.at("format").get<std::string>() != "geotopics-dataset") {
      throw FormatError("not a geotopics dataset file: " + path);
    }
    if (doc.at("version").get<int>() != 1) {
      throw FormatError("unsupported dataset version in " + path);
    }
    Dataset ds;
    for (const auto& f : doc.at("features")) {
      FeatureDomain fd;
      fd.name = f.at("name").get<std::string>();
      fd.labels = f.at("labels").get<std::vector<std::string>>();
      ds.domains.features.push_back(std::move(fd));
    }
    for (const auto& jv : doc.at("venues")) {
      Venue v;
      v.venue_id = jv.at("id").get<std::string>();
      v.location = {jv.at("x").get<double>(), jv.at("y").get<double>()};
      v.category_index = jv.at("category").get<int>();
      v.total_checkins = jv.at("total").get<double>();
      for (const auto& c : jv.at("counts")) v.counts.push_back(counts_from_json(c));
      ds.venues.push_back(std::move(v));
    }
    if (doc.contains("user_grouping")) {
      ds.user_grouping_d = doc["user_grouping"].at("d").get<int>();
      ds.user_grouping = doc["user_grouping"].at("assignment").get<std::vector<int>>();
    }
    validate_dataset(ds);
    return ds;
  } catch (const json::exception& e) {
    throw FormatError("dataset schema violation in " + path + ": " + e.what());
  }
}

}  // namespace geotopics
