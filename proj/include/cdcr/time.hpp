#pragma once

// UTC timestamps, calendar dates, and ISO-8601 week numbering.

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "cdcr/errors.hpp"

namespace cdcr {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

struct IsoWeek {
  int year = 0;
  unsigned week = 0;
  friend bool operator==(const IsoWeek&, const IsoWeek&) = default;
  friend auto operator<=>(const IsoWeek&, const IsoWeek&) = default;
};

inline Date make_date(int y, unsigned m, unsigned d) {
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::format, "invalid calendar date");
  return Date{ymd};
}

inline Timestamp make_timestamp(int y, unsigned m, unsigned d, int hh = 0, int mm = 0, int ss = 0) {
  return Timestamp{make_date(y, m, d)} + std::chrono::hours{hh} + std::chrono::minutes{mm} +
         std::chrono::seconds{ss};
}

inline Date parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  std::string buf(s);
  if (std::sscanf(buf.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw Error(ErrorCode::format, "expected YYYY-MM-DD date, got '" + buf + "'");
  }
  return make_date(y, m, d);
}

inline std::string format_date(Date date) {
  std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

// Accepts "YYYY-MM-DDTHH:MM:SSZ" (the only form the workbench writes).
inline Timestamp parse_timestamp(std::string_view s) {
  int y = 0, hh = 0, mm = 0, ss = 0;
  unsigned mo = 0, d = 0;
  std::string buf(s);
  char z = 0;
  if (std::sscanf(buf.c_str(), "%d-%u-%uT%d:%d:%d%c", &y, &mo, &d, &hh, &mm, &ss, &z) != 7 ||
      z != 'Z' || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) {
    throw Error(ErrorCode::format, "expected YYYY-MM-DDTHH:MM:SSZ timestamp, got '" + buf + "'");
  }
  return make_timestamp(y, mo, d, hh, mm, ss);
}

inline std::string format_timestamp(Timestamp t) {
  auto day = std::chrono::floor<std::chrono::days>(t);
  std::chrono::hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(day).c_str(),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline IsoWeek iso_week(Date date) {
  using namespace std::chrono;
  // The ISO week belongs to the year that contains its Thursday.
  unsigned iso_dow = weekday{date}.iso_encoding();  // Mon=1 .. Sun=7
  sys_days thursday = date + days{4 - static_cast<int>(iso_dow)};
  year_month_day thu_ymd{thursday};
  sys_days jan1 = sys_days{thu_ymd.year() / January / 1};
  auto ordinal = (thursday - jan1).count();
  return {static_cast<int>(thu_ymd.year()), static_cast<unsigned>(ordinal / 7 + 1)};
}

inline IsoWeek iso_week(Timestamp t) { return iso_week(std::chrono::floor<std::chrono::days>(t)); }

inline Timestamp now_utc() {
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

}  // namespace cdcr
