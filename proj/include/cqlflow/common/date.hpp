/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cqlflow {

// Calendar date at day resolution, stored as days since 1970-01-01.
struct Date {
  int32_t days = 0;

  friend auto operator<=>(const Date&, const Date&) = default;
  friend bool operator==(const Date&, const Date&) = default;

  static Date from_ymd(int year, unsigned month, unsigned day);
  // Accepts YYYY-MM-DD, with or without a leading '@'. Throws Error(kInvalidArgument).
  static Date parse(std::string_view text);
  static std::optional<Date> try_parse(std::string_view text);

  int year() const;
  unsigned month() const;
  unsigned day() const;
  std::string to_string() const;

  Date plus_days(int32_t n) const { return Date{days + n}; }
  // Same month/day `n` years later; Feb 29 maps to Mar 1 in non-leap years.
  Date plus_years(int n) const;
};

// Closed on both ends.
struct DateInterval {
  Date start;
  Date end;

  friend bool operator==(const DateInterval&, const DateInterval&) = default;

  bool contains(Date d) const { return start <= d && d <= end; }
  bool includes(const DateInterval& other) const {
    return start <= other.start && other.end <= end;
  }
  int32_t length_days() const { return end.days - start.days + 1; }
};

// Whole years completed between `birth` and `as_of`.
int age_in_years(Date birth, Date as_of);

}  // namespace cqlflow
