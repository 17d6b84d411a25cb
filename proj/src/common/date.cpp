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
#include "cqlflow/common/date.hpp"

#include <charconv>
#include <chrono>

#include "cqlflow/common/error.hpp"

namespace cqlflow {

namespace {

namespace chr = std::chrono;

chr::year_month_day to_ymd(Date d) {
  return chr::year_month_day{chr::sys_days{chr::days{d.days}}};
}

Date from_sys_days(chr::sys_days sd) {
  return Date{static_cast<int32_t>(sd.time_since_epoch().count())};
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) {
    throw Error(ErrorCode::kInvalidArgument, std::to_string(year) + "-" +
                                                 std::to_string(month) + "-" +
                                                 std::to_string(day),
                "invalid calendar date");
  }
  return from_sys_days(chr::sys_days{ymd});
}

std::optional<Date> Date::try_parse(std::string_view text) {
  if (!text.empty() && text.front() == '@') text.remove_prefix(1);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse = [](std::string_view s, auto& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
  };
  if (!parse(text.substr(0, 4), y) || !parse(text.substr(5, 2), m) ||
      !parse(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return from_sys_days(chr::sys_days{ymd});
}

Date Date::parse(std::string_view text) {
  auto d = try_parse(text);
  if (!d) throw Error(ErrorCode::kInvalidArgument, std::string(text), "invalid date '" + std::string(text) + "'");
  return *d;
}

int Date::year() const { return static_cast<int>(to_ymd(*this).year()); }
unsigned Date::month() const { return static_cast<unsigned>(to_ymd(*this).month()); }
unsigned Date::day() const { return static_cast<unsigned>(to_ymd(*this).day()); }

std::string Date::to_string() const {
  auto ymd = to_ymd(*this);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date Date::plus_years(int n) const {
  auto ymd = to_ymd(*this);
  chr::year_month_day shifted = ymd + chr::years{n};
  if (!shifted.ok()) {
    // Only Feb 29 can land on an invalid day.
    shifted = chr::year_month_day{shifted.year(), chr::March, chr::day{1}};
  }
  return from_sys_days(chr::sys_days{shifted});
}

int age_in_years(Date birth, Date as_of) {
  auto b = to_ymd(birth);
  auto a = to_ymd(as_of);
  int years = static_cast<int>(a.year()) - static_cast<int>(b.year());
  auto md = [](const chr::year_month_day& x) {
    return static_cast<unsigned>(x.month()) * 100 + static_cast<unsigned>(x.day());
  };
  if (md(a) < md(b)) --years;
  return years;
}

}  // namespace cqlflow
