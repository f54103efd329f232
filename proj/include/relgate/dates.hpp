#pragma once

#include <compare>
#include <iosfwd>
#include <string>

namespace relgate {

/// Calendar date (proleptic Gregorian). Day-granular: the whole tool operates
/// on release dates, never on times of day.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;
};

/// Throws ValidationError if the triple is not a real calendar date.
Date make_date(int year, int month, int day);

/// Accepts ISO 8601 `YYYY-MM-DD` or US-style `M/D/YYYY`. A trailing time
/// component after the date part (`2019-07-04T09:30:00Z`) is ignored.
Date parse_date(const std::string& text);

/// ISO 8601, zero-padded.
std::string to_iso_string(const Date& d);

std::ostream& operator<<(std::ostream& os, const Date& d);

bool is_weekday(const Date& d);

Date add_days(const Date& d, int days);

/// Calendar days from `a` to `b` (positive when b is later).
int days_between(const Date& a, const Date& b);

/// Number of weekdays (Mon-Fri) in the half-open interval (from, to].
/// Throws ValidationError when from >= to. May legitimately return 0 when the
/// interval covers only a weekend.
int working_days(const Date& from, const Date& to);

} // namespace relgate
