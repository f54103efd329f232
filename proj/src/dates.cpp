#include "relgate/dates.hpp"

#include "relgate/errors.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

namespace relgate {

namespace {

std::chrono::year_month_day to_ymd(const Date& d) {
    return std::chrono::year_month_day{std::chrono::year{d.year},
                                       std::chrono::month{static_cast<unsigned>(d.month)},
                                       std::chrono::day{static_cast<unsigned>(d.day)}};
}

std::chrono::sys_days to_sys_days(const Date& d) {
    return std::chrono::sys_days{to_ymd(d)};
}

Date from_sys_days(std::chrono::sys_days sd) {
    std::chrono::year_month_day ymd{sd};
    return Date{int(ymd.year()), int(unsigned(ymd.month())), int(unsigned(ymd.day()))};
}

} // namespace

Date make_date(int year, int month, int day) {
    Date d{year, month, day};
    if (!to_ymd(d).ok()) {
        throw ValidationError("invalid calendar date: " + std::to_string(year) + "-" +
                              std::to_string(month) + "-" + std::to_string(day));
    }
    return d;
}

Date parse_date(const std::string& text) {
    // Strip a time suffix if present; everything here is day-granular.
    std::string datepart = text.substr(0, text.find_first_of("T "));
    int y = 0, m = 0, d = 0;
    char trail = '\0';
    if (std::sscanf(datepart.c_str(), "%d-%d-%d%c", &y, &m, &d, &trail) == 3) {
        return make_date(y, m, d);
    }
    if (std::sscanf(datepart.c_str(), "%d/%d/%d%c", &m, &d, &y, &trail) == 3) {
        return make_date(y, m, d);
    }
    throw ParseError("unrecognized date: '" + text + "'");
}

std::string to_iso_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

std::ostream& operator<<(std::ostream& os, const Date& d) {
    return os << to_iso_string(d);
}

bool is_weekday(const Date& d) {
    std::chrono::weekday wd{to_sys_days(d)};
    unsigned iso = wd.iso_encoding(); // Mon=1 .. Sun=7
    return iso <= 5;
}

Date add_days(const Date& d, int days) {
    return from_sys_days(to_sys_days(d) + std::chrono::days{days});
}

int days_between(const Date& a, const Date& b) {
    return int((to_sys_days(b) - to_sys_days(a)).count());
}

int working_days(const Date& from, const Date& to) {
    if (from >= to) {
        throw ValidationError("working_days: interval start " + to_iso_string(from) +
                              " must precede end " + to_iso_string(to));
    }
    // Weekdays in the closed range [from+1, to], counted arithmetically.
    std::chrono::sys_days first = to_sys_days(from) + std::chrono::days{1};
    std::chrono::sys_days last = to_sys_days(to);
    int total = int((last - first).count()) + 1;
    int full_weeks = total / 7;
    int count = full_weeks * 5;
    unsigned start_dow = std::chrono::weekday{first}.iso_encoding();
    for (int i = 0; i < total % 7; ++i) {
        unsigned dow = (start_dow - 1 + i) % 7 + 1;
        if (dow <= 5) ++count;
    }
    return count;
}

} // namespace relgate
