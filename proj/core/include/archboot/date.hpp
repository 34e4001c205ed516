#ifndef ARCHBOOT_DATE_HPP
#define ARCHBOOT_DATE_HPP

#include <compare>
#include <string>

namespace archboot {

/// Calendar date (proleptic Gregorian). Temporal windows in this project are
/// measured in whole calendar months, so day-of-month never affects window
/// eligibility; it is kept for ordering and round-tripping.
struct Date {
    int year = 1970;
    int month = 1; // 1..12
    int day = 1;   // 1..31

    auto operator<=>(const Date&) const = default;

    int month_index() const { return year * 12 + (month - 1); }

    std::string to_string() const; // ISO-8601 YYYY-MM-DD

    /// Parses ISO-8601 YYYY-MM-DD. Throws std::invalid_argument on malformed
    /// input or an impossible calendar date.
    static Date parse(const std::string& text);

    static bool valid(int year, int month, int day);
};

/// Signed whole-month difference: month_index(later) - month_index(earlier).
int months_between(const Date& later, const Date& earlier);

} // namespace archboot

#endif
