#include "archboot/date.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

namespace archboot {

namespace {

bool is_leap(int year)
{
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month)
{
    static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                    31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap(year)) {
        return 29;
    }
    return lengths[static_cast<size_t>(month - 1)];
}

int parse_int(std::string_view s)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    }
    return value;
}

} // namespace

bool Date::valid(int year, int month, int day)
{
    return month >= 1 && month <= 12 && day >= 1 &&
           day <= days_in_month(year, month);
}

std::string Date::to_string() const
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

Date Date::parse(const std::string& text)
{
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw std::invalid_argument("malformed date '" + text +
                                    "', expected YYYY-MM-DD");
    }
    std::string_view sv(text);
    Date d;
    d.year = parse_int(sv.substr(0, 4));
    d.month = parse_int(sv.substr(5, 2));
    d.day = parse_int(sv.substr(8, 2));
    if (!valid(d.year, d.month, d.day)) {
        throw std::invalid_argument("impossible date '" + text + "'");
    }
    return d;
}

int months_between(const Date& later, const Date& earlier)
{
    return later.month_index() - earlier.month_index();
}

} // namespace archboot
