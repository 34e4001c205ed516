#include "archboot/date.hpp"

#include <doctest.h>

#include <stdexcept>

using archboot::Date;
using archboot::months_between;

TEST_CASE("ISO round trip")
{
    const auto d = Date::parse("2019-06-30");
    CHECK(d.year == 2019);
    CHECK(d.month == 6);
    CHECK(d.day == 30);
    CHECK(d.to_string() == "2019-06-30");
}

TEST_CASE("malformed dates rejected")
{
    CHECK_THROWS_AS(Date::parse("2019-6-30"), std::invalid_argument);
    CHECK_THROWS_AS(Date::parse("2019/06/30"), std::invalid_argument);
    CHECK_THROWS_AS(Date::parse("2019-13-01"), std::invalid_argument);
    CHECK_THROWS_AS(Date::parse("2019-02-29"), std::invalid_argument);
    CHECK_NOTHROW(Date::parse("2020-02-29")); // leap year
}

TEST_CASE("month arithmetic ignores day of month")
{
    CHECK(months_between(Date{2021, 1, 1}, Date{2020, 7, 28}) == 6);
    CHECK(months_between(Date{2021, 1, 31}, Date{2021, 1, 1}) == 0);
    CHECK(months_between(Date{2020, 1, 1}, Date{2021, 1, 1}) == -12);
}

TEST_CASE("ordering")
{
    CHECK(Date{2020, 12, 31} < Date{2021, 1, 1});
    CHECK(Date{2021, 1, 1} < Date{2021, 1, 2});
}
