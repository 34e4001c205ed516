#include "archboot/tilegrid.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace archboot::tilegrid;

namespace {

// Per-city tile counts and published areas (km^2) of the survey.
struct CityRow {
    const char* name;
    std::int64_t images;
    double area;
};

constexpr CityRow kCityRows[] = {
    {"Melbourne", 9018518, 3249},  {"Sydney", 6700303, 2414},
    {"Perth", 13205906, 4758},     {"Canberra", 4856845, 1750},
    {"Adelaide", 1286671, 464},    {"Brisbane", 12884242, 4642},
    {"Geelong", 4601846, 1658},    {"Bendigo", 2112860, 761},
    {"Darwin", 392492, 141},       {"Ballarat", 3017364, 1087},
    {"Hobart", 1043840, 376},      {"Townsville", 948061, 342},
    {"Cairns", 822028, 296},       {"Wollongong", 781521, 282},
    {"Toowoomba", 876648, 316},
};
constexpr std::int64_t kTotalImages = 62549145;
constexpr double kTotalArea = 22536;

} // namespace

TEST_CASE("tile edge length")
{
    CHECK(tile_edge_meters(0) == doctest::Approx(40075016.686));
    CHECK(tile_edge_meters(21) == doctest::Approx(19.109).epsilon(1e-4));
    // Nominal edge from the imagery resolution: 256 px x 0.074 m/px.
    const double nominal = 256 * 0.074;
    CHECK(std::fabs(tile_edge_meters(21) - nominal) / nominal < 0.01);

    CHECK_THROWS_AS(tile_edge_meters(-1), std::out_of_range);
    CHECK_THROWS_AS(tile_edge_meters(24), std::out_of_range);
}

TEST_CASE("binary halving is exact")
{
    for (int z = 0; z < 23; ++z) {
        CHECK(tile_edge_meters(z) == 2.0 * tile_edge_meters(z + 1));
    }
}

TEST_CASE("metres per pixel")
{
    CHECK(std::fabs(meters_per_pixel(21, 256) - 0.074) / 0.074 < 0.01);
    CHECK(meters_per_pixel(0, 1) == doctest::Approx(40075016.686));
    CHECK(meters_per_pixel(22, 256) ==
          doctest::Approx(meters_per_pixel(21, 256) / 2.0));
    CHECK_THROWS_AS(meters_per_pixel(21, 0), std::out_of_range);
}

TEST_CASE("origin maps to grid centre")
{
    const auto t = latlon_to_tile({0.0, 0.0}, 4);
    CHECK(t.x == 8);
    CHECK(t.y == 8);
}

TEST_CASE("polar latitudes clamp instead of overflowing")
{
    for (int z : {1, 10, 21}) {
        const auto t = latlon_to_tile({85.06, 17.0}, z);
        CHECK(t.y < (1u << z));
        const auto s = latlon_to_tile({-90.0, 17.0}, z);
        CHECK(s.y < (1u << z));
    }
}

TEST_CASE("world corner tiles")
{
    const auto nw = tile_to_latlon({0, 0, 0});
    CHECK(nw.lat == doctest::Approx(85.0511288));
    CHECK(nw.lon == doctest::Approx(-180.0));
    // Tile boundary at zoom 1 passes through the equator.
    const auto mid = tile_to_latlon({1, 1, 1});
    CHECK(mid.lat == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(mid.lon == doctest::Approx(0.0));
}

TEST_CASE("round trip stays within one tile")
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> lat_dist(-85.0, 85.0);
    std::uniform_real_distribution<double> lon_dist(-180.0, 180.0);
    const int zoom = 21;
    const double n = static_cast<double>(1u << zoom);
    for (int trial = 0; trial < 1000; ++trial) {
        const GeoPoint p{lat_dist(rng), lon_dist(rng)};
        const auto t = latlon_to_tile(p, zoom);
        const auto nw = tile_to_latlon(t);
        const auto se = tile_to_latlon({t.x + 1, t.y + 1, zoom});
        CHECK(p.lon >= nw.lon - 360.0 / n);
        CHECK(p.lon <= se.lon + 360.0 / n);
        CHECK(p.lat <= nw.lat + 1e-9);
        CHECK(p.lat >= se.lat - 1e-9);
    }
}

TEST_CASE("tile lookup is monotone")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lat_dist(-85.0, 85.0);
    std::uniform_real_distribution<double> lon_dist(-180.0, 179.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double lat = lat_dist(rng);
        const double lon = lon_dist(rng);
        const auto base = latlon_to_tile({lat, lon}, 15);
        const auto east = latlon_to_tile({lat, lon + 0.5}, 15);
        const auto north = latlon_to_tile({std::min(85.0, lat + 0.5), lon}, 15);
        CHECK(east.x >= base.x);
        CHECK(north.y <= base.y);
    }
}

TEST_CASE("coverage area reproduces the imagery table")
{
    for (const auto& row : kCityRows) {
        const double got = coverage_area_km2(row.images, 21);
        CHECK_MESSAGE(std::fabs(got - row.area) / row.area < 0.01, row.name);
    }
    CHECK(std::fabs(coverage_area_km2(kTotalImages, 21) - kTotalArea) /
              kTotalArea <
          0.01);
    CHECK(coverage_area_km2(0, 21) == 0.0);
    CHECK_THROWS_AS(coverage_area_km2(-1, 21), std::out_of_range);
}
