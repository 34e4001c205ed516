#include "archboot/tilegrid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace archboot::tilegrid {

namespace {

void check_zoom(int zoom)
{
    if (zoom < 0 || zoom > kMaxZoom) {
        throw std::out_of_range("zoom " + std::to_string(zoom) +
                                " outside [0, " + std::to_string(kMaxZoom) +
                                "]");
    }
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

} // namespace

double tile_edge_meters(int zoom)
{
    check_zoom(zoom);
    return kEarthCircumferenceMeters / static_cast<double>(1u << zoom);
}

double meters_per_pixel(int zoom, int tile_px)
{
    check_zoom(zoom);
    if (tile_px <= 0) {
        throw std::out_of_range("tile_px must be positive");
    }
    return tile_edge_meters(zoom) / static_cast<double>(tile_px);
}

TileKey latlon_to_tile(const GeoPoint& p, int zoom)
{
    check_zoom(zoom);
    const double lat =
        std::clamp(p.lat, -kMaxMercatorLatitude, kMaxMercatorLatitude);
    const double n = static_cast<double>(1u << zoom);
    const double xt = (p.lon + 180.0) / 360.0 * n;
    const double lat_rad = lat * kDegToRad;
    const double yt =
        (1.0 - std::asinh(std::tan(lat_rad)) / std::numbers::pi) / 2.0 * n;

    const auto max_index = static_cast<double>((1u << zoom) - 1);
    TileKey t;
    t.x = static_cast<std::uint32_t>(std::clamp(std::floor(xt), 0.0, max_index));
    t.y = static_cast<std::uint32_t>(std::clamp(std::floor(yt), 0.0, max_index));
    t.zoom = zoom;
    return t;
}

GeoPoint tile_to_latlon(const TileKey& t)
{
    check_zoom(t.zoom);
    const double n = static_cast<double>(1u << t.zoom);
    GeoPoint p;
    p.lon = static_cast<double>(t.x) / n * 360.0 - 180.0;
    const double y_norm = 1.0 - 2.0 * static_cast<double>(t.y) / n;
    p.lat = std::atan(std::sinh(std::numbers::pi * y_norm)) / kDegToRad;
    return p;
}

GeoPoint tile_center(const TileKey& t)
{
    check_zoom(t.zoom);
    const double n = static_cast<double>(1u << t.zoom);
    GeoPoint p;
    p.lon = (static_cast<double>(t.x) + 0.5) / n * 360.0 - 180.0;
    const double y_norm = 1.0 - 2.0 * (static_cast<double>(t.y) + 0.5) / n;
    p.lat = std::atan(std::sinh(std::numbers::pi * y_norm)) / kDegToRad;
    return p;
}

double coverage_area_km2(std::int64_t tile_count, int zoom)
{
    check_zoom(zoom);
    if (tile_count < 0) {
        throw std::out_of_range("tile_count must be non-negative");
    }
    // Nominal edge is pinned at zoom 21; other zooms scale by powers of two.
    const double edge = kTilePixels * kNominalMetersPerPixel *
                        std::exp2(static_cast<double>(21 - zoom));
    return static_cast<double>(tile_count) * edge * edge * 1e-6;
}

} // namespace archboot::tilegrid
