#ifndef ARCHBOOT_TILEGRID_HPP
#define ARCHBOOT_TILEGRID_HPP

#include <cstdint>

namespace archboot::tilegrid {

/// WGS84 equatorial circumference in metres, the web-mercator world extent.
inline constexpr double kEarthCircumferenceMeters = 40075016.686;

/// Latitude bound of the square web-mercator projection.
inline constexpr double kMaxMercatorLatitude = 85.05112878;

inline constexpr int kMaxZoom = 23;

/// Nominal ground resolution of the survey imagery (metres per pixel at the
/// equator) and its 256 px tile edge. Coverage areas are computed from this
/// fixed figure rather than latitude-corrected mercator size, matching how
/// the survey reports per-city areas.
inline constexpr double kNominalMetersPerPixel = 0.074;
inline constexpr int kTilePixels = 256;

struct GeoPoint {
    double lat = 0.0; // degrees, [-90, 90]
    double lon = 0.0; // degrees, [-180, 180)
};

struct TileKey {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    int zoom = 0;

    bool operator==(const TileKey&) const = default;
};

/// Edge length in metres of one tile at the equator. Throws std::out_of_range
/// unless 0 <= zoom <= 23.
double tile_edge_meters(int zoom);

/// Ground resolution at the equator for a tile of tile_px pixels on a side.
/// Throws std::out_of_range for invalid zoom or tile_px == 0.
double meters_per_pixel(int zoom, int tile_px = kTilePixels);

/// Standard slippy-map tile lookup. Latitude is clamped to the mercator
/// valid range first, so poles never overflow the y index.
TileKey latlon_to_tile(const GeoPoint& p, int zoom);

/// North-west corner of the tile.
GeoPoint tile_to_latlon(const TileKey& t);

/// Centre of the tile.
GeoPoint tile_center(const TileKey& t);

/// Area covered by tile_count tiles at the nominal survey resolution, in km².
/// Uses the fixed 256 x 0.074 m edge (not latitude-corrected).
double coverage_area_km2(std::int64_t tile_count, int zoom);

} // namespace archboot::tilegrid

#endif
