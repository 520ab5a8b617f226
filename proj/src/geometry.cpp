#include "laketemp/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "laketemp/errors.hpp"

namespace laketemp {

void LakeGeometry::validate() const {
    if (areas.empty()) throw DataError("geometry: no layers");
    if (max_depth <= 0.0) throw DataError("geometry: max depth must be positive");
    for (double a : areas)
        if (!(a > 0.0)) throw DataError("geometry: cross-sectional areas must be positive");
}

LakeGeometry make_geometry(const std::string& shape, double surface_area_m2,
                           double max_depth_m) {
    if (!(surface_area_m2 > 0.0)) throw DataError("make_geometry: surface area must be positive");
    const double layers_exact = max_depth_m / LakeGeometry::kLayerThickness;
    const double rounded = std::round(layers_exact);
    if (max_depth_m <= 0.0 || std::abs(layers_exact - rounded) > 1e-9)
        throw DataError("make_geometry: max depth must be a positive multiple of 0.5 m");
    const int n = static_cast<int>(rounded);

    LakeGeometry g;
    g.max_depth = max_depth_m;
    g.shape_tag = shape;
    g.areas.resize(n);
    for (int d = 0; d < n; ++d) {
        const double z = g.depth_at(d);
        const double frac = 1.0 - z / max_depth_m;
        if (shape == "cone") {
            g.areas[d] = surface_area_m2 * frac;
        } else if (shape == "barrel") {
            g.areas[d] = surface_area_m2;
        } else if (shape == "martini") {
            g.areas[d] = surface_area_m2 * frac * frac;
        } else {
            throw DataError("make_geometry: unknown shape '" + shape +
                            "' (expected cone, barrel or martini)");
        }
    }
    g.validate();
    return g;
}

LakeGeometry geometry_from_samples(const std::vector<double>& depths_m,
                                   const std::vector<double>& areas_m2) {
    if (depths_m.size() != areas_m2.size() || depths_m.size() < 2)
        throw DataError("hypsography: need at least two (depth, area) samples");
    for (size_t i = 1; i < depths_m.size(); ++i)
        if (depths_m[i] <= depths_m[i - 1])
            throw DataError("hypsography: depths must be strictly increasing");
    if (depths_m.front() != 0.0)
        throw DataError("hypsography: first sample must be at depth 0");

    LakeGeometry g;
    g.max_depth = depths_m.back();
    g.shape_tag = "measured";
    const double dz = LakeGeometry::kLayerThickness;
    const int n = static_cast<int>(std::floor(g.max_depth / dz + 1e-9));
    g.areas.resize(n);
    size_t seg = 0;
    for (int d = 0; d < n; ++d) {
        const double z = d * dz;
        while (seg + 2 < depths_m.size() && depths_m[seg + 1] <= z) ++seg;
        const double z0 = depths_m[seg], z1 = depths_m[seg + 1];
        const double a0 = areas_m2[seg], a1 = areas_m2[seg + 1];
        if (z == z0) {
            g.areas[d] = a0;  // grid point coincides with a sample
        } else {
            const double f = (z - z0) / (z1 - z0);
            g.areas[d] = a0 + f * (a1 - a0);
        }
    }
    g.validate();
    return g;
}

}  // namespace laketemp
