#pragma once

#include <string>
#include <vector>

namespace laketemp {

/// Depth grid with per-depth cross-sectional areas (hypsography).
/// Layer d spans [d*dz, (d+1)*dz); areas are sampled at layer tops, so
/// areas[0] is the surface area A_0.
struct LakeGeometry {
    static constexpr double kLayerThickness = 0.5;  // m

    double max_depth = 0.0;         // m
    std::vector<double> areas;      // m^2, one per layer
    std::string shape_tag = "measured";

    int n_layers() const { return static_cast<int>(areas.size()); }
    double surface_area() const { return areas.empty() ? 0.0 : areas.front(); }
    double depth_at(int layer) const { return layer * kLayerThickness; }

    void validate() const;
};

/// Analytic shapes: cone tapers linearly to ~0, barrel is a constant column,
/// martini tapers quadratically. A Mendota-like default is
/// make_geometry("cone", 4e7, 25).
LakeGeometry make_geometry(const std::string& shape, double surface_area_m2,
                           double max_depth_m);

/// Linear interpolation of sampled (depth, area) pairs onto the 0.5 m layer
/// grid; samples that coincide with grid points are preserved exactly.
LakeGeometry geometry_from_samples(const std::vector<double>& depths_m,
                                   const std::vector<double>& areas_m2);

}  // namespace laketemp
