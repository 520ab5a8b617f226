#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "laketemp/geometry.hpp"
#include "laketemp/tensor.hpp"

namespace laketemp {

/// One day of meteorological drivers at the lake surface.
struct MeteoDay {
    std::chrono::sys_days date{};
    double shortwave = 0.0;     // W/m^2
    double longwave = 0.0;      // W/m^2 incoming
    double air_temp = 0.0;      // deg C
    double rel_humidity = 0.0;  // 0-100 %
    double wind = 0.0;          // m/s, referenced to 10 m
    double rain = 0.0;          // cm (optional column, defaults to 0)
    bool frozen = false;
    bool snowing = false;
    double pressure = 1013.0;   // hPa (optional column, defaults to 1013)
};

struct MeteoSeries {
    std::vector<MeteoDay> days;

    int size() const { return static_cast<int>(days.size()); }
    int day_of_year(int i) const;  // 1-366
    int month(int i) const;        // 1-12
    std::string date_string(int i) const;
    /// consecutive dates, RH in [0,100], wind >= 0
    void validate() const;
};

/// Dense [depth x time] temperature matrix in deg C. Serves both as the
/// simulator output and as a model prediction field.
struct TemperatureField {
    int n_depths = 0;
    int n_days = 0;
    std::vector<double> data;  // day-major: data[day * n_depths + depth]

    static TemperatureField zeros(int n_depths, int n_days);
    double at(int depth, int day) const { return data[static_cast<size_t>(day) * n_depths + depth]; }
    double& at(int depth, int day) { return data[static_cast<size_t>(day) * n_depths + depth]; }
    std::vector<double> profile(int day) const;
};

struct Observation {
    int depth_index = 0;
    int time_index = 0;
    double temp_c = 0.0;
};

struct ObservationSet {
    enum class Source { real, synthetic };
    std::vector<Observation> obs;
    Source source = Source::real;

    int size() const { return static_cast<int>(obs.size()); }
    /// bounds against a field geometry/time range, duplicates, finiteness
    void validate(int n_depths, int n_days) const;
    /// observations with time_index in [begin, end)
    ObservationSet in_window(int begin, int end) const;
};

// -- CSV exchange -------------------------------------------------------------
// drivers.csv: date,shortwave,longwave,air_temp,rel_humidity,wind,rain,frozen,snowing[,pressure]
// obs.csv:     date,depth_m,temp_c
// hypso.csv:   depth_m,area_m2
// field.csv:   date,d0.0,d0.5,...

MeteoSeries load_drivers(const std::string& path);
void write_drivers(const std::string& path, const MeteoSeries& series);

ObservationSet load_observations(const std::string& path, const MeteoSeries& reference,
                                 const LakeGeometry& geometry);
void write_observations(const std::string& path, const ObservationSet& obs,
                        const MeteoSeries& reference, const LakeGeometry& geometry);

LakeGeometry load_hypsography(const std::string& path);
void write_hypsography(const std::string& path, const LakeGeometry& geometry);

struct FieldFile {
    TemperatureField field;
    std::vector<std::chrono::sys_days> dates;
};
FieldFile load_field(const std::string& path);
void write_field(const std::string& path, const TemperatureField& field,
                 const MeteoSeries& reference);

/// Keeps every observation independently with probability keep_fraction;
/// deterministic per seed. Windowing (protecting test-period observations)
/// is the caller's responsibility.
ObservationSet sample_observations(const ObservationSet& obs, double keep_fraction,
                                   uint64_t seed);

/// Regular (depth, time) sampling of a dense field into an observation set;
/// the synthetic stand-in for sensor profiles.
ObservationSet mint_profile_observations(const TemperatureField& field, int every_days,
                                         std::pair<int, int> day_window,
                                         int depth_stride = 1);

// -- feature assembly ----------------------------------------------------------

struct FeatureConfig {
    /// Driver columns fed to the model, by CSV field name. The feature set is
    /// configurable; rain/pressure may be added here.
    std::vector<std::string> driver_fields = {"shortwave",    "longwave", "air_temp",
                                              "rel_humidity", "wind",     "frozen",
                                              "snowing"};
    bool include_depth = true;
    /// Periodic (sin, cos) day-of-year encoding by default; false feeds the
    /// raw 1-366 value as a single column.
    bool doy_sincos = true;
};

struct NormStats {
    std::vector<std::string> names;  // retained features, column order
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::string> dropped;  // zero-variance features removed at fit
};

/// Standardized per-depth feature sequences: one [n_days x n_features] block
/// per depth, depth entering as a constant column.
struct FeatureMatrix {
    int n_depths = 0;
    int n_days = 0;
    int n_features = 0;
    std::vector<double> data;  // [depth][day][feature]
    NormStats stats;

    double at(int depth, int day, int f) const {
        return data[(static_cast<size_t>(depth) * n_days + day) * n_features + f];
    }
    /// t-major block over all depths for [day_begin, day_end):
    /// row (t - day_begin)*n_depths + depth, used to drive forward_window.
    Tensor window_tensor(int day_begin, int day_end) const;
};

/// Fits normalization statistics on the given day windows (pooled over all
/// depths) and standardizes the full period with them. Zero-variance features
/// are dropped with a warning recorded in the stats.
FeatureMatrix build_features(const MeteoSeries& drivers, const LakeGeometry& geometry,
                             const FeatureConfig& config,
                             const std::vector<std::pair<int, int>>& stats_windows);

/// Rebuilds features with previously fitted statistics (test windows, resumed
/// models); the stats' retained-feature list defines the columns.
FeatureMatrix build_features(const MeteoSeries& drivers, const LakeGeometry& geometry,
                             const NormStats& stats);

}  // namespace laketemp
