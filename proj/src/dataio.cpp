#include "laketemp/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "laketemp/errors.hpp"

namespace laketemp {

namespace {

using std::chrono::sys_days;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_double(const std::string& cell, const std::string& file, int row,
                    const std::string& col) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw DataError(file + ": row " + std::to_string(row) + ": cannot parse '" + cell +
                        "' in column " + col);
    if (!std::isfinite(v))
        throw DataError(file + ": row " + std::to_string(row) + ": non-finite value in column " +
                        col);
    return v;
}

bool parse_flag(const std::string& cell, const std::string& file, int row,
                const std::string& col) {
    if (cell == "0" || cell == "false") return false;
    if (cell == "1" || cell == "true") return true;
    throw DataError(file + ": row " + std::to_string(row) + ": flag column " + col +
                    " must be 0/1, got '" + cell + "'");
}

sys_days parse_date(const std::string& cell, const std::string& file, int row) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(cell.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        throw DataError(file + ": row " + std::to_string(row) + ": bad date '" + cell + "'");
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                    std::chrono::day{unsigned(d)}};
    if (!ymd.ok())
        throw DataError(file + ": row " + std::to_string(row) + ": invalid date '" + cell + "'");
    return sys_days(ymd);
}

std::string format_date(sys_days date) {
    std::chrono::year_month_day ymd(date);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

// Shortest representation that reloads to the identical double.
std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return in;
}

std::vector<std::string> read_header(std::ifstream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    return split_csv_line(line);
}

int require_column(const std::vector<std::string>& header, const std::string& name,
                   const std::string& path) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path + ": missing column: " + name);
    return static_cast<int>(it - header.begin());
}

int optional_column(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

}  // namespace

// -- MeteoSeries ---------------------------------------------------------------

int MeteoSeries::day_of_year(int i) const {
    const sys_days d = days[i].date;
    const std::chrono::year_month_day ymd(d);
    const sys_days jan1 = sys_days(ymd.year() / std::chrono::January / 1);
    return static_cast<int>((d - jan1).count()) + 1;
}

int MeteoSeries::month(int i) const {
    return static_cast<int>(unsigned(std::chrono::year_month_day(days[i].date).month()));
}

std::string MeteoSeries::date_string(int i) const { return format_date(days[i].date); }

void MeteoSeries::validate() const {
    if (days.empty()) throw DataError("driver series is empty");
    for (size_t i = 0; i < days.size(); ++i) {
        const MeteoDay& d = days[i];
        const int row = static_cast<int>(i) + 2;  // header + 1-based
        if (i > 0 && (d.date - days[i - 1].date).count() != 1)
            throw DataError("drivers: non-consecutive dates at row " + std::to_string(row));
        if (d.rel_humidity < 0.0 || d.rel_humidity > 100.0)
            throw DataError("drivers: relative humidity outside [0,100] at row " +
                            std::to_string(row));
        if (d.wind < 0.0)
            throw DataError("drivers: negative wind speed at row " + std::to_string(row));
        for (double v : {d.shortwave, d.longwave, d.air_temp, d.rain, d.pressure})
            if (!std::isfinite(v))
                throw DataError("drivers: non-finite value at row " + std::to_string(row));
    }
}

// -- TemperatureField -----------------------------------------------------------

TemperatureField TemperatureField::zeros(int n_depths, int n_days) {
    TemperatureField f;
    f.n_depths = n_depths;
    f.n_days = n_days;
    f.data.assign(static_cast<size_t>(n_depths) * n_days, 0.0);
    return f;
}

std::vector<double> TemperatureField::profile(int day) const {
    const auto* base = data.data() + static_cast<size_t>(day) * n_depths;
    return std::vector<double>(base, base + n_depths);
}

// -- ObservationSet ---------------------------------------------------------------

void ObservationSet::validate(int n_depths, int n_days) const {
    std::unordered_set<int64_t> seen;
    seen.reserve(obs.size());
    for (const Observation& o : obs) {
        if (o.depth_index < 0 || o.depth_index >= n_depths || o.time_index < 0 ||
            o.time_index >= n_days)
            throw DataError("observation outside the field bounds (depth " +
                            std::to_string(o.depth_index) + ", day " +
                            std::to_string(o.time_index) + ")");
        if (!std::isfinite(o.temp_c)) throw DataError("non-finite observed temperature");
        const int64_t key = static_cast<int64_t>(o.depth_index) * n_days + o.time_index;
        if (!seen.insert(key).second)
            throw DataError("duplicate observation for depth " +
                            std::to_string(o.depth_index) + ", day " +
                            std::to_string(o.time_index));
    }
}

ObservationSet ObservationSet::in_window(int begin, int end) const {
    ObservationSet out;
    out.source = source;
    for (const Observation& o : obs)
        if (o.time_index >= begin && o.time_index < end) out.obs.push_back(o);
    return out;
}

// -- drivers CSV ------------------------------------------------------------------

MeteoSeries load_drivers(const std::string& path) {
    std::ifstream in = open_input(path);
    auto header = read_header(in, path);
    const int c_date = require_column(header, "date", path);
    const int c_sw = require_column(header, "shortwave", path);
    const int c_lw = require_column(header, "longwave", path);
    const int c_ta = require_column(header, "air_temp", path);
    const int c_rh = require_column(header, "rel_humidity", path);
    const int c_wind = require_column(header, "wind", path);
    const int c_frozen = require_column(header, "frozen", path);
    const int c_snow = require_column(header, "snowing", path);
    const int c_rain = optional_column(header, "rain");
    const int c_press = optional_column(header, "pressure");

    MeteoSeries series;
    std::string line;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        MeteoDay d;
        d.date = parse_date(cells[c_date], path, row);
        d.shortwave = parse_double(cells[c_sw], path, row, "shortwave");
        d.longwave = parse_double(cells[c_lw], path, row, "longwave");
        d.air_temp = parse_double(cells[c_ta], path, row, "air_temp");
        d.rel_humidity = parse_double(cells[c_rh], path, row, "rel_humidity");
        d.wind = parse_double(cells[c_wind], path, row, "wind");
        d.frozen = parse_flag(cells[c_frozen], path, row, "frozen");
        d.snowing = parse_flag(cells[c_snow], path, row, "snowing");
        d.rain = c_rain >= 0 ? parse_double(cells[c_rain], path, row, "rain") : 0.0;
        d.pressure = c_press >= 0 ? parse_double(cells[c_press], path, row, "pressure") : 1013.0;
        series.days.push_back(d);
    }
    series.validate();
    return series;
}

void write_drivers(const std::string& path, const MeteoSeries& series) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "date,shortwave,longwave,air_temp,rel_humidity,wind,rain,frozen,snowing,pressure\n";
    for (const MeteoDay& d : series.days) {
        out << format_date(d.date) << ',' << format_double(d.shortwave) << ','
            << format_double(d.longwave) << ',' << format_double(d.air_temp) << ','
            << format_double(d.rel_humidity) << ',' << format_double(d.wind) << ','
            << format_double(d.rain) << ',' << (d.frozen ? 1 : 0) << ','
            << (d.snowing ? 1 : 0) << ',' << format_double(d.pressure) << '\n';
    }
}

// -- observations CSV ----------------------------------------------------------------

ObservationSet load_observations(const std::string& path, const MeteoSeries& reference,
                                 const LakeGeometry& geometry) {
    std::ifstream in = open_input(path);
    auto header = read_header(in, path);
    const int c_date = require_column(header, "date", path);
    const int c_depth = require_column(header, "depth_m", path);
    const int c_temp = require_column(header, "temp_c", path);

    std::unordered_map<int64_t, int> date_index;
    for (int i = 0; i < reference.size(); ++i)
        date_index[reference.days[i].date.time_since_epoch().count()] = i;

    ObservationSet set;
    std::string line;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(row) + ": wrong cell count");
        const sys_days date = parse_date(cells[c_date], path, row);
        auto it = date_index.find(date.time_since_epoch().count());
        if (it == date_index.end())
            throw DataError(path + ": row " + std::to_string(row) +
                            ": date outside the driver series");
        const double depth_m = parse_double(cells[c_depth], path, row, "depth_m");
        if (depth_m < 0.0 || depth_m > geometry.max_depth + 1e-9)
            throw DataError(path + ": row " + std::to_string(row) + ": depth " +
                            cells[c_depth] + " outside [0, max_depth]");
        int idx = static_cast<int>(std::lround(depth_m / LakeGeometry::kLayerThickness));
        idx = std::min(idx, geometry.n_layers() - 1);
        Observation o;
        o.depth_index = idx;
        o.time_index = it->second;
        o.temp_c = parse_double(cells[c_temp], path, row, "temp_c");
        set.obs.push_back(o);
    }
    set.validate(geometry.n_layers(), reference.size());
    return set;
}

void write_observations(const std::string& path, const ObservationSet& obs,
                        const MeteoSeries& reference, const LakeGeometry& geometry) {
    (void)geometry;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "date,depth_m,temp_c\n";
    for (const Observation& o : obs.obs) {
        out << format_date(reference.days[o.time_index].date) << ','
            << format_double(o.depth_index * LakeGeometry::kLayerThickness) << ','
            << format_double(o.temp_c) << '\n';
    }
}

// -- hypsography CSV -----------------------------------------------------------------

LakeGeometry load_hypsography(const std::string& path) {
    std::ifstream in = open_input(path);
    auto header = read_header(in, path);
    const int c_depth = require_column(header, "depth_m", path);
    const int c_area = require_column(header, "area_m2", path);
    std::vector<double> depths, areas;
    std::string line;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(row) + ": wrong cell count");
        depths.push_back(parse_double(cells[c_depth], path, row, "depth_m"));
        areas.push_back(parse_double(cells[c_area], path, row, "area_m2"));
    }
    return geometry_from_samples(depths, areas);
}

void write_hypsography(const std::string& path, const LakeGeometry& geometry) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "depth_m,area_m2\n";
    const int n = geometry.n_layers();
    for (int d = 0; d < n; ++d)
        out << format_double(geometry.depth_at(d)) << ',' << format_double(geometry.areas[d])
            << '\n';
    // bottom boundary sample so the reloaded grid recovers max_depth; linear
    // extrapolation clamped at zero
    double bottom = geometry.areas[n - 1];
    if (n >= 2) bottom = std::max(0.0, 2.0 * geometry.areas[n - 1] - geometry.areas[n - 2]);
    out << format_double(geometry.max_depth) << ',' << format_double(bottom) << '\n';
}

// -- field CSV -------------------------------------------------------------------------

FieldFile load_field(const std::string& path) {
    std::ifstream in = open_input(path);
    auto header = read_header(in, path);
    if (header.size() < 2 || header[0] != "date")
        throw DataError(path + ": field header must start with 'date'");
    const int n_depths = static_cast<int>(header.size()) - 1;

    FieldFile out;
    out.field.n_depths = n_depths;
    std::string line;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(row) + ": wrong cell count");
        out.dates.push_back(parse_date(cells[0], path, row));
        for (int d = 0; d < n_depths; ++d)
            out.field.data.push_back(parse_double(cells[d + 1], path, row, header[d + 1]));
    }
    out.field.n_days = static_cast<int>(out.dates.size());
    if (out.field.n_days == 0) throw DataError(path + ": field has no rows");
    return out;
}

void write_field(const std::string& path, const TemperatureField& field,
                 const MeteoSeries& reference) {
    if (field.n_days > reference.size())
        throw DataError("write_field: drivers shorter than the field");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "date";
    for (int d = 0; d < field.n_depths; ++d) {
        char buf[24];
        std::snprintf(buf, sizeof buf, ",d%.1f", d * LakeGeometry::kLayerThickness);
        out << buf;
    }
    out << '\n';
    for (int t = 0; t < field.n_days; ++t) {
        out << format_date(reference.days[t].date);
        for (int d = 0; d < field.n_depths; ++d) out << ',' << format_double(field.at(d, t));
        out << '\n';
    }
}

// -- sampling ---------------------------------------------------------------------------

ObservationSet sample_observations(const ObservationSet& obs, double keep_fraction,
                                   uint64_t seed) {
    if (keep_fraction < 0.0 || keep_fraction > 1.0)
        throw DataError("sample_observations: keep fraction outside [0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ObservationSet out;
    out.source = obs.source;
    for (const Observation& o : obs.obs)
        if (unit(rng) < keep_fraction) out.obs.push_back(o);
    return out;
}

ObservationSet mint_profile_observations(const TemperatureField& field, int every_days,
                                         std::pair<int, int> day_window, int depth_stride) {
    if (every_days < 1 || depth_stride < 1)
        throw DataError("mint_profile_observations: strides must be >= 1");
    const int begin = std::max(0, day_window.first);
    const int end = std::min(field.n_days, day_window.second);
    ObservationSet out;
    out.source = ObservationSet::Source::synthetic;
    for (int t = begin; t < end; t += every_days)
        for (int d = 0; d < field.n_depths; d += depth_stride)
            out.obs.push_back({d, t, field.at(d, t)});
    return out;
}

// -- feature assembly ----------------------------------------------------------------------

namespace {

constexpr double kTwoPi = 6.283185307179586;

double raw_feature(const std::string& name, const MeteoSeries& drivers, int day,
                   int depth_index, const LakeGeometry& geometry, int doy) {
    const MeteoDay& d = drivers.days[day];
    if (name == "shortwave") return d.shortwave;
    if (name == "longwave") return d.longwave;
    if (name == "air_temp") return d.air_temp;
    if (name == "rel_humidity") return d.rel_humidity;
    if (name == "wind") return d.wind;
    if (name == "rain") return d.rain;
    if (name == "pressure") return d.pressure;
    if (name == "frozen") return d.frozen ? 1.0 : 0.0;
    if (name == "snowing") return d.snowing ? 1.0 : 0.0;
    if (name == "depth") return geometry.depth_at(depth_index);
    if (name == "doy") return static_cast<double>(doy);
    if (name == "doy_sin") return std::sin(kTwoPi * doy / 366.0);
    if (name == "doy_cos") return std::cos(kTwoPi * doy / 366.0);
    throw DataError("unknown feature name: " + name);
}

std::vector<std::string> candidate_names(const FeatureConfig& config) {
    std::vector<std::string> names = config.driver_fields;
    if (config.include_depth) names.push_back("depth");
    if (config.doy_sincos) {
        names.push_back("doy_sin");
        names.push_back("doy_cos");
    } else {
        names.push_back("doy");
    }
    return names;
}

FeatureMatrix assemble(const MeteoSeries& drivers, const LakeGeometry& geometry,
                       const std::vector<std::string>& names,
                       const std::vector<double>& mean, const std::vector<double>& stddev,
                       NormStats stats) {
    const int n_depths = geometry.n_layers();
    const int n_days = drivers.size();
    const int n_feat = static_cast<int>(names.size());
    FeatureMatrix fm;
    fm.n_depths = n_depths;
    fm.n_days = n_days;
    fm.n_features = n_feat;
    fm.stats = std::move(stats);
    fm.data.resize(static_cast<size_t>(n_depths) * n_days * n_feat);
    std::vector<int> doy(n_days);
    for (int t = 0; t < n_days; ++t) doy[t] = drivers.day_of_year(t);
    for (int d = 0; d < n_depths; ++d)
        for (int t = 0; t < n_days; ++t) {
            double* dst = fm.data.data() + (static_cast<size_t>(d) * n_days + t) * n_feat;
            for (int f = 0; f < n_feat; ++f)
                dst[f] = (raw_feature(names[f], drivers, t, d, geometry, doy[t]) - mean[f]) /
                         stddev[f];
        }
    return fm;
}

}  // namespace

Tensor FeatureMatrix::window_tensor(int day_begin, int day_end) const {
    if (day_begin < 0 || day_end > n_days || day_begin >= day_end)
        throw DataError("window_tensor: invalid day range");
    const int t_steps = day_end - day_begin;
    std::vector<double> block(static_cast<size_t>(t_steps) * n_depths * n_features);
    for (int t = 0; t < t_steps; ++t)
        for (int d = 0; d < n_depths; ++d) {
            const double* src =
                data.data() +
                (static_cast<size_t>(d) * n_days + (day_begin + t)) * n_features;
            double* dst =
                block.data() + (static_cast<size_t>(t) * n_depths + d) * n_features;
            std::copy_n(src, n_features, dst);
        }
    return Tensor::from_values({t_steps * n_depths, n_features}, std::move(block));
}

FeatureMatrix build_features(const MeteoSeries& drivers, const LakeGeometry& geometry,
                             const FeatureConfig& config,
                             const std::vector<std::pair<int, int>>& stats_windows) {
    if (drivers.size() == 0) throw DataError("build_features: empty driver series");
    if (stats_windows.empty()) throw DataError("build_features: no statistics windows");
    for (auto [b, e] : stats_windows)
        if (b < 0 || e > drivers.size() || b >= e)
            throw DataError("build_features: statistics window outside the series");

    const auto names = candidate_names(config);
    const int n_depths = geometry.n_layers();
    std::vector<int> doy(drivers.size());
    for (int t = 0; t < drivers.size(); ++t) doy[t] = drivers.day_of_year(t);

    // two-pass mean/stddev pooled over (window days x depths)
    std::vector<double> mean(names.size(), 0.0), var(names.size(), 0.0);
    int64_t count = 0;
    for (auto [b, e] : stats_windows) count += static_cast<int64_t>(e - b) * n_depths;
    for (size_t f = 0; f < names.size(); ++f) {
        double acc = 0.0;
        for (auto [b, e] : stats_windows)
            for (int t = b; t < e; ++t)
                for (int d = 0; d < n_depths; ++d)
                    acc += raw_feature(names[f], drivers, t, d, geometry, doy[t]);
        mean[f] = acc / static_cast<double>(count);
        double sq = 0.0;
        for (auto [b, e] : stats_windows)
            for (int t = b; t < e; ++t)
                for (int d = 0; d < n_depths; ++d) {
                    const double x =
                        raw_feature(names[f], drivers, t, d, geometry, doy[t]) - mean[f];
                    sq += x * x;
                }
        var[f] = sq / static_cast<double>(count);
    }

    NormStats stats;
    std::vector<std::string> kept;
    std::vector<double> kmean, kstd;
    for (size_t f = 0; f < names.size(); ++f) {
        const double sd = std::sqrt(var[f]);
        if (sd <= 1e-12) {
            std::cerr << "warning: feature '" << names[f]
                      << "' has zero variance in the training windows; dropped\n";
            stats.dropped.push_back(names[f]);
            continue;
        }
        kept.push_back(names[f]);
        kmean.push_back(mean[f]);
        kstd.push_back(sd);
    }
    if (kept.empty()) throw DataError("build_features: all features have zero variance");
    stats.names = kept;
    stats.mean = kmean;
    stats.stddev = kstd;
    return assemble(drivers, geometry, kept, kmean, kstd, std::move(stats));
}

FeatureMatrix build_features(const MeteoSeries& drivers, const LakeGeometry& geometry,
                             const NormStats& stats) {
    if (drivers.size() == 0) throw DataError("build_features: empty driver series");
    if (stats.names.empty() || stats.names.size() != stats.mean.size() ||
        stats.names.size() != stats.stddev.size())
        throw DataError("build_features: malformed normalization statistics");
    return assemble(drivers, geometry, stats.names, stats.mean, stats.stddev, stats);
}

}  // namespace laketemp
