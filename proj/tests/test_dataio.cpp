#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "laketemp/dataio.hpp"
#include "laketemp/errors.hpp"

using namespace laketemp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("laketemp_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const fs::path p = path / name;
        std::ofstream out(p);
        out << content;
        return p.string();
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

const char* kDrivers3 =
    "date,shortwave,longwave,air_temp,rel_humidity,wind,rain,frozen,snowing,pressure\n"
    "2000-01-01,120.5,300.25,-3.5,71,4.25,0,1,1,1008.5\n"
    "2000-01-02,131,305,-2,68.5,3.75,0.2,1,0,1011\n"
    "2000-01-03,142.75,310.5,0.5,66,5,0,0,0,1013.25\n";

MeteoSeries synthetic_series(int n_days) {
    MeteoSeries s;
    const auto d0 = std::chrono::sys_days(std::chrono::year{2000} / 1 / 1);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n_days; ++i) {
        MeteoDay d;
        d.date = d0 + std::chrono::days{i};
        d.shortwave = 50.0 + 250.0 * u(rng);
        d.longwave = 220.0 + 150.0 * u(rng);
        d.air_temp = -10.0 + 35.0 * u(rng);
        d.rel_humidity = 30.0 + 70.0 * u(rng);
        d.wind = 12.0 * u(rng);
        d.rain = u(rng) < 0.3 ? u(rng) : 0.0;
        d.frozen = i % 9 == 0;
        d.snowing = i % 17 == 0;
        d.pressure = 1000.0 + 25.0 * u(rng);
        s.days.push_back(d);
    }
    return s;
}

}  // namespace

TEST_CASE("minimal well-formed driver file parses") {
    TempDir dir;
    MeteoSeries s = load_drivers(dir.file("d.csv", kDrivers3));
    REQUIRE(s.size() == 3);
    CHECK(s.days[0].shortwave == 120.5);
    CHECK(s.days[0].frozen);
    CHECK(s.days[1].rain == 0.2);
    CHECK_FALSE(s.days[2].snowing);
    CHECK(s.date_string(0) == "2000-01-01");
    CHECK(s.day_of_year(0) == 1);
    CHECK(s.month(2) == 1);
}

TEST_CASE("missing required column is a structured error") {
    TempDir dir;
    const char* no_wind =
        "date,shortwave,longwave,air_temp,rel_humidity,rain,frozen,snowing\n"
        "2000-01-01,120,300,-3,70,0,1,0\n";
    try {
        load_drivers(dir.file("d.csv", no_wind));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("missing column: wind") != std::string::npos);
    }
}

TEST_CASE("missing optional columns use documented defaults") {
    TempDir dir;
    const char* minimal =
        "date,shortwave,longwave,air_temp,rel_humidity,wind,frozen,snowing\n"
        "2000-01-01,120,300,-3,70,4,0,0\n";
    MeteoSeries s = load_drivers(dir.file("d.csv", minimal));
    CHECK(s.days[0].rain == 0.0);
    CHECK(s.days[0].pressure == 1013.0);
}

TEST_CASE("non-consecutive dates are rejected") {
    TempDir dir;
    const char* gap =
        "date,shortwave,longwave,air_temp,rel_humidity,wind,frozen,snowing\n"
        "2000-01-01,120,300,-3,70,4,0,0\n"
        "2000-01-03,120,300,-3,70,4,0,0\n";
    CHECK_THROWS_AS(load_drivers(dir.file("d.csv", gap)), DataError);
}

TEST_CASE("NaN in a required field names the row") {
    TempDir dir;
    const char* bad =
        "date,shortwave,longwave,air_temp,rel_humidity,wind,frozen,snowing\n"
        "2000-01-01,120,300,-3,70,4,0,0\n"
        "2000-01-02,nan,300,-3,70,4,0,0\n";
    try {
        load_drivers(dir.file("d.csv", bad));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

TEST_CASE("driver series round-trips bit-identically") {
    TempDir dir;
    MeteoSeries s = synthetic_series(40);
    write_drivers(dir.file("out.csv"), s);
    MeteoSeries back = load_drivers(dir.file("out.csv"));
    REQUIRE(back.size() == s.size());
    for (int i = 0; i < s.size(); ++i) {
        CHECK(back.days[i].date == s.days[i].date);
        CHECK(back.days[i].shortwave == s.days[i].shortwave);
        CHECK(back.days[i].longwave == s.days[i].longwave);
        CHECK(back.days[i].air_temp == s.days[i].air_temp);
        CHECK(back.days[i].rel_humidity == s.days[i].rel_humidity);
        CHECK(back.days[i].wind == s.days[i].wind);
        CHECK(back.days[i].rain == s.days[i].rain);
        CHECK(back.days[i].frozen == s.days[i].frozen);
        CHECK(back.days[i].snowing == s.days[i].snowing);
        CHECK(back.days[i].pressure == s.days[i].pressure);
    }
}

TEST_CASE("hypsography loads through grid interpolation") {
    TempDir dir;
    const char* hypso =
        "depth_m,area_m2\n"
        "0,40000000\n"
        "12.5,20000000\n"
        "25,100000\n";
    LakeGeometry g = load_hypsography(dir.file("h.csv", hypso));
    CHECK(g.n_layers() == 50);
    CHECK(g.areas[0] == 4e7);
    CHECK(g.areas[25] == 2e7);
    CHECK(g.areas[49] == doctest::Approx(896000.0).epsilon(1e-12));
    // write and reload preserves the grid
    write_hypsography(dir.file("h2.csv"), g);
    LakeGeometry g2 = load_hypsography(dir.file("h2.csv"));
    REQUIRE(g2.n_layers() == g.n_layers());
    CHECK(g2.max_depth == g.max_depth);
    for (int d = 0; d < g.n_layers(); ++d) CHECK(g2.areas[d] == g.areas[d]);
}

TEST_CASE("observation loading binds dates and depths to indices") {
    TempDir dir;
    MeteoSeries s = load_drivers(dir.file("d.csv", kDrivers3));
    LakeGeometry g = make_geometry("barrel", 100.0, 2.0);  // 4 layers
    const char* obs =
        "date,depth_m,temp_c\n"
        "2000-01-02,0,3.5\n"
        "2000-01-02,1.5,4.25\n"
        "2000-01-03,0.5,3.75\n";
    ObservationSet set = load_observations(dir.file("o.csv", obs), s, g);
    REQUIRE(set.size() == 3);
    CHECK(set.obs[0].depth_index == 0);
    CHECK(set.obs[0].time_index == 1);
    CHECK(set.obs[1].depth_index == 3);
    CHECK(set.obs[2].temp_c == 3.75);

    SUBCASE("unknown date is rejected") {
        const char* bad = "date,depth_m,temp_c\n1999-05-05,0,3.5\n";
        CHECK_THROWS_AS(load_observations(dir.file("b.csv", bad), s, g), DataError);
    }
    SUBCASE("depth beyond the lake bottom is rejected") {
        const char* bad = "date,depth_m,temp_c\n2000-01-02,2.6,3.5\n";
        CHECK_THROWS_AS(load_observations(dir.file("b.csv", bad), s, g), DataError);
    }
    SUBCASE("duplicate cells are rejected") {
        const char* bad =
            "date,depth_m,temp_c\n2000-01-02,0,3.5\n2000-01-02,0.1,3.6\n";
        CHECK_THROWS_AS(load_observations(dir.file("b.csv", bad), s, g), DataError);
    }
    SUBCASE("round trip") {
        write_observations(dir.file("o2.csv"), set, s, g);
        ObservationSet back = load_observations(dir.file("o2.csv"), s, g);
        REQUIRE(back.size() == set.size());
        for (int i = 0; i < set.size(); ++i) {
            CHECK(back.obs[i].depth_index == set.obs[i].depth_index);
            CHECK(back.obs[i].time_index == set.obs[i].time_index);
            CHECK(back.obs[i].temp_c == set.obs[i].temp_c);
        }
    }
}

TEST_CASE("field CSV round-trips bit-identically") {
    TempDir dir;
    MeteoSeries s = synthetic_series(5);
    TemperatureField f = TemperatureField::zeros(4, 5);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> temp(0.0, 30.0);
    for (auto& v : f.data) v = temp(rng);
    write_field(dir.file("f.csv"), f, s);
    FieldFile back = load_field(dir.file("f.csv"));
    CHECK(back.field.n_depths == 4);
    CHECK(back.field.n_days == 5);
    CHECK(back.dates[0] == s.days[0].date);
    for (size_t i = 0; i < f.data.size(); ++i) CHECK(back.field.data[i] == f.data[i]);
}

TEST_CASE("observation sampling follows the thinning protocol") {
    // synthetic pool sized like the real training pool
    ObservationSet pool;
    pool.source = ObservationSet::Source::synthetic;
    for (int i = 0; i < 8037; ++i) pool.obs.push_back({i % 50, i / 50, 5.0});

    SUBCASE("p=1 keeps everything, p=0 keeps nothing") {
        CHECK(sample_observations(pool, 1.0, 3).size() == pool.size());
        CHECK(sample_observations(pool, 0.0, 3).size() == 0);
    }
    SUBCASE("p=0.2 kept count lies within the binomial bound") {
        for (uint64_t seed : {1ull, 42ull, 12345ull}) {
            const int kept = sample_observations(pool, 0.2, seed).size();
            CHECK(kept > 1607 - 144);
            CHECK(kept < 1607 + 144);
        }
    }
    SUBCASE("deterministic per seed") {
        auto a = sample_observations(pool, 0.2, 99);
        auto b = sample_observations(pool, 0.2, 99);
        REQUIRE(a.size() == b.size());
        for (int i = 0; i < a.size(); ++i) {
            CHECK(a.obs[i].depth_index == b.obs[i].depth_index);
            CHECK(a.obs[i].time_index == b.obs[i].time_index);
        }
    }
    SUBCASE("disjoint seeds intersect within binomial expectation") {
        auto a = sample_observations(pool, 0.2, 7);
        auto b = sample_observations(pool, 0.2, 8);
        std::set<std::pair<int, int>> in_a;
        for (const auto& o : a.obs) in_a.insert({o.depth_index, o.time_index});
        int common = 0;
        for (const auto& o : b.obs) common += in_a.count({o.depth_index, o.time_index});
        // mean p^2 N = 321.5, sigma = sqrt(N p^2 (1-p^2)) ~ 17.6
        CHECK(common > 321 - 4 * 18);
        CHECK(common < 322 + 4 * 18);
    }
    SUBCASE("invalid fraction is rejected") {
        CHECK_THROWS_AS(sample_observations(pool, -0.1, 1), DataError);
        CHECK_THROWS_AS(sample_observations(pool, 1.1, 1), DataError);
    }
}

TEST_CASE("profile minting samples the field on a regular grid") {
    TemperatureField f = TemperatureField::zeros(4, 30);
    for (int t = 0; t < 30; ++t)
        for (int d = 0; d < 4; ++d) f.at(d, t) = t + 0.1 * d;
    ObservationSet set = mint_profile_observations(f, 7, {0, 30});
    CHECK(set.size() == 5 * 4);  // days 0,7,14,21,28
    CHECK(set.obs[0].temp_c == 0.0);
    set.validate(4, 30);
    ObservationSet windowed = set.in_window(7, 21);
    CHECK(windowed.size() == 2 * 4);
}

TEST_CASE("feature assembly standardizes with training-window statistics") {
    MeteoSeries s = synthetic_series(60);
    LakeGeometry g = make_geometry("cone", 100.0, 2.0);  // 4 layers
    FeatureConfig cfg;
    const std::vector<std::pair<int, int>> windows = {{0, 40}};
    FeatureMatrix fm = build_features(s, g, cfg, windows);
    // 7 drivers + depth + sin + cos
    CHECK(fm.n_features == 10);
    CHECK(fm.stats.dropped.empty());

    SUBCASE("training-window mean ~0 and std ~1") {
        for (int f = 0; f < fm.n_features; ++f) {
            double acc = 0.0;
            int64_t n = 0;
            for (int d = 0; d < fm.n_depths; ++d)
                for (int t = 0; t < 40; ++t) {
                    acc += fm.at(d, t, f);
                    ++n;
                }
            const double mean = acc / n;
            double sq = 0.0;
            for (int d = 0; d < fm.n_depths; ++d)
                for (int t = 0; t < 40; ++t) sq += (fm.at(d, t, f) - mean) * (fm.at(d, t, f) - mean);
            const double sd = std::sqrt(sq / n);
            CHECK(std::abs(mean) < 1e-10);
            CHECK(std::abs(sd - 1.0) < 1e-10);
        }
    }
    SUBCASE("depth column is constant within a sequence") {
        const int f_depth = 7;  // after the 7 drivers
        CHECK(fm.stats.names[f_depth] == "depth");
        for (int d = 0; d < fm.n_depths; ++d)
            for (int t = 1; t < fm.n_days; ++t)
                CHECK(fm.at(d, t, f_depth) == fm.at(d, 0, f_depth));
        CHECK(fm.at(0, 0, f_depth) != fm.at(3, 0, f_depth));
    }
    SUBCASE("statistics reuse reproduces the same features") {
        FeatureMatrix fm2 = build_features(s, g, fm.stats);
        REQUIRE(fm2.data.size() == fm.data.size());
        for (size_t i = 0; i < fm.data.size(); ++i) CHECK(fm2.data[i] == fm.data[i]);
    }
    SUBCASE("window tensor layout is t-major with depth minor") {
        Tensor w = fm.window_tensor(10, 14);
        CHECK(w.rows() == 4 * fm.n_depths);
        CHECK(w.cols() == fm.n_features);
        // row (t*B + d) holds features(depth d, day 10+t)
        CHECK(w.value_at((2 * fm.n_depths + 3) * fm.n_features + 5) == fm.at(3, 12, 5));
    }
}

TEST_CASE("zero-variance features are dropped with a record") {
    MeteoSeries s = synthetic_series(50);
    for (auto& d : s.days) {
        d.frozen = false;  // constant flag
        d.snowing = false;
    }
    LakeGeometry g = make_geometry("barrel", 10.0, 1.0);
    FeatureMatrix fm = build_features(s, g, FeatureConfig{}, {{0, 50}});
    CHECK(fm.n_features == 8);
    CHECK(fm.stats.dropped == std::vector<std::string>{"frozen", "snowing"});
}

TEST_CASE("raw day-of-year mode is available") {
    MeteoSeries s = synthetic_series(50);
    LakeGeometry g = make_geometry("barrel", 10.0, 1.0);
    FeatureConfig cfg;
    cfg.doy_sincos = false;
    FeatureMatrix fm = build_features(s, g, cfg, {{0, 50}});
    CHECK(std::find(fm.stats.names.begin(), fm.stats.names.end(), "doy") !=
          fm.stats.names.end());
}

TEST_CASE("periodic day-of-year encoding has no year-end discontinuity") {
    const double two_pi = 6.283185307179586;
    const double ds = std::abs(std::sin(two_pi * 366.0 / 366.0) - std::sin(two_pi * 1.0 / 366.0));
    const double dc = std::abs(std::cos(two_pi * 366.0 / 366.0) - std::cos(two_pi * 1.0 / 366.0));
    CHECK(ds < 0.0172);
    CHECK(dc < 0.0172);
    // and through the pipeline: a leap-year boundary
    MeteoSeries s;
    auto d0 = std::chrono::sys_days(std::chrono::year{2000} / 12 / 30);
    for (int i = 0; i < 4; ++i) {
        MeteoDay d;
        d.date = d0 + std::chrono::days{i};
        d.shortwave = 100 + i;
        d.longwave = 300;
        d.air_temp = i;
        d.rel_humidity = 70;
        d.wind = 3 + i;
        s.days.push_back(d);
    }
    CHECK(s.day_of_year(1) == 366);
    CHECK(s.day_of_year(2) == 1);
}
