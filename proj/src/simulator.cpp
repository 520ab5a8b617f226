#include "laketemp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "laketemp/errors.hpp"

namespace laketemp {

namespace {

constexpr double kSecondsPerDay = 86400.0;
constexpr double kDz = LakeGeometry::kLayerThickness;

/// Heat content of one layer in the layered-sum form, J.
double layer_heat(double temp_c, double area, double c_w) {
    return c_w * area * kDz * water_density_poly(temp_c) * temp_c;
}

/// Inverts layer_heat for T by Newton iteration. rho(T)*T is monotone over
/// the simulated range (|T rho'| << rho), so this converges in a few steps.
double solve_layer_temp(double target_joules, double area, double c_w, double guess) {
    const double cap = c_w * area * kDz;
    double t = guess + (target_joules - layer_heat(guess, area, c_w)) / (cap * 1000.0);
    for (int it = 0; it < 24; ++it) {
        const double f = cap * water_density_poly(t) * t - target_joules;
        const double fp =
            cap * (water_density_poly(t) + t * water_density_poly_derivative(t));
        const double step = f / fp;
        t -= step;
        if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(t))) return t;
    }
    throw NumericError("simulate: layer temperature inversion did not converge");
}

/// Merges density-unstable adjacent layers to their volume-weighted mean
/// until density is non-decreasing with depth.
void convective_mix(std::vector<double>& temps, const LakeGeometry& g) {
    struct Group {
        double volume;  // sum of a_d (dz cancels)
        double t_mean;
        int first, last;
    };
    std::vector<Group> stack;
    stack.reserve(temps.size());
    for (int d = 0; d < static_cast<int>(temps.size()); ++d) {
        stack.push_back({g.areas[d], temps[d], d, d});
        while (stack.size() >= 2) {
            Group& lower = stack[stack.size() - 1];
            Group& upper = stack[stack.size() - 2];
            if (water_density_poly(upper.t_mean) <= water_density_poly(lower.t_mean)) break;
            const double vol = upper.volume + lower.volume;
            upper.t_mean = (upper.volume * upper.t_mean + lower.volume * lower.t_mean) / vol;
            upper.volume = vol;
            upper.last = lower.last;
            stack.pop_back();
        }
    }
    for (const Group& grp : stack)
        for (int d = grp.first; d <= grp.last; ++d) temps[d] = grp.t_mean;
}

}  // namespace

double attenuate_shortwave(double r_sw_surface, double kw, double depth_m,
                           const PhysicsConstants& pc) {
    if (depth_m < 0.0) throw DataError("attenuate_shortwave: depth must be non-negative");
    if (kw <= 0.0) throw DataError("attenuate_shortwave: extinction must be positive");
    return r_sw_surface * (1.0 - pc.alpha_sw) * std::exp(-kw * depth_m);
}

SimResult simulate(const MeteoSeries& drivers, const LakeGeometry& geometry,
                   const SimConfig& config) {
    geometry.validate();
    drivers.validate();
    if (config.kw <= 0.0) throw DataError("simulate: kw must be positive");
    if (config.background_diffusivity < 0.0 || config.wind_mixing_coeff < 0.0)
        throw DataError("simulate: diffusivities must be non-negative");
    const int n = geometry.n_layers();
    const int n_days = drivers.size();
    const PhysicsConstants& pc = config.constants;

    std::vector<double> temps;
    if (config.initial_profile.empty()) {
        temps.assign(n, 4.0);
    } else if (static_cast<int>(config.initial_profile.size()) == n) {
        temps = config.initial_profile;
    } else {
        throw DataError("simulate: initial profile does not match the geometry");
    }

    // Stability of the explicit diffusion step. Area weighting can up-weight
    // a layer's loss rate by (a_d + a_{d+1})/a_d, so the classic K dt/dz^2
    // bound carries that factor.
    double max_wind = 0.0;
    for (const MeteoDay& d : drivers.days) max_wind = std::max(max_wind, d.wind);
    const double k_max = config.background_diffusivity + config.wind_mixing_coeff * max_wind;
    double ratio_max = 2.0;
    for (int d = 0; d + 1 < n; ++d)
        ratio_max = std::max(ratio_max, (geometry.areas[d] + geometry.areas[d + 1]) /
                                            geometry.areas[d]);
    const double dt_sub = kSecondsPerDay / config.diffusion_substeps;
    if (k_max * dt_sub / (kDz * kDz) * ratio_max > 0.5) {
        const int needed = static_cast<int>(
            std::ceil(k_max * kSecondsPerDay * ratio_max / (0.5 * kDz * kDz)));
        throw NumericError("simulate: diffusion stability violated at " +
                           std::to_string(config.diffusion_substeps) +
                           " substeps; need at least " + std::to_string(needed));
    }

    TemperatureField field = TemperatureField::zeros(n, n_days);
    for (int d = 0; d < n; ++d) field.at(d, 0) = temps[d];

    std::vector<double> delta_joules(n);
    std::vector<double> k_interface(std::max(0, n - 1));

    for (int t = 0; t + 1 < n_days; ++t) {
        const MeteoDay& day = drivers.days[t];
        const bool ice_free = !day.frozen;

        if (ice_free) {
            // Shortwave deposition: the flux through the top of layer d covers
            // area a_d; whatever is not transmitted through the (smaller)
            // bottom interface stays in the layer, including the sediment-
            // absorbed share at the walls. The bottom layer keeps the rest,
            // so the column absorbs exactly R_SW (1-alpha) A_0 per day.
            const double r0 = day.shortwave * (1.0 - pc.alpha_sw);
            for (int d = 0; d < n; ++d) {
                const double top =
                    r0 * std::exp(-config.kw * geometry.depth_at(d)) * geometry.areas[d];
                const double bottom =
                    d + 1 < n ? r0 * std::exp(-config.kw * geometry.depth_at(d + 1)) *
                                    geometry.areas[d + 1]
                              : 0.0;
                delta_joules[d] = (top - bottom) * kSecondsPerDay;
            }
            // Non-radiative surface exchange acts on the top layer.
            const SurfaceFluxes f = surface_fluxes(day, temps[0], pc);
            delta_joules[0] += (f.lw_in_net - f.lw_out - f.latent - f.sensible) *
                               geometry.surface_area() * kSecondsPerDay;
            for (int d = 0; d < n; ++d) {
                if (delta_joules[d] == 0.0) continue;
                const double u = layer_heat(temps[d], geometry.areas[d], pc.c_w);
                temps[d] = solve_layer_temp(u + delta_joules[d], geometry.areas[d], pc.c_w,
                                            temps[d]);
            }
        }

        // Vertical diffusion, energy-conserving explicit substeps. Wind
        // stirring is suspended under ice.
        for (int d = 0; d + 1 < n; ++d) {
            const double z = geometry.depth_at(d + 1);
            double k = config.background_diffusivity;
            if (ice_free)
                k += config.wind_mixing_coeff * day.wind *
                     std::exp(-z / config.wind_mixing_decay_m);
            k_interface[d] = k;
        }
        for (int sub = 0; sub < config.diffusion_substeps; ++sub) {
            std::fill(delta_joules.begin(), delta_joules.end(), 0.0);
            for (int d = 0; d + 1 < n; ++d) {
                const double rho_bar =
                    water_density_poly(0.5 * (temps[d] + temps[d + 1]));
                const double q = k_interface[d] * geometry.areas[d + 1] * pc.c_w * rho_bar *
                                 (temps[d] - temps[d + 1]) / kDz * dt_sub;
                delta_joules[d] -= q;
                delta_joules[d + 1] += q;
            }
            for (int d = 0; d < n; ++d) {
                if (delta_joules[d] == 0.0) continue;
                const double u = layer_heat(temps[d], geometry.areas[d], pc.c_w);
                temps[d] = solve_layer_temp(u + delta_joules[d], geometry.areas[d], pc.c_w,
                                            temps[d]);
            }
        }

        convective_mix(temps, geometry);

        for (int d = 0; d < n; ++d) field.at(d, t + 1) = temps[d];
    }

    SimResult result;
    result.field = std::move(field);
    result.budget = compute_energy_budget(result.field, drivers, geometry, pc);
    for (size_t t = 0; t < result.budget.size(); ++t) {
        if (result.budget[t].ice_free &&
            std::abs(result.budget[t].residual) > config.closure_tolerance)
            throw NumericError("simulate: energy budget failed to close on day " +
                               std::to_string(t) + " (residual " +
                               std::to_string(result.budget[t].residual) + " W/m^2)");
    }
    return result;
}

// -- driver generator -----------------------------------------------------------

namespace {

constexpr double kTwoPi = 6.283185307179586;

struct Ar1 {
    double phi;
    double sd;
    double state = 0.0;
    double step(std::mt19937_64& rng) {
        std::normal_distribution<double> n(0.0, sd * std::sqrt(1.0 - phi * phi));
        state = phi * state + n(rng);
        return state;
    }
};

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace

MeteoSeries synth_drivers(Climate climate, int years, uint64_t seed) {
    if (years < 1) throw DataError("synth_drivers: years must be >= 1");
    const bool warm = climate == Climate::warm;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> lw_noise(0.0, 8.0);
    std::normal_distribution<double> rain_amount(0.5, 0.4);
    Ar1 ar_air{0.75, 2.2};
    Ar1 ar_sw{0.5, 25.0};
    Ar1 ar_rh{0.6, 8.0};
    Ar1 ar_wind{0.7, 1.8};

    // Seasonal means: temperate air spans -10..25 C, warm spans 12..33 C
    // (mean offset 15 C); coldest around mid-January.
    const double t_mean = warm ? 22.5 : 7.5;
    const double t_amp = warm ? 10.5 : 17.5;
    const double sw_mean = warm ? 210.0 : 170.0;
    const double sw_amp = warm ? 70.0 : 115.0;
    const double rh_mean = warm ? 75.0 : 72.0;

    MeteoSeries series;
    const auto day0 = std::chrono::sys_days(std::chrono::year{2000} / 1 / 1);
    const int n_days = years * 365;
    for (int i = 0; i < n_days; ++i) {
        MeteoDay d;
        d.date = day0 + std::chrono::days{i};
        const int doy = static_cast<int>((d.date - std::chrono::sys_days(
                                                       std::chrono::year_month_day(d.date)
                                                           .year() /
                                                       std::chrono::January / 1))
                                             .count()) +
                        1;
        const double phase = kTwoPi * (doy - 15) / 365.25;
        const double t_season = t_mean - t_amp * std::cos(phase);
        d.air_temp = clamp(t_season + ar_air.step(rng), t_mean - t_amp - 5.0,
                           t_mean + t_amp + 5.0);
        d.shortwave =
            clamp(sw_mean - sw_amp * std::cos(phase) + ar_sw.step(rng), 10.0, 420.0);
        d.longwave = clamp(250.0 + 3.2 * d.air_temp + lw_noise(rng), 150.0, 440.0);
        d.rel_humidity = clamp(rh_mean + ar_rh.step(rng), 35.0, 100.0);
        d.wind = clamp(4.0 + ar_wind.step(rng), 0.3, 15.0);
        // The freeze window follows the deterministic seasonal component so
        // the flag never flickers with day-to-day noise.
        d.frozen = !warm && t_season < -2.0;
        d.snowing = d.frozen && unit(rng) < 0.35;
        d.rain = unit(rng) < 0.3 ? std::abs(rain_amount(rng)) : 0.0;
        d.pressure = 1013.0;
        series.days.push_back(d);
    }
    series.validate();
    return series;
}

}  // namespace laketemp
