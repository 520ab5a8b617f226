#include "laketemp/physics.hpp"

#include <cmath>
#include <string>

#include "laketemp/errors.hpp"

namespace laketemp {

namespace {
constexpr double kKelvin = 273.15;
constexpr double kSecondsPerDay = 86400.0;
constexpr double kLn10 = 2.302585092994046;
// density polynomial coefficients
constexpr double kDa = 288.9414;
constexpr double kDb = 3.9863;
constexpr double kDc = 508929.2;
constexpr double kDd = 68.12963;
// Tabata vapor pressure
constexpr double kTabataA = 9.28603523;
constexpr double kTabataB = 2322.37885;
}  // namespace

double water_density_poly(double t) {
    return 1000.0 * (1.0 - (t + kDa) * (t - kDb) * (t - kDb) / (kDc * (t + kDd)));
}

double water_density_poly_derivative(double t) {
    const double u = (t + kDa) * (t - kDb) * (t - kDb);
    const double du = (t - kDb) * (t - kDb) + 2.0 * (t + kDa) * (t - kDb);
    const double v = t + kDd;
    return -1000.0 / kDc * (du * v - u) / (v * v);
}

double water_density(double temp_c) {
    if (temp_c < -5.0 || temp_c > 45.0)
        throw NumericError("water_density: temperature " + std::to_string(temp_c) +
                           " outside [-5, 45] C");
    return water_density_poly(temp_c);
}

double thermal_energy(std::span<const double> profile_c, const LakeGeometry& geometry,
                      const PhysicsConstants& pc) {
    if (static_cast<int>(profile_c.size()) != geometry.n_layers())
        throw DataError("thermal_energy: profile has " + std::to_string(profile_c.size()) +
                        " layers, geometry has " + std::to_string(geometry.n_layers()));
    double acc = 0.0;
    for (int d = 0; d < geometry.n_layers(); ++d)
        acc += geometry.areas[d] * profile_c[d] * water_density_poly(profile_c[d]);
    return pc.c_w * acc * LakeGeometry::kLayerThickness;
}

double saturation_vapor_pressure(double t_surface_c) {
    if (t_surface_c < -30.0)
        throw NumericError("saturation_vapor_pressure: surface temperature below -30 C");
    return std::pow(10.0, kTabataA - kTabataB / (t_surface_c + kKelvin));
}

double vapor_pressure(double t_surface_c, double rel_humidity, const PhysicsConstants& pc) {
    if (rel_humidity < 0.0 || rel_humidity > 100.0)
        throw NumericError("vapor_pressure: relative humidity outside [0, 100]");
    return (pc.s_rh * rel_humidity / 100.0) * saturation_vapor_pressure(t_surface_c);
}

namespace {

double air_density(double e_a_hpa, double pressure_hpa, double air_temp_c,
                   const PhysicsConstants& pc) {
    const double r = pc.omega * e_a_hpa / (pressure_hpa - e_a_hpa);
    return 0.348 * (1.0 + r) / (1.0 + 1.61 * r) * pressure_hpa / (air_temp_c + kKelvin);
}

void check_flux_inputs(double wind, double pressure) {
    if (wind < 0.0) throw NumericError("heat flux: wind speed must be non-negative");
    if (pressure <= 0.0) throw NumericError("heat flux: pressure must be positive");
}

}  // namespace

double latent_heat_flux(double t_surface_c, double air_temp_c, double rel_humidity,
                        double wind_10m, double pressure_hpa, const PhysicsConstants& pc) {
    check_flux_inputs(wind_10m, pressure_hpa);
    const double e_s = saturation_vapor_pressure(t_surface_c);
    const double e_a = vapor_pressure(t_surface_c, rel_humidity, pc);
    const double rho_a = air_density(e_a, pressure_hpa, air_temp_c, pc);
    return rho_a * pc.c_e * pc.nu_latent * wind_10m * (pc.omega / pressure_hpa) * (e_s - e_a);
}

double sensible_heat_flux(double t_surface_c, double air_temp_c, double wind_10m,
                          double pressure_hpa, double rel_humidity,
                          const PhysicsConstants& pc) {
    check_flux_inputs(wind_10m, pressure_hpa);
    const double e_a = vapor_pressure(t_surface_c, rel_humidity, pc);
    const double rho_a = air_density(e_a, pressure_hpa, air_temp_c, pc);
    return rho_a * pc.c_a * pc.c_h * wind_10m * (t_surface_c - air_temp_c);
}

double back_radiation(double t_surface_c, const PhysicsConstants& pc) {
    if (t_surface_c < -kKelvin)
        throw NumericError("back_radiation: temperature below absolute zero");
    const double tk = t_surface_c + kKelvin;
    return pc.eps_s * pc.sigma * tk * tk * tk * tk;
}

SurfaceFluxes surface_fluxes(const MeteoDay& day, double t_surface_c,
                             const PhysicsConstants& pc) {
    SurfaceFluxes f;
    f.sw_net = day.shortwave * (1.0 - pc.alpha_sw);
    f.lw_in_net = day.longwave * (1.0 - pc.alpha_lw);
    f.lw_out = back_radiation(t_surface_c, pc);
    f.latent = latent_heat_flux(t_surface_c, day.air_temp, day.rel_humidity, day.wind,
                                day.pressure, pc);
    f.sensible = sensible_heat_flux(t_surface_c, day.air_temp, day.wind, day.pressure,
                                    day.rel_humidity, pc);
    return f;
}

double energy_balance_residual(const TemperatureField& field, const MeteoSeries& drivers,
                               const LakeGeometry& geometry, int t,
                               const PhysicsConstants& pc) {
    if (t < 0 || t + 1 >= field.n_days)
        throw DataError("energy_balance_residual: day " + std::to_string(t) +
                        " has no successor in the field");
    if (field.n_days > drivers.size())
        throw DataError("energy_balance_residual: drivers shorter than the field");
    const auto p0 = field.profile(t);
    const auto p1 = field.profile(t + 1);
    const double u0 = thermal_energy(p0, geometry, pc);
    const double u1 = thermal_energy(p1, geometry, pc);
    const SurfaceFluxes f = surface_fluxes(drivers.days[t], field.at(0, t), pc);
    return (u1 - u0) / (geometry.surface_area() * kSecondsPerDay) - f.net_in();
}

std::vector<EnergyBudgetRow> compute_energy_budget(const TemperatureField& field,
                                                   const MeteoSeries& drivers,
                                                   const LakeGeometry& geometry,
                                                   const PhysicsConstants& pc) {
    if (field.n_days > drivers.size())
        throw DataError("energy budget: drivers shorter than the field");
    std::vector<EnergyBudgetRow> rows;
    rows.reserve(std::max(0, field.n_days - 1));
    double u_t = field.n_days > 0 ? thermal_energy(field.profile(0), geometry, pc) : 0.0;
    for (int t = 0; t + 1 < field.n_days; ++t) {
        const double u_next = thermal_energy(field.profile(t + 1), geometry, pc);
        const SurfaceFluxes f = surface_fluxes(drivers.days[t], field.at(0, t), pc);
        EnergyBudgetRow row;
        row.u_joules = u_t;
        row.sw_net = f.sw_net;
        row.lw_in_net = f.lw_in_net;
        row.lw_out = f.lw_out;
        row.latent = f.latent;
        row.sensible = f.sensible;
        row.f_in = f.f_in();
        row.f_out = f.f_out();
        row.residual =
            (u_next - u_t) / (geometry.surface_area() * kSecondsPerDay) - f.net_in();
        row.ice_free = !drivers.days[t].frozen;
        rows.push_back(row);
        u_t = u_next;
    }
    return rows;
}

EcLossValue ec_loss(const std::vector<double>& residuals, const std::vector<bool>& ice_free,
                    double tau_ec) {
    if (residuals.size() != ice_free.size())
        throw DataError("ec_loss: residual and mask lengths differ");
    double acc = 0.0;
    int count = 0;
    for (size_t i = 0; i < residuals.size(); ++i) {
        if (!ice_free[i]) continue;
        ++count;
        const double excess = std::abs(residuals[i]) - tau_ec;
        if (excess > 0.0) acc += excess;
    }
    if (count == 0) return {0.0, true};
    return {acc / count, false};
}

// -- differentiable twins ------------------------------------------------------

Tensor water_density_t(const Tensor& temp_c) {
    Tensor a = temp_c + kDa;
    Tensor b = temp_c - kDb;
    Tensor num = mul(a, mul(b, b));
    Tensor den = affine(temp_c, kDc, kDc * kDd);  // kDc * (T + kDd)
    return affine(divide(num, den), -1000.0, 1000.0);
}

Tensor thermal_energy_t(const Tensor& profile_c, const LakeGeometry& geometry,
                        const PhysicsConstants& pc) {
    if (profile_c.rows() != geometry.n_layers() || profile_c.cols() != 1)
        throw DataError("thermal_energy_t: profile shape does not match geometry");
    Tensor areas = Tensor::from_values({geometry.n_layers(), 1}, geometry.areas);
    Tensor weighted = mul(areas, mul(profile_c, water_density_t(profile_c)));
    return sum(weighted) * (pc.c_w * LakeGeometry::kLayerThickness);
}

Tensor net_surface_flux_t(const MeteoDay& day, const Tensor& t_surface,
                          const PhysicsConstants& pc) {
    if (t_surface.size() != 1)
        throw DataError("net_surface_flux_t: surface temperature must be a scalar");
    const double p = day.pressure;
    Tensor tsk = t_surface + kKelvin;
    Tensor one = Tensor::full(t_surface.shape(), 1.0);
    // e_s = 10^(A - B/T_K) written as exp(ln10 * (A - B/T_K))
    Tensor exponent = affine(divide(one, tsk), -kTabataB, kTabataA);
    Tensor e_s = exp(exponent * kLn10);
    Tensor e_a = e_s * (pc.s_rh * day.rel_humidity / 100.0);
    Tensor r = divide(e_a * pc.omega, affine(e_a, -1.0, p));
    Tensor rho_a = divide(r + 1.0, affine(r, 1.61, 1.0)) *
                   (0.348 * p / (day.air_temp + kKelvin));
    Tensor latent =
        mul(rho_a, e_s - e_a) * (pc.c_e * pc.nu_latent * day.wind * pc.omega / p);
    Tensor sensible = mul(rho_a, t_surface - day.air_temp) * (pc.c_a * pc.c_h * day.wind);
    Tensor tk2 = mul(tsk, tsk);
    Tensor lw_out = mul(tk2, tk2) * (pc.eps_s * pc.sigma);
    const double in_const =
        day.shortwave * (1.0 - pc.alpha_sw) + day.longwave * (1.0 - pc.alpha_lw);
    return sum(in_const - lw_out - latent - sensible);
}

EcPenalty ec_penalty_t(const std::vector<Tensor>& step_preds, const MeteoSeries& drivers,
                       int day_offset, const LakeGeometry& geometry, double tau_ec,
                       const PhysicsConstants& pc) {
    const int t_steps = static_cast<int>(step_preds.size());
    if (day_offset < 0 || day_offset + t_steps > drivers.size())
        throw DataError("ec_penalty_t: prediction window outside the driver series");

    std::vector<Tensor> energy(t_steps);
    for (int t = 0; t < t_steps; ++t)
        energy[t] = thermal_energy_t(step_preds[t], geometry, pc);

    const double per_area = 1.0 / (geometry.surface_area() * kSecondsPerDay);
    Tensor acc;
    int count = 0;
    for (int t = 0; t + 1 < t_steps; ++t) {
        const MeteoDay& day = drivers.days[day_offset + t];
        if (day.frozen) continue;
        Tensor t_surf = slice_rows(step_preds[t], 0, 1);
        Tensor net = net_surface_flux_t(day, t_surf, pc);
        Tensor residual = (energy[t + 1] - energy[t]) * per_area - net;
        Tensor penalty = relu(abs(residual) - tau_ec);
        acc = acc.defined() ? add(acc, penalty) : penalty;
        ++count;
    }
    if (count == 0) return {Tensor::scalar(0.0), 0};
    return {acc / static_cast<double>(count), count};
}

}  // namespace laketemp
