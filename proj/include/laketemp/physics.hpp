#pragma once

#include <span>
#include <vector>

#include "laketemp/dataio.hpp"
#include "laketemp/geometry.hpp"
#include "laketemp/tensor.hpp"

namespace laketemp {

/// Thermodynamic constants. C_E/C_H are bulk transfer coefficients over the
/// water surface; the rest are standard physical constants.
struct PhysicsConstants {
    double c_w = 4186.0;        // specific heat of water, J kg^-1 C^-1
    double alpha_sw = 0.07;     // short-wave albedo
    double alpha_lw = 0.03;     // long-wave albedo
    double eps_s = 0.97;        // emissivity of the water surface
    double sigma = 5.6697e-8;   // Stefan-Boltzmann, W m^-2 K^-4
    double nu_latent = 2.453e6; // latent heat of vaporization, J kg^-1
    double c_a = 1005.0;        // specific heat of air, J kg^-1 K^-1
    double omega = 0.622;       // molecular mass ratio water/dry air
    double s_rh = 1.0;          // relative humidity scaling factor
    double c_e = 1.3e-3;        // bulk transfer coefficient, latent
    double c_h = 1.3e-3;        // bulk transfer coefficient, sensible
    double p_default = 1013.0;  // hPa, used when drivers lack pressure
};

/// Freshwater density, kg/m^3. Single-peaked near 4 C with the exact anchor
/// rho(3.9863) = 1000. Valid for -5 <= T <= 45 (rejected outside).
double water_density(double temp_c);
/// The raw polynomial without the range check (simulator internals and the
/// differentiable path, where training transients may wander out of range).
double water_density_poly(double temp_c);
double water_density_poly_derivative(double temp_c);

/// Lake heat content per the layered sum U = c_w * sum_d a_d y_d rho_d dz, J.
double thermal_energy(std::span<const double> profile_c, const LakeGeometry& geometry,
                      const PhysicsConstants& pc = {});

/// Saturated vapor pressure at the water surface, hPa:
/// e_s = 10^(9.28603523 - 2322.37885/(T_s+273.15)).
double saturation_vapor_pressure(double t_surface_c);
/// e_a = (S_RH * RH/100) * e_s, hPa. RH outside [0,100] is rejected.
double vapor_pressure(double t_surface_c, double rel_humidity, const PhysicsConstants& pc = {});

/// Latent (evaporative) heat flux, W/m^2, positive when heat leaves the lake
/// (e_s > e_a). Air density follows rho_a = 0.348 (1+r)/(1+1.61r) p/T_a[K]
/// with mixing ratio r = omega e_a / (p - e_a).
double latent_heat_flux(double t_surface_c, double air_temp_c, double rel_humidity,
                        double wind_10m, double pressure_hpa, const PhysicsConstants& pc = {});
/// Sensible heat flux, W/m^2, positive when T_s > T_a (heat leaving).
double sensible_heat_flux(double t_surface_c, double air_temp_c, double wind_10m,
                          double pressure_hpa, double rel_humidity,
                          const PhysicsConstants& pc = {});

/// Back radiation eps_s * sigma * T_s[K]^4, W/m^2.
double back_radiation(double t_surface_c, const PhysicsConstants& pc = {});

/// All surface flux components for one day at a given surface temperature.
struct SurfaceFluxes {
    double sw_net = 0.0;     // R_SW (1 - alpha_SW)
    double lw_in_net = 0.0;  // R_LWin (1 - alpha_LW)
    double lw_out = 0.0;     // back radiation
    double latent = 0.0;     // E, positive out
    double sensible = 0.0;   // H, positive out
    double f_in() const { return sw_net + lw_in_net; }
    double f_out() const { return lw_out + latent + sensible; }
    double net_in() const { return f_in() - f_out(); }
};
SurfaceFluxes surface_fluxes(const MeteoDay& day, double t_surface_c,
                             const PhysicsConstants& pc = {});

/// Daily balance residual in W/m^2:
///   (U_{t+1} - U_t) / (A_0 * 86400) - [F_in - F_out],
/// with the field's top layer as surface temperature. t must not be the
/// final index.
double energy_balance_residual(const TemperatureField& field, const MeteoSeries& drivers,
                               const LakeGeometry& geometry, int t,
                               const PhysicsConstants& pc = {});

struct EnergyBudgetRow {
    double u_joules = 0.0;  // U_t
    double sw_net = 0.0;
    double lw_in_net = 0.0;
    double lw_out = 0.0;
    double latent = 0.0;
    double sensible = 0.0;
    double f_in = 0.0;
    double f_out = 0.0;
    double residual = 0.0;  // W/m^2
    bool ice_free = true;
};
/// One row per day transition t -> t+1 (n_days - 1 rows).
std::vector<EnergyBudgetRow> compute_energy_budget(const TemperatureField& field,
                                                   const MeteoSeries& drivers,
                                                   const LakeGeometry& geometry,
                                                   const PhysicsConstants& pc = {});

/// Thresholded conservation penalty: mean over ice-free days of
/// ReLU(|residual| - tau). Zero ice-free days is degenerate but valid.
struct EcLossValue {
    double value = 0.0;
    bool degenerate = false;  // no ice-free days
};
EcLossValue ec_loss(const std::vector<double>& residuals, const std::vector<bool>& ice_free,
                    double tau_ec);

// -- differentiable twins (tape path used inside the training loss) -----------

/// Density polynomial on a tensor, elementwise.
Tensor water_density_t(const Tensor& temp_c);
/// U for one day's profile [n_layers x 1]; returns a [1] scalar in joules.
Tensor thermal_energy_t(const Tensor& profile_c, const LakeGeometry& geometry,
                        const PhysicsConstants& pc = {});
/// Net incoming surface flux (F_in - F_out) in W/m^2 as a [1] scalar;
/// t_surface is a [1 x 1] slice of the predicted profile.
Tensor net_surface_flux_t(const MeteoDay& day, const Tensor& t_surface,
                          const PhysicsConstants& pc = {});

/// EC penalty over a window of per-step profile predictions ([B x 1] each,
/// aligned with drivers[day_offset + t]).
struct EcPenalty {
    Tensor value;       // [1] scalar
    int ice_free_days = 0;
};
EcPenalty ec_penalty_t(const std::vector<Tensor>& step_preds, const MeteoSeries& drivers,
                       int day_offset, const LakeGeometry& geometry, double tau_ec,
                       const PhysicsConstants& pc = {});

}  // namespace laketemp
