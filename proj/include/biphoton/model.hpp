#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "biphoton/errors.hpp"

namespace biphoton {

enum class Axis { X, Y };
enum class Coordinate { Difference, Sum };
enum class Domain { Position, Momentum };

/// Nonlinear crystal parameters entering the position correlation length.
struct CrystalSpec {
    double length_m = 5e-3;
    double alpha = 0.455; // adjustment constant of the Gaussian approximation
    double pump_wavelength_m = 405e-9;

    void validate() const {
        if (!(length_m > 0.0)) throw ValidationError("crystal length must be > 0");
        if (!(alpha > 0.0) || alpha > 1.0) throw ValidationError("crystal alpha must be in (0, 1]");
        if (!(pump_wavelength_m > 0.0)) throw ValidationError("pump wavelength must be > 0");
    }
};

/// Pump beam waists along the transverse axes; an elliptical beam has
/// waist_y != waist_x.
struct PumpBeam {
    double waist_x_m = 766e-6;
    double waist_y_m = 766e-6;

    void validate() const {
        if (!(waist_x_m > 0.0) || !(waist_y_m > 0.0))
            throw ValidationError("pump waists must be > 0");
    }
};

/// Double-Gaussian biphoton amplitude: per axis the sum coordinate
/// (x_i + x_s) has standard deviation sigma_plus and the difference
/// coordinate sigma_minus. All densities derived from it are normalized
/// analytically.
struct GaussianBiphotonModel {
    double sigma_plus_x_m;
    double sigma_plus_y_m;
    double sigma_minus_m;

    void validate() const {
        if (!(sigma_plus_x_m > 0.0) || !(sigma_plus_y_m > 0.0) || !(sigma_minus_m > 0.0))
            throw ValidationError("model widths must be > 0");
    }

    double sigma_plus(Axis axis) const {
        return axis == Axis::X ? sigma_plus_x_m : sigma_plus_y_m;
    }

    /// True when the state is entangled on each axis (sigma_plus > sigma_minus).
    bool entangled_configuration() const {
        return sigma_plus_x_m > sigma_minus_m && sigma_plus_y_m > sigma_minus_m;
    }
};

struct EntanglementReport {
    double beta = 0.0;
    double gamma_x_hbar = 0.0;
    double gamma_y_hbar = 0.0;
    double modes_x = 0.0;
    double modes_y = 0.0;
    bool entangled_x = false;
    bool entangled_y = false;
};

/// Position correlation length sqrt(alpha * L * lambda_p / 2 pi); independent
/// of the pump shape.
inline double sigma_minus_from_crystal(const CrystalSpec& crystal) {
    crystal.validate();
    return std::sqrt(crystal.alpha * crystal.length_m * crystal.pump_wavelength_m /
                     (2.0 * std::numbers::pi));
}

/// beta = waist_y / waist_x.
inline double asymmetry_factor(const PumpBeam& pump) {
    pump.validate();
    return pump.waist_y_m / pump.waist_x_m;
}

/// Identification: the sum-coordinate width per axis equals the pump waist on
/// that axis, which makes the derived momentum correlation width 1/sigma_plus
/// scale as 1/waist.
inline GaussianBiphotonModel model_from_pump(const PumpBeam& pump, const CrystalSpec& crystal) {
    pump.validate();
    return GaussianBiphotonModel{pump.waist_x_m, pump.waist_y_m,
                                 sigma_minus_from_crystal(crystal)};
}

/// Std of x_i conditioned on x_s under |Psi|^2.
inline double conditional_position_width(double sigma_plus, double sigma_minus) {
    if (!(sigma_plus > 0.0) || !(sigma_minus > 0.0))
        throw ValidationError("widths must be > 0");
    return sigma_plus * sigma_minus / std::hypot(sigma_plus, sigma_minus);
}

/// Std of p_i conditioned on p_s, in hbar per meter.
inline double conditional_momentum_width(double sigma_plus, double sigma_minus) {
    if (!(sigma_plus > 0.0) || !(sigma_minus > 0.0))
        throw ValidationError("widths must be > 0");
    return 1.0 / std::hypot(sigma_plus, sigma_minus);
}

/// Conditional uncertainty product in units of hbar; < 0.5 certifies
/// EPR-like entanglement, and 0.5 is reached exactly at sigma_plus == sigma_minus.
inline double gamma_product(double sigma_plus, double sigma_minus) {
    return conditional_position_width(sigma_plus, sigma_minus) *
           conditional_momentum_width(sigma_plus, sigma_minus);
}

/// Spatial Schmidt-mode estimate (waist / sigma_minus)^2.
inline double mode_count(double waist, double sigma_minus) {
    if (!(waist > 0.0) || !(sigma_minus > 0.0))
        throw ValidationError("mode_count inputs must be > 0");
    const double r = waist / sigma_minus;
    return r * r;
}

/// Reid criterion, strict: exactly 0.5 hbar is not entangled.
inline bool epr_entangled(double gamma_hbar) {
    if (!(gamma_hbar >= 0.0)) throw ValidationError("gamma must be >= 0");
    return gamma_hbar < 0.5;
}

/// Width of the requested marginal coordinate of the model.
inline double marginal_width(const GaussianBiphotonModel& model, Axis axis,
                             Coordinate coordinate, Domain domain) {
    model.validate();
    const double sp = model.sigma_plus(axis);
    const double sm = model.sigma_minus_m;
    if (domain == Domain::Position)
        return coordinate == Coordinate::Difference ? sm : sp;
    return coordinate == Coordinate::Difference ? 1.0 / sm : 1.0 / sp;
}

/// Gaussian reference curve of the requested marginal, normalized to unit
/// peak. Grid must be nonempty and strictly increasing.
inline std::vector<double> theoretical_profile(const GaussianBiphotonModel& model, Axis axis,
                                               Coordinate coordinate, Domain domain,
                                               std::span<const double> grid) {
    if (grid.empty()) throw ValidationError("profile grid must be nonempty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ValidationError("profile grid must be strictly increasing");
    const double sigma = marginal_width(model, axis, coordinate, domain);
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double z = grid[i] / sigma;
        out[i] = std::exp(-0.5 * z * z);
    }
    return out;
}

} // namespace biphoton
