#pragma once

// Brute-force numerical oracles for the closed-form model quantities. These
// integrate the wavefunction (or its Fourier transform) directly and never
// touch the formulas under test.

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

// Simpson integration of {1, x, x^2} moments of a sampled density.
template <typename Density>
Moments density_moments(Density&& rho, double lo, double hi, std::size_t intervals) {
    if (intervals % 2 == 1) ++intervals;
    const double h = (hi - lo) / double(intervals);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k <= intervals; ++k) {
        const double x = lo + h * double(k);
        const double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        const double f = rho(x);
        s0 += w * f;
        s1 += w * f * x;
        s2 += w * f * x * x;
    }
    Moments m;
    m.mean = s1 / s0;
    m.var = s2 / s0 - m.mean * m.mean;
    return m;
}

// Std of x_i at fixed x_s under |Psi|^2 for the double-Gaussian amplitude.
inline double conditional_position_std(double sigma_plus, double sigma_minus, double x_s) {
    auto rho = [=](double x_i) {
        const double sum = x_i + x_s;
        const double diff = x_i - x_s;
        return std::exp(-sum * sum / (2.0 * sigma_plus * sigma_plus) -
                        diff * diff / (2.0 * sigma_minus * sigma_minus));
    };
    const double reach = std::abs(x_s) + 12.0 * std::min(sigma_plus, sigma_minus);
    const std::size_t n = 40000;
    return std::sqrt(density_moments(rho, -reach, reach, n).var);
}

// Continuous Fourier transform of a Gaussian amplitude exp(-u^2 / (4 s^2)),
// evaluated by direct quadrature at momentum p.
inline std::complex<double> gaussian_amplitude_ft(double s, double p) {
    const double reach = 10.0 * std::sqrt(2.0) * s;
    const std::size_t intervals = 3000;
    const double h = 2.0 * reach / double(intervals);
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k <= intervals; ++k) {
        const double u = -reach + h * double(k);
        const double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        acc += w * std::exp(-u * u / (4.0 * s * s)) *
               std::exp(std::complex<double>(0.0, -p * u));
    }
    return acc * (h / 3.0);
}

// Std of p_i at fixed p_s under the momentum density obtained by Fourier
// transforming the amplitude. The amplitude factorizes in the rotated
// coordinates (x_i + x_s)/sqrt(2), (x_i - x_s)/sqrt(2); the transform of each
// factor is taken numerically and the joint density evaluated at
// p_u = (p_i + p_s)/sqrt(2), p_v = (p_i - p_s)/sqrt(2).
inline double conditional_momentum_std(double sigma_plus, double sigma_minus, double p_s) {
    // Psi(x_i, x_s) = exp(-(x_i+x_s)^2/(4 sp^2)) exp(-(x_i-x_s)^2/(4 sm^2));
    // with u = (x_i+x_s)/sqrt(2): exp(-u^2/(4 (sp/sqrt2)^2)). So the rotated
    // factor widths are sp/sqrt(2) and sm/sqrt(2).
    const double su = sigma_plus / std::sqrt(2.0);
    const double sv = sigma_minus / std::sqrt(2.0);
    auto rho = [=](double p_i) {
        const double pu = (p_i + p_s) / std::sqrt(2.0);
        const double pv = (p_i - p_s) / std::sqrt(2.0);
        const double fu = std::abs(gaussian_amplitude_ft(su, pu));
        const double fv = std::abs(gaussian_amplitude_ft(sv, pv));
        return fu * fu * fv * fv;
    };
    const double reach = std::abs(p_s) + 12.0 / std::max(sigma_plus, sigma_minus);
    const std::size_t n = 800;
    return std::sqrt(density_moments(rho, -reach, reach, n).var);
}

} // namespace oracle
