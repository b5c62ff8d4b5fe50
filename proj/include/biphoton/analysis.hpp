#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "biphoton/fit.hpp"
#include "biphoton/frames.hpp"
#include "biphoton/model.hpp"
#include "biphoton/parallel.hpp"

namespace biphoton {

/// Per-pixel mean and sample standard deviation of shutter-closed frames.
struct DarkCalibration {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<double> mean;
    std::vector<double> stddev;

    double mean_at(std::size_t x, std::size_t y) const { return mean[y * width + x]; }
    double stddev_at(std::size_t x, std::size_t y) const { return stddev[y * width + x]; }
};

/// Streaming variant: make_loader() yields an independent frame loader per
/// worker range, each producing frame i on demand for i in [0, n).
inline DarkCalibration calibrate_dark_stream(
    std::size_t n_frames,
    const std::function<std::function<Frame(std::size_t)>()>& make_loader, unsigned workers = 1) {
    if (n_frames < 2) throw ValidationError("dark calibration needs at least 2 frames");
    Frame first = make_loader()(0);
    const std::size_t npx = first.data.size();

    // Exact integer moments, so the result is independent of frame order and
    // worker count.
    std::vector<std::uint64_t> sum(npx, 0), sumsq(npx, 0);
    std::mutex merge_mutex;
    parallel_ranges(n_frames, workers, [&](std::size_t lo, std::size_t hi) {
        auto loader = make_loader();
        std::vector<std::uint64_t> lsum(npx, 0), lsumsq(npx, 0);
        for (std::size_t i = lo; i < hi; ++i) {
            Frame f = loader(i);
            if (f.data.size() != npx || f.width != first.width)
                throw ValidationError("dark stack contains mismatched frame dimensions");
            for (std::size_t p = 0; p < npx; ++p) {
                const std::uint64_t v = f.data[p];
                lsum[p] += v;
                lsumsq[p] += v * v;
            }
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        for (std::size_t p = 0; p < npx; ++p) {
            sum[p] += lsum[p];
            sumsq[p] += lsumsq[p];
        }
    });

    DarkCalibration calib;
    calib.width = first.width;
    calib.height = first.height;
    calib.mean.resize(npx);
    calib.stddev.resize(npx);
    const double n = double(n_frames);
    for (std::size_t p = 0; p < npx; ++p) {
        const double m = double(sum[p]) / n;
        calib.mean[p] = m;
        // sample variance, denominator N-1; exact integer sums keep this
        // non-negative up to rounding
        const double var = (double(sumsq[p]) - n * m * m) / (n - 1.0);
        calib.stddev[p] = std::sqrt(std::max(0.0, var));
    }
    return calib;
}

inline DarkCalibration calibrate_dark(const FrameStack& dark, unsigned workers = 1) {
    dark.validate();
    return calibrate_dark_stream(
        dark.frame_count(),
        [&] { return [&](std::size_t i) { return dark.frames[i]; }; }, workers);
}

/// Per-pixel noise gate: a pixel whose dark-subtracted excess falls strictly
/// below the dark standard deviation is zeroed, otherwise the original raw
/// value is kept.
inline Frame threshold_frame(const Frame& frame, const DarkCalibration& calib) {
    if (frame.width != calib.width || frame.height != calib.height)
        throw ValidationError("frame/calibration dimension mismatch");
    Frame out(frame.width, frame.height);
    for (std::size_t p = 0; p < frame.data.size(); ++p) {
        const double excess = double(frame.data[p]) - calib.mean[p];
        out.data[p] = excess < calib.stddev[p] ? 0 : frame.data[p];
    }
    return out;
}

/// Collapses a frame onto one axis. Axis::X sums each column over rows,
/// Axis::Y sums each row over columns.
inline std::vector<std::uint32_t> marginalize(const Frame& frame, Axis axis) {
    const std::size_t n = axis == Axis::X ? frame.width : frame.height;
    std::vector<std::uint32_t> out(n, 0);
    for (std::size_t y = 0; y < frame.height; ++y) {
        const std::uint16_t* row = frame.data.data() + y * frame.width;
        if (axis == Axis::X) {
            for (std::size_t x = 0; x < frame.width; ++x) out[x] += row[x];
        } else {
            std::uint32_t acc = 0;
            for (std::size_t x = 0; x < frame.width; ++x) acc += row[x];
            out[y] += acc;
        }
    }
    return out;
}

/// Integer accumulators of the joint-detection-probability estimator.
/// same_frame_sum collects outer products of each frame's marginal with
/// itself; cross_frame_sum collects both orders of the consecutive-frame
/// outer products (so it holds twice the symmetrized sum); marginal_sum
/// carries the summed marginal intensity for centroid estimation. All fields
/// merge by addition, so block-parallel accumulation is exact.
struct JdpMatrix {
    Axis axis = Axis::X;
    std::size_t n = 0;
    std::vector<std::uint64_t> same_frame_sum;  // n*n
    std::vector<std::uint64_t> cross_frame_sum; // n*n, both orders
    std::vector<std::uint64_t> marginal_sum;    // n
    std::uint64_t frames_processed = 0;
    std::uint64_t pairs_processed = 0;

    explicit JdpMatrix(Axis a = Axis::X, std::size_t dim = 0)
        : axis(a), n(dim), same_frame_sum(dim * dim, 0), cross_frame_sum(dim * dim, 0),
          marginal_sum(dim, 0) {}

    void merge(const JdpMatrix& other) {
        if (other.n != n || other.axis != axis) throw ValidationError("JDP merge mismatch");
        for (std::size_t i = 0; i < same_frame_sum.size(); ++i) {
            same_frame_sum[i] += other.same_frame_sum[i];
            cross_frame_sum[i] += other.cross_frame_sum[i];
        }
        for (std::size_t i = 0; i < n; ++i) marginal_sum[i] += other.marginal_sum[i];
        frames_processed += other.frames_processed;
        pairs_processed += other.pairs_processed;
    }

    bool operator==(const JdpMatrix&) const = default;
};

namespace detail {

inline void gather_nonzero(std::span<const std::uint32_t> m, std::vector<std::uint32_t>& idx) {
    idx.clear();
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i] != 0) idx.push_back(std::uint32_t(i));
}

} // namespace detail

/// Accumulates the marginals with indices [lo, hi) of a stack of total_frames
/// marginals: same-frame terms for every l in the range and consecutive-pair
/// cross terms for every l with l+1 < total_frames. Blocks covering a
/// partition of [0, total) merge to exactly the sequential result.
inline JdpMatrix accumulate_jdp_range(
    Axis axis, std::size_t n, std::size_t lo, std::size_t hi, std::size_t total_frames,
    const std::function<std::span<const std::uint32_t>(std::size_t)>& marginal_at) {
    JdpMatrix acc(axis, n);
    std::vector<std::uint32_t> nz_a, nz_b;
    for (std::size_t l = lo; l < hi; ++l) {
        const std::span<const std::uint32_t> m = marginal_at(l);
        detail::gather_nonzero(m, nz_a);
        for (const std::uint32_t i : nz_a) {
            const std::uint64_t mi = m[i];
            acc.marginal_sum[i] += mi;
            std::uint64_t* row = acc.same_frame_sum.data() + std::size_t(i) * n;
            for (const std::uint32_t j : nz_a) row[j] += mi * m[j];
        }
        if (l + 1 < total_frames) {
            const std::span<const std::uint32_t> next = marginal_at(l + 1);
            detail::gather_nonzero(next, nz_b);
            for (const std::uint32_t i : nz_a) {
                const std::uint64_t mi = m[i];
                for (const std::uint32_t j : nz_b) {
                    const std::uint64_t p = mi * next[j];
                    acc.cross_frame_sum[std::size_t(i) * n + j] += p;
                    acc.cross_frame_sum[std::size_t(j) * n + i] += p;
                }
            }
            acc.pairs_processed += 1;
        }
        acc.frames_processed += 1;
    }
    return acc;
}

/// Estimator over pre-thresholded marginal vectors.
inline JdpMatrix accumulate_jdp_marginals(std::span<const std::vector<std::uint32_t>> marginals,
                                          Axis axis, unsigned workers = 1) {
    if (marginals.size() < 2) throw ValidationError("JDP accumulation needs at least 2 frames");
    const std::size_t n = marginals.front().size();
    JdpMatrix result(axis, n);
    std::mutex merge_mutex;
    parallel_ranges(marginals.size(), workers, [&](std::size_t lo, std::size_t hi) {
        JdpMatrix block = accumulate_jdp_range(
            axis, n, lo, hi, marginals.size(),
            [&](std::size_t l) { return std::span<const std::uint32_t>(marginals[l]); });
        std::lock_guard<std::mutex> lock(merge_mutex);
        result.merge(block);
    });
    return result;
}

/// Estimator over an ordered stream of thresholded frames.
inline JdpMatrix accumulate_jdp(std::span<const Frame> thresholded, Axis axis,
                                unsigned workers = 1) {
    if (thresholded.size() < 2) throw ValidationError("JDP accumulation needs at least 2 frames");
    std::vector<std::vector<std::uint32_t>> marginals(thresholded.size());
    parallel_ranges(thresholded.size(), workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) marginals[i] = marginalize(thresholded[i], axis);
    });
    return accumulate_jdp_marginals(marginals, axis, workers);
}

/// Resolved (noise-subtracted) estimator: mean same-frame outer product minus
/// the symmetrized mean of consecutive-frame outer products.
struct ResolvedJdp {
    Axis axis = Axis::X;
    std::size_t n = 0;
    std::vector<double> values;          // n*n
    std::vector<double> marginal_weight; // n

    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

inline ResolvedJdp resolve(const JdpMatrix& jdp) {
    if (jdp.frames_processed < 2 || jdp.pairs_processed < 1)
        throw ValidationError("JDP has too few frames to resolve");
    ResolvedJdp out;
    out.axis = jdp.axis;
    out.n = jdp.n;
    out.values.resize(jdp.n * jdp.n);
    out.marginal_weight.resize(jdp.n);
    const double inv_frames = 1.0 / double(jdp.frames_processed);
    const double inv_pairs = 1.0 / (2.0 * double(jdp.pairs_processed));
    for (std::size_t k = 0; k < out.values.size(); ++k)
        out.values[k] = double(jdp.same_frame_sum[k]) * inv_frames -
                        double(jdp.cross_frame_sum[k]) * inv_pairs;
    for (std::size_t i = 0; i < jdp.n; ++i) out.marginal_weight[i] = double(jdp.marginal_sum[i]);
    return out;
}

/// 1-D slice of the resolved JDP along the difference or sum coordinate.
struct CorrelationProfile {
    Coordinate coordinate = Coordinate::Difference;
    std::vector<int> offsets;
    std::vector<double> values;

    std::size_t size() const { return offsets.size(); }
};

/// Difference profiles average the entries with i - j = offset; sum profiles
/// average anti-diagonals i + j = s0 + offset, where s0 is twice the
/// marginal-intensity centroid rounded to the nearest integer. With
/// include_diagonal = false the i == j entries (self-correlations of a pixel
/// with itself, which carry photon shot noise rather than pair signal) are
/// left out, and offsets whose entry set becomes empty are omitted.
inline CorrelationProfile extract_profile(const ResolvedJdp& jdp, Coordinate coordinate,
                                          bool include_diagonal = true) {
    const std::size_t n = jdp.n;
    if (n == 0) throw ValidationError("cannot extract profile from empty JDP");
    CorrelationProfile profile;
    profile.coordinate = coordinate;

    if (coordinate == Coordinate::Difference) {
        for (long d = -long(n) + 1; d <= long(n) - 1; ++d) {
            double sum = 0.0;
            std::size_t count = 0;
            const long i_lo = std::max(0L, d);
            const long i_hi = std::min(long(n), long(n) + d);
            for (long i = i_lo; i < i_hi; ++i) {
                const long j = i - d;
                if (!include_diagonal && i == j) continue;
                sum += jdp.at(std::size_t(i), std::size_t(j));
                ++count;
            }
            if (count == 0) continue;
            profile.offsets.push_back(int(d));
            profile.values.push_back(sum / double(count));
        }
        return profile;
    }

    double wsum = 0.0, wpos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wsum += jdp.marginal_weight[i];
        wpos += jdp.marginal_weight[i] * double(i);
    }
    const double centroid = wsum > 0.0 ? wpos / wsum : 0.5 * double(n - 1);
    const long s0 = std::lround(2.0 * centroid);
    for (long s = 0; s <= 2 * long(n) - 2; ++s) {
        double sum = 0.0;
        std::size_t count = 0;
        const long i_lo = std::max(0L, s - long(n) + 1);
        const long i_hi = std::min(long(n) - 1, s);
        for (long i = i_lo; i <= i_hi; ++i) {
            const long j = s - i;
            if (!include_diagonal && i == j) continue;
            sum += jdp.at(std::size_t(i), std::size_t(j));
            ++count;
        }
        if (count == 0) continue;
        profile.offsets.push_back(int(s - s0));
        profile.values.push_back(sum / double(count));
    }
    return profile;
}

/// Two shared-center Gaussians plus a constant baseline, components sorted so
/// that width_signal <= width_noise.
struct DoubleGaussianFit {
    double amp_signal = 0.0;
    double width_signal_px = 0.0;
    double amp_noise = 0.0;
    double width_noise_px = 0.0;
    double baseline = 0.0;
    double center_px = 0.0;
    double residual_norm = 0.0;
    bool converged = false;
};

namespace detail {

// params: amp_s, log width_s, amp_n, log width_n, baseline, center.
// Widths are fitted in log-space to keep them positive.
inline double double_gaussian_model(std::span<const double> p, double x, std::span<double> g) {
    const double ws = std::exp(p[1]);
    const double wn = std::exp(p[3]);
    const double zs = (x - p[5]) / ws;
    const double zn = (x - p[5]) / wn;
    const double gs = std::exp(-0.5 * zs * zs);
    const double gn = std::exp(-0.5 * zn * zn);
    g[0] = gs;
    g[1] = p[0] * gs * zs * zs;
    g[2] = gn;
    g[3] = p[2] * gn * zn * zn;
    g[4] = 1.0;
    g[5] = p[0] * gs * zs / ws + p[2] * gn * zn / wn;
    return p[0] * gs + p[2] * gn + p[4];
}

// params: amp, log width, baseline, center.
inline double single_gaussian_model(std::span<const double> p, double x, std::span<double> g) {
    const double w = std::exp(p[1]);
    const double z = (x - p[3]) / w;
    const double gz = std::exp(-0.5 * z * z);
    g[0] = gz;
    g[1] = p[0] * gz * z * z;
    g[2] = 1.0;
    g[3] = p[0] * gz * z / w;
    return p[0] * gz + p[2];
}

inline void check_profile_fittable(const CorrelationProfile& profile) {
    if (profile.size() < 8) throw ValidationError("profile has fewer than 8 points");
    double lo = profile.values.front(), hi = lo;
    for (const double v : profile.values) {
        if (!std::isfinite(v)) throw ValidationError("profile contains non-finite values");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) throw FitError("profile is flat; nothing to fit");
}

// Center start: value-weighted centroid of the points within half maximum.
// Difference profiles are symmetric with the center bin excluded, so a raw
// argmax would tie-break to one side and seed the fit off-center.
inline double half_max_centroid(const CorrelationProfile& profile, double baseline,
                                double peak_value) {
    const double cut = baseline + 0.5 * (peak_value - baseline);
    double wsum = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (profile.values[i] < cut) continue;
        const double w = profile.values[i] - baseline;
        wsum += w;
        acc += w * profile.offsets[i];
    }
    return wsum > 0.0 ? acc / wsum : 0.0;
}

// Median of the values at the outer quartile of |offset|; robust baseline
// estimate that ignores the central structure.
inline double outer_baseline(const CorrelationProfile& profile) {
    std::vector<std::size_t> order(profile.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(profile.offsets[a]) > std::abs(profile.offsets[b]);
    });
    const std::size_t take = std::max<std::size_t>(2, profile.size() / 4);
    std::vector<double> tail(take);
    for (std::size_t i = 0; i < take; ++i) tail[i] = profile.values[order[i]];
    std::sort(tail.begin(), tail.end());
    return take % 2 == 1 ? tail[take / 2] : 0.5 * (tail[take / 2 - 1] + tail[take / 2]);
}

} // namespace detail

/// Least-squares fit of amp_s G(x; mu, w_s) + amp_n G(x; mu, w_n) + baseline.
/// Initialization: center at the profile argmax, signal width 1 px, noise
/// width a quarter of the offset span, amplitudes 70/30 of the peak over
/// baseline, baseline from the outer-quartile median.
inline DoubleGaussianFit fit_double_gaussian(const CorrelationProfile& profile) {
    detail::check_profile_fittable(profile);
    const std::size_t k = profile.size();

    const double baseline0 = detail::outer_baseline(profile);
    std::size_t peak_idx = 0;
    for (std::size_t i = 1; i < k; ++i)
        if (profile.values[i] > profile.values[peak_idx]) peak_idx = i;
    const double peak = profile.values[peak_idx] - baseline0;
    if (!(peak > 0.0)) throw FitError("profile has no peak above its baseline");
    const double center0 = detail::half_max_centroid(profile, baseline0,
                                                     profile.values[peak_idx]);
    const double span = double(profile.offsets.back() - profile.offsets.front());
    const double width_cap = std::log(4.0 * span);

    FitProblem problem;
    problem.model = detail::double_gaussian_model;
    problem.xs.assign(profile.offsets.begin(), profile.offsets.end());
    problem.ys = profile.values;
    problem.init = {0.7 * peak, std::log(1.0), 0.3 * peak, std::log(span / 8.0),
                    baseline0, center0};
    const double big = 1e300;
    problem.lower = {0.0, std::log(0.05), 0.0, std::log(0.05), -big,
                     double(profile.offsets.front())};
    problem.upper = {big, width_cap, big, width_cap, big, double(profile.offsets.back())};

    const FitOutcome outcome = least_squares_fit(problem);

    DoubleGaussianFit fit;
    fit.amp_signal = outcome.params[0];
    fit.width_signal_px = std::exp(outcome.params[1]);
    fit.amp_noise = outcome.params[2];
    fit.width_noise_px = std::exp(outcome.params[3]);
    fit.baseline = outcome.params[4];
    fit.center_px = outcome.params[5];
    fit.residual_norm = outcome.residual_norm;
    fit.converged = outcome.converged;
    if (fit.width_signal_px > fit.width_noise_px) {
        std::swap(fit.width_signal_px, fit.width_noise_px);
        std::swap(fit.amp_signal, fit.amp_noise);
    }
    return fit;
}

/// Combined standard deviation of the signal and noise components,
/// S = S_s S_n / sqrt(S_s^2 + S_n^2).
inline double resultant_width(const DoubleGaussianFit& fit) {
    if (!fit.converged) throw FitError("resultant width requires a converged fit");
    return fit.width_signal_px * fit.width_noise_px /
           std::hypot(fit.width_signal_px, fit.width_noise_px);
}

/// Pixel width to a crystal-plane length via the near-field magnification.
inline double to_position_width(double width_px, double pixel_pitch_m, double magnification) {
    if (!(width_px > 0.0) || !(pixel_pitch_m > 0.0) || !(magnification > 0.0))
        throw ValidationError("to_position_width inputs must be > 0");
    return width_px * pixel_pitch_m / magnification;
}

/// Pixel width to a transverse momentum width (hbar/m) via the far-field
/// mapping x = f k_x / k.
inline double to_momentum_width(double width_px, double pixel_pitch_m, double focal_length_m,
                                double spdc_wavelength_m) {
    if (!(width_px > 0.0) || !(pixel_pitch_m > 0.0) || !(focal_length_m > 0.0) ||
        !(spdc_wavelength_m > 0.0))
        throw ValidationError("to_momentum_width inputs must be > 0");
    const double k = 2.0 * std::numbers::pi / spdc_wavelength_m;
    return width_px * pixel_pitch_m * k / focal_length_m;
}

/// Measured conditional widths in physical units, one per axis and domain.
struct MeasuredWidths {
    double delta_x_m = 0.0;
    double delta_y_m = 0.0;
    double delta_px_hbar_per_m = 0.0;
    double delta_py_hbar_per_m = 0.0;

    void validate() const {
        if (!(delta_x_m > 0.0) || !(delta_y_m > 0.0) || !(delta_px_hbar_per_m > 0.0) ||
            !(delta_py_hbar_per_m > 0.0))
            throw ValidationError("measured widths must be > 0");
    }
};

/// Combines the four measured widths into gamma products, mode counts and
/// entanglement verdicts. The measured position width serves as the
/// sigma_minus estimate in the mode count.
inline EntanglementReport build_report(const MeasuredWidths& widths, const PumpBeam& pump) {
    widths.validate();
    pump.validate();
    EntanglementReport report;
    report.beta = asymmetry_factor(pump);
    report.gamma_x_hbar = widths.delta_x_m * widths.delta_px_hbar_per_m;
    report.gamma_y_hbar = widths.delta_y_m * widths.delta_py_hbar_per_m;
    report.modes_x = mode_count(pump.waist_x_m, widths.delta_x_m);
    report.modes_y = mode_count(pump.waist_y_m, widths.delta_y_m);
    report.entangled_x = epr_entangled(report.gamma_x_hbar);
    report.entangled_y = epr_entangled(report.gamma_y_hbar);
    return report;
}

} // namespace biphoton
