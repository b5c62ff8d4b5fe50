#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "biphoton/frames.hpp"
#include "biphoton/model.hpp"
#include "biphoton/parallel.hpp"
#include "biphoton/random.hpp"

namespace biphoton {

struct PlanePoint {
    double x = 0.0;
    double y = 0.0;
};

// A transverse wavevector, in 1/m (equivalently hbar/m momentum units).
struct Wavevector {
    double kx = 0.0;
    double ky = 0.0;
};

/// Draws one photon pair's crystal-plane positions. Per axis the sum
/// u ~ N(0, sigma_plus) and difference v ~ N(0, sigma_minus) are sampled and
/// the photons sit at (u+v)/2 and (u-v)/2; axes are independent.
inline std::pair<PlanePoint, PlanePoint> sample_pair_positions(const GaussianBiphotonModel& model,
                                                               RandomStream& rng) {
    const double ux = rng.normal() * model.sigma_plus_x_m;
    const double vx = rng.normal() * model.sigma_minus_m;
    const double uy = rng.normal() * model.sigma_plus_y_m;
    const double vy = rng.normal() * model.sigma_minus_m;
    return {PlanePoint{(ux + vx) * 0.5, (uy + vy) * 0.5},
            PlanePoint{(ux - vx) * 0.5, (uy - vy) * 0.5}};
}

/// Draws one pair's transverse wavevectors: the pair sum has std 1/sigma_plus
/// and the difference 1/sigma_minus per axis (anti-correlation).
inline std::pair<Wavevector, Wavevector> sample_pair_wavevectors(const GaussianBiphotonModel& model,
                                                                 RandomStream& rng) {
    const double sx = rng.normal() / model.sigma_plus_x_m;
    const double dx = rng.normal() / model.sigma_minus_m;
    const double sy = rng.normal() / model.sigma_plus_y_m;
    const double dy = rng.normal() / model.sigma_minus_m;
    return {Wavevector{(sx + dx) * 0.5, (sy + dy) * 0.5},
            Wavevector{(sx - dx) * 0.5, (sy - dy) * 0.5}};
}

/// Near-field mapping of a crystal-plane position onto the sensor plane.
inline PlanePoint map_to_camera(const OpticsConfig& optics, const PlanePoint& position) {
    if (optics.mode != ImagingMode::NearField)
        throw std::logic_error("position coordinates require near-field optics");
    return {optics.magnification * position.x, optics.magnification * position.y};
}

/// Far-field mapping of a transverse wavevector onto the sensor plane.
inline PlanePoint map_to_camera(const OpticsConfig& optics, const Wavevector& wavevector) {
    if (optics.mode != ImagingMode::FarField)
        throw std::logic_error("wavevector coordinates require far-field optics");
    const double scale = optics.focal_length_m / optics.wavenumber();
    return {scale * wavevector.kx, scale * wavevector.ky};
}

namespace detail {

// Sensor origin: the optical axis hits the corner between the two central
// pixels, so pixel i covers [(i - w/2) * pitch, (i + 1 - w/2) * pitch).
inline bool bin_to_pixel(const CameraConfig& camera, const PlanePoint& p, std::size_t& px,
                         std::size_t& py) {
    const double fx = std::floor(p.x / camera.pixel_pitch_m + camera.width_px * 0.5);
    const double fy = std::floor(p.y / camera.pixel_pitch_m + camera.height_px * 0.5);
    if (fx < 0.0 || fx >= camera.width_px || fy < 0.0 || fy >= camera.height_px) return false;
    px = std::size_t(fx);
    py = std::size_t(fy);
    return true;
}

inline void deposit_photon(const CameraConfig& camera, const PlanePoint& cam_point,
                           std::vector<std::uint32_t>& events) {
    std::size_t px, py;
    if (bin_to_pixel(camera, cam_point, px, py)) events[py * camera.width_px + px] += 1;
}

// Converts accumulated photo-events to camera counts: gain, readout noise,
// rounding, clamping. Row-major pixel order so the stream layout is fixed.
inline Frame read_out(const CameraConfig& camera, const std::vector<std::uint32_t>& events,
                      RandomStream& rng) {
    Frame frame(camera.width_px, camera.height_px);
    const std::size_t n = camera.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        double value = camera.em_gain * events[i];
        if (camera.readout_noise_std > 0.0) value += camera.readout_noise_std * rng.normal();
        long long rounded = std::llround(value);
        if (rounded < 0) rounded = 0;
        if (rounded > (long long)camera.saturation) rounded = camera.saturation;
        frame.data[i] = std::uint16_t(rounded);
    }
    return frame;
}

} // namespace detail

/// Renders one signal frame from the given stream. Draw order is fixed:
/// Poisson pair count; per pair the position/wavevector normals then one
/// survival uniform per photon (skipped at unit efficiency); Poisson stray
/// count and two pixel draws per stray; per pixel dark Poisson (row-major);
/// per pixel readout normal (row-major).
inline Frame render_frame(const GaussianBiphotonModel& model, const CameraConfig& camera,
                          const OpticsConfig& optics, const SourceConfig& source,
                          RandomStream& rng) {
    std::vector<std::uint32_t> events(camera.pixel_count(), 0);

    const std::uint64_t n_pairs = rng.poisson(source.mean_pairs_per_frame);
    const bool lossless = camera.quantum_efficiency >= 1.0;
    for (std::uint64_t p = 0; p < n_pairs; ++p) {
        PlanePoint cam_a, cam_b;
        if (optics.mode == ImagingMode::NearField) {
            const auto [a, b] = sample_pair_positions(model, rng);
            cam_a = map_to_camera(optics, a);
            cam_b = map_to_camera(optics, b);
        } else {
            const auto [a, b] = sample_pair_wavevectors(model, rng);
            cam_a = map_to_camera(optics, a);
            cam_b = map_to_camera(optics, b);
        }
        if (lossless || rng.uniform01() <= camera.quantum_efficiency)
            detail::deposit_photon(camera, cam_a, events);
        if (lossless || rng.uniform01() <= camera.quantum_efficiency)
            detail::deposit_photon(camera, cam_b, events);
    }

    const std::uint64_t n_stray = rng.poisson(source.stray_mean_per_frame);
    for (std::uint64_t s = 0; s < n_stray; ++s) {
        const std::size_t px = rng.uniform_below(camera.width_px);
        const std::size_t py = rng.uniform_below(camera.height_px);
        events[py * camera.width_px + px] += 1;
    }

    if (camera.dark_count_mean > 0.0) {
        const std::size_t n = camera.pixel_count();
        for (std::size_t i = 0; i < n; ++i)
            events[i] += std::uint32_t(rng.poisson(camera.dark_count_mean));
    }

    return detail::read_out(camera, events, rng);
}

/// Frame i of a stack is a pure function of (seed, i).
inline Frame simulate_frame(const GaussianBiphotonModel& model, const CameraConfig& camera,
                            const OpticsConfig& optics, const SourceConfig& source,
                            std::uint64_t seed, std::uint64_t index) {
    RandomStream rng = derive_stream(seed, index);
    return render_frame(model, camera, optics, source, rng);
}

/// Dark frame: dark events plus readout only.
inline Frame simulate_dark_frame(const CameraConfig& camera, std::uint64_t seed,
                                 std::uint64_t index) {
    RandomStream rng = derive_stream(seed, index);
    std::vector<std::uint32_t> events(camera.pixel_count(), 0);
    if (camera.dark_count_mean > 0.0) {
        for (std::size_t i = 0; i < events.size(); ++i)
            events[i] += std::uint32_t(rng.poisson(camera.dark_count_mean));
    }
    return detail::read_out(camera, events, rng);
}

/// Simulates n_frames signal frames. Bit-identical for any worker count.
inline FrameStack simulate_stack(const GaussianBiphotonModel& model, const CameraConfig& camera,
                                 const OpticsConfig& optics, const SourceConfig& source,
                                 std::size_t n_frames, std::uint64_t seed, unsigned workers = 1) {
    if (n_frames < 1) throw ValidationError("stack needs at least one frame");
    model.validate();
    camera.validate();
    optics.validate();
    source.validate();
    FrameStack stack;
    stack.width = camera.width_px;
    stack.height = camera.height_px;
    stack.kind = optics.mode == ImagingMode::NearField ? StackKind::Near : StackKind::Far;
    stack.seed = seed;
    stack.frames.resize(n_frames);
    parallel_ranges(n_frames, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            stack.frames[i] = simulate_frame(model, camera, optics, source, seed, i);
    });
    return stack;
}

/// Simulates n_frames shutter-closed frames.
inline FrameStack simulate_dark_stack(const CameraConfig& camera, std::size_t n_frames,
                                      std::uint64_t seed, unsigned workers = 1) {
    if (n_frames < 1) throw ValidationError("stack needs at least one frame");
    camera.validate();
    FrameStack stack;
    stack.width = camera.width_px;
    stack.height = camera.height_px;
    stack.kind = StackKind::Dark;
    stack.seed = seed;
    stack.frames.resize(n_frames);
    parallel_ranges(n_frames, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            stack.frames[i] = simulate_dark_frame(camera, seed, i);
    });
    return stack;
}

} // namespace biphoton
