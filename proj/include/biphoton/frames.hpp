#pragma once

#include <cstdint>
#include <numbers>
#include <vector>

#include "biphoton/errors.hpp"

namespace biphoton {

/// Sensor geometry and the noise model knobs. Counts are in arbitrary camera
/// units; the analysis is threshold-and-correlate, so no absolute calibration
/// is needed.
struct CameraConfig {
    std::uint16_t width_px = 64;
    std::uint16_t height_px = 64;
    double pixel_pitch_m = 16e-6;
    double em_gain = 100.0;          // deterministic multiplier per photo-event
    double readout_noise_std = 1.5;  // Gaussian, in counts
    double dark_count_mean = 0.0015; // events per pixel per frame
    double quantum_efficiency = 0.5;
    std::uint32_t saturation = 65535;

    void validate() const {
        if (width_px < 8 || height_px < 8)
            throw ValidationError("camera must be at least 8x8 pixels");
        if (!(pixel_pitch_m > 0.0)) throw ValidationError("pixel pitch must be > 0");
        if (!(em_gain >= 1.0)) throw ValidationError("em_gain must be >= 1");
        if (!(readout_noise_std >= 0.0)) throw ValidationError("readout noise must be >= 0");
        if (!(dark_count_mean >= 0.0)) throw ValidationError("dark count mean must be >= 0");
        if (!(quantum_efficiency >= 0.0) || quantum_efficiency > 1.0)
            throw ValidationError("quantum efficiency must be in [0, 1]");
        if (saturation > 65535) throw ValidationError("saturation exceeds 16-bit storage");
    }

    std::size_t pixel_count() const { return std::size_t(width_px) * height_px; }
};

enum class ImagingMode { NearField, FarField };

/// Optical mapping from the crystal plane onto the sensor. Near field images
/// positions with magnification M; far field maps transverse wavevectors to
/// positions, x = f * k_x / k.
struct OpticsConfig {
    ImagingMode mode = ImagingMode::NearField;
    double magnification = 1.0;
    double focal_length_m = 100e-3;
    double spdc_wavelength_m = 810e-9;

    void validate() const {
        if (mode == ImagingMode::NearField && !(magnification > 0.0))
            throw ValidationError("near-field magnification must be > 0");
        if (mode == ImagingMode::FarField && !(focal_length_m > 0.0))
            throw ValidationError("far-field focal length must be > 0");
        if (!(spdc_wavelength_m > 0.0)) throw ValidationError("SPDC wavelength must be > 0");
    }

    double wavenumber() const { return 2.0 * std::numbers::pi / spdc_wavelength_m; }
};

/// Photon budget per frame. Exposure time is not modeled; the pair rate
/// absorbs it.
struct SourceConfig {
    double mean_pairs_per_frame = 8.0;
    double stray_mean_per_frame = 2.0;

    void validate() const {
        if (!(mean_pairs_per_frame >= 0.0) || !(stray_mean_per_frame >= 0.0))
            throw ValidationError("source rates must be >= 0");
    }
};

/// One exposure: row-major grid of camera counts.
struct Frame {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<std::uint16_t> data;

    Frame() = default;
    Frame(std::uint16_t w, std::uint16_t h) : width(w), height(h), data(std::size_t(w) * h, 0) {}

    std::uint16_t at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
    std::uint16_t& at(std::size_t x, std::size_t y) { return data[y * width + x]; }

    bool operator==(const Frame&) const = default;
};

enum class StackKind : std::uint8_t { Dark = 0, Near = 1, Far = 2 };

/// Ordered sequence of frames sharing one geometry, plus the seed that
/// generated them (0 for imported data).
struct FrameStack {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    StackKind kind = StackKind::Dark;
    std::uint64_t seed = 0;
    std::vector<Frame> frames;

    std::size_t frame_count() const { return frames.size(); }

    void validate() const {
        for (const Frame& f : frames)
            if (f.width != width || f.height != height)
                throw ValidationError("frame stack contains mismatched frame dimensions");
    }

    bool operator==(const FrameStack&) const = default;
};

} // namespace biphoton
