#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "biphoton/frames.hpp"
#include "biphoton/model.hpp"

namespace biphoton {

constexpr const char* kConfigSchema = "bpsim-config/1";

/// Everything one pipeline run needs. Defaults reproduce the reference
/// apparatus: 405 nm pump, 5 mm crystal, 64x64 sensor at 16 um, near-field
/// M = 1 and far-field f = 100 mm at 810 nm.
struct ExperimentConfig {
    PumpBeam pump;
    double pump_wavelength_m = 405e-9;
    CrystalSpec crystal; // pump_wavelength_m of the spec is filled from pump_wavelength_m
    CameraConfig camera;
    double near_magnification = 1.0;
    double far_focal_length_m = 100e-3;
    double spdc_wavelength_m = 810e-9;
    SourceConfig source;
    std::uint64_t dark_frames = 10000;
    std::uint64_t signal_frames = 50000;
    std::uint64_t seed = 1;

    CrystalSpec crystal_spec() const {
        CrystalSpec c = crystal;
        c.pump_wavelength_m = pump_wavelength_m;
        return c;
    }

    OpticsConfig near_optics() const {
        OpticsConfig o;
        o.mode = ImagingMode::NearField;
        o.magnification = near_magnification;
        o.spdc_wavelength_m = spdc_wavelength_m;
        return o;
    }

    OpticsConfig far_optics() const {
        OpticsConfig o;
        o.mode = ImagingMode::FarField;
        o.focal_length_m = far_focal_length_m;
        o.spdc_wavelength_m = spdc_wavelength_m;
        return o;
    }

    GaussianBiphotonModel model() const { return model_from_pump(pump, crystal_spec()); }

    void validate() const {
        pump.validate();
        crystal_spec().validate();
        camera.validate();
        near_optics().validate();
        far_optics().validate();
        source.validate();
        if (dark_frames < 2) throw ValidationError("dark_frames must be >= 2");
        if (signal_frames < 2) throw ValidationError("signal_frames must be >= 2");
    }
};

namespace detail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ValidationError(where + ": unknown key \"" + key + "\"");
}

inline double get_number(const json& obj, const char* key, double fallback,
                         const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ValidationError(where + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::uint64_t get_count(const json& obj, const char* key, std::uint64_t fallback,
                               const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_unsigned())
        throw ValidationError(where + "." + key + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
}

} // namespace detail

/// Parses a config document. Missing keys take defaults; unknown keys are
/// errors.
inline ExperimentConfig parse_config(const nlohmann::json& doc) {
    using detail::get_count;
    using detail::get_number;
    using detail::require_keys;

    require_keys(doc, {"schema", "seed", "frames", "pump", "crystal", "camera", "near", "far",
                       "source"},
                 "config");
    if (!doc.contains("schema") || !doc.at("schema").is_string() ||
        doc.at("schema").get<std::string>() != kConfigSchema)
        throw ValidationError(std::string("config.schema must be \"") + kConfigSchema + "\"");

    ExperimentConfig cfg;
    cfg.seed = get_count(doc, "seed", cfg.seed, "config");

    if (doc.contains("frames")) {
        const auto& frames = doc.at("frames");
        require_keys(frames, {"dark", "signal"}, "config.frames");
        cfg.dark_frames = get_count(frames, "dark", cfg.dark_frames, "config.frames");
        cfg.signal_frames = get_count(frames, "signal", cfg.signal_frames, "config.frames");
    }
    if (doc.contains("pump")) {
        const auto& pump = doc.at("pump");
        require_keys(pump, {"waist_x_m", "waist_y_m", "wavelength_m"}, "config.pump");
        cfg.pump.waist_x_m = get_number(pump, "waist_x_m", cfg.pump.waist_x_m, "config.pump");
        cfg.pump.waist_y_m = get_number(pump, "waist_y_m", cfg.pump.waist_y_m, "config.pump");
        cfg.pump_wavelength_m =
            get_number(pump, "wavelength_m", cfg.pump_wavelength_m, "config.pump");
    }
    if (doc.contains("crystal")) {
        const auto& crystal = doc.at("crystal");
        require_keys(crystal, {"length_m", "alpha"}, "config.crystal");
        cfg.crystal.length_m =
            get_number(crystal, "length_m", cfg.crystal.length_m, "config.crystal");
        cfg.crystal.alpha = get_number(crystal, "alpha", cfg.crystal.alpha, "config.crystal");
    }
    if (doc.contains("camera")) {
        const auto& cam = doc.at("camera");
        require_keys(cam,
                     {"width_px", "height_px", "pixel_pitch_m", "em_gain", "readout_noise_std",
                      "dark_count_mean", "quantum_efficiency", "saturation"},
                     "config.camera");
        cfg.camera.width_px =
            std::uint16_t(get_count(cam, "width_px", cfg.camera.width_px, "config.camera"));
        cfg.camera.height_px =
            std::uint16_t(get_count(cam, "height_px", cfg.camera.height_px, "config.camera"));
        cfg.camera.pixel_pitch_m =
            get_number(cam, "pixel_pitch_m", cfg.camera.pixel_pitch_m, "config.camera");
        cfg.camera.em_gain = get_number(cam, "em_gain", cfg.camera.em_gain, "config.camera");
        cfg.camera.readout_noise_std =
            get_number(cam, "readout_noise_std", cfg.camera.readout_noise_std, "config.camera");
        cfg.camera.dark_count_mean =
            get_number(cam, "dark_count_mean", cfg.camera.dark_count_mean, "config.camera");
        cfg.camera.quantum_efficiency =
            get_number(cam, "quantum_efficiency", cfg.camera.quantum_efficiency, "config.camera");
        cfg.camera.saturation =
            std::uint32_t(get_count(cam, "saturation", cfg.camera.saturation, "config.camera"));
    }
    if (doc.contains("near")) {
        const auto& near = doc.at("near");
        require_keys(near, {"magnification"}, "config.near");
        cfg.near_magnification =
            get_number(near, "magnification", cfg.near_magnification, "config.near");
    }
    if (doc.contains("far")) {
        const auto& far = doc.at("far");
        require_keys(far, {"focal_length_m", "spdc_wavelength_m"}, "config.far");
        cfg.far_focal_length_m =
            get_number(far, "focal_length_m", cfg.far_focal_length_m, "config.far");
        cfg.spdc_wavelength_m =
            get_number(far, "spdc_wavelength_m", cfg.spdc_wavelength_m, "config.far");
    }
    if (doc.contains("source")) {
        const auto& source = doc.at("source");
        require_keys(source, {"mean_pairs_per_frame", "stray_mean_per_frame"}, "config.source");
        cfg.source.mean_pairs_per_frame = get_number(source, "mean_pairs_per_frame",
                                                     cfg.source.mean_pairs_per_frame,
                                                     "config.source");
        cfg.source.stray_mean_per_frame = get_number(source, "stray_mean_per_frame",
                                                     cfg.source.stray_mean_per_frame,
                                                     "config.source");
    }
    cfg.validate();
    return cfg;
}

/// Canonical serialization; parse_config(config_to_json(c)) == c.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    return nlohmann::json{
        {"schema", kConfigSchema},
        {"seed", cfg.seed},
        {"frames", {{"dark", cfg.dark_frames}, {"signal", cfg.signal_frames}}},
        {"pump",
         {{"waist_x_m", cfg.pump.waist_x_m},
          {"waist_y_m", cfg.pump.waist_y_m},
          {"wavelength_m", cfg.pump_wavelength_m}}},
        {"crystal", {{"length_m", cfg.crystal.length_m}, {"alpha", cfg.crystal.alpha}}},
        {"camera",
         {{"width_px", cfg.camera.width_px},
          {"height_px", cfg.camera.height_px},
          {"pixel_pitch_m", cfg.camera.pixel_pitch_m},
          {"em_gain", cfg.camera.em_gain},
          {"readout_noise_std", cfg.camera.readout_noise_std},
          {"dark_count_mean", cfg.camera.dark_count_mean},
          {"quantum_efficiency", cfg.camera.quantum_efficiency},
          {"saturation", cfg.camera.saturation}}},
        {"near", {{"magnification", cfg.near_magnification}}},
        {"far",
         {{"focal_length_m", cfg.far_focal_length_m},
          {"spdc_wavelength_m", cfg.spdc_wavelength_m}}},
        {"source",
         {{"mean_pairs_per_frame", cfg.source.mean_pairs_per_frame},
          {"stray_mean_per_frame", cfg.source.stray_mean_per_frame}}}};
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(path + ": cannot open config");
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
    return parse_config(doc);
}

} // namespace biphoton
