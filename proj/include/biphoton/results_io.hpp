#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "biphoton/pipeline.hpp"
#include "biphoton/svg.hpp"

namespace biphoton {

namespace results {

using json = nlohmann::json;

// Quantities carry explicit unit tags; lengths are stored in meters with a
// micrometer rendering alongside. The validator treats any deviation as a
// schema failure.
inline json length_json(double m) { return json{{"m", m}, {"um", m * 1e6}}; }
inline json momentum_json(double v) { return json{{"hbar_per_m", v}}; }
inline json action_json(double v) { return json{{"hbar", v}}; }

inline json fit_json(const DoubleGaussianFit& f) {
    return json{{"amp_signal", f.amp_signal},     {"width_signal_px", f.width_signal_px},
                {"amp_noise", f.amp_noise},       {"width_noise_px", f.width_noise_px},
                {"baseline", f.baseline},         {"center_px", f.center_px},
                {"residual_norm", f.residual_norm}, {"converged", f.converged}};
}

inline json single_fit_json(const SingleGaussianFit& f) {
    return json{{"amp", f.amp},           {"width_px", f.width_px},
                {"baseline", f.baseline}, {"center_px", f.center_px},
                {"residual_norm", f.residual_norm}, {"converged", f.converged}};
}

inline json pass_json(const AxisPassResult& pass, bool near_field) {
    json j{{"coordinate", pass.coordinate == Coordinate::Difference ? "difference" : "sum"},
           {"width_px", pass.width.width_px},
           {"width_model", pass.width.width_model},
           {"fit", fit_json(pass.width.fit)},
           {"single_fit", single_fit_json(pass.width.single)}};
    j["delta"] = near_field ? length_json(pass.delta) : momentum_json(pass.delta);
    return j;
}

} // namespace results

inline nlohmann::json results_to_json(const RunReport& report) {
    using namespace results;
    json j;
    j["schema"] = kResultsSchema;
    j["config"] = config_to_json(report.config);
    j["passes"] = json{{"near_x", pass_json(report.near_x, true)},
                       {"near_y", pass_json(report.near_y, true)},
                       {"far_x", pass_json(report.far_x, false)},
                       {"far_y", pass_json(report.far_y, false)}};
    j["measured"] = json{{"delta_x", length_json(report.widths.delta_x_m)},
                         {"delta_y", length_json(report.widths.delta_y_m)},
                         {"delta_px", momentum_json(report.widths.delta_px_hbar_per_m)},
                         {"delta_py", momentum_json(report.widths.delta_py_hbar_per_m)}};
    j["entanglement"] = json{{"beta", report.entanglement.beta},
                             {"gamma_x", action_json(report.entanglement.gamma_x_hbar)},
                             {"gamma_y", action_json(report.entanglement.gamma_y_hbar)},
                             {"modes_x", report.entanglement.modes_x},
                             {"modes_y", report.entanglement.modes_y},
                             {"entangled_x", report.entanglement.entangled_x},
                             {"entangled_y", report.entanglement.entangled_y}};
    j["theory"] = json{{"beta", report.theory.beta},
                       {"sigma_minus", length_json(report.theory.sigma_minus_m)},
                       {"sigma_plus_x", length_json(report.theory.sigma_plus_x_m)},
                       {"sigma_plus_y", length_json(report.theory.sigma_plus_y_m)},
                       {"delta_x", length_json(report.theory.delta_x_m)},
                       {"delta_y", length_json(report.theory.delta_y_m)},
                       {"delta_px", momentum_json(report.theory.delta_px_hbar_per_m)},
                       {"delta_py", momentum_json(report.theory.delta_py_hbar_per_m)},
                       {"gamma_x", action_json(report.theory.gamma_x_hbar)},
                       {"gamma_y", action_json(report.theory.gamma_y_hbar)},
                       {"modes_x", report.theory.modes_x},
                       {"modes_y", report.theory.modes_y}};
    return j;
}

namespace results {

inline double expect_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_number())
        throw ValidationError(where + "." + key + ": expected a number");
    return obj.at(key).get<double>();
}

inline bool expect_bool(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_boolean())
        throw ValidationError(where + "." + key + ": expected a boolean");
    return obj.at(key).get<bool>();
}

/// Lengths must be meters with a consistent micrometer rendering.
inline double expect_length(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError(where + "." + key + ": missing");
    const json& q = obj.at(key);
    detail::require_keys(q, {"m", "um"}, where + "." + key);
    const double m = expect_number(q, "m", where + "." + key);
    const double um = expect_number(q, "um", where + "." + key);
    if (std::abs(um - m * 1e6) > 1e-6 * std::max(1.0, std::abs(um)))
        throw ValidationError(where + "." + key + ": um rendering disagrees with meters");
    return m;
}

inline double expect_momentum(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError(where + "." + key + ": missing");
    const json& q = obj.at(key);
    detail::require_keys(q, {"hbar_per_m"}, where + "." + key);
    return expect_number(q, "hbar_per_m", where + "." + key);
}

inline double expect_action(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError(where + "." + key + ": missing");
    const json& q = obj.at(key);
    detail::require_keys(q, {"hbar"}, where + "." + key);
    return expect_number(q, "hbar", where + "." + key);
}

inline void validate_pass(const json& pass, bool near_field, const std::string& where) {
    detail::require_keys(pass, {"coordinate", "width_px", "width_model", "fit", "single_fit",
                                "delta"},
                         where);
    if (!pass.at("coordinate").is_string() || !pass.at("width_model").is_string())
        throw ValidationError(where + ": coordinate/width_model must be strings");
    expect_number(pass, "width_px", where);
    detail::require_keys(pass.at("fit"),
                         {"amp_signal", "width_signal_px", "amp_noise", "width_noise_px",
                          "baseline", "center_px", "residual_norm", "converged"},
                         where + ".fit");
    detail::require_keys(pass.at("single_fit"),
                         {"amp", "width_px", "baseline", "center_px", "residual_norm",
                          "converged"},
                         where + ".single_fit");
    if (near_field)
        expect_length(pass, "delta", where);
    else
        expect_momentum(pass, "delta", where);
}

} // namespace results

/// Summary of a parsed results document (everything except the bulk CSV
/// artifacts).
struct ParsedResults {
    ExperimentConfig config;
    MeasuredWidths widths;
    EntanglementReport entanglement;
    nlohmann::json document;
};

/// Strict schema validation and parse-back of a results document; unknown
/// keys, missing unit tags or inconsistent unit renderings are errors.
inline ParsedResults parse_results(const nlohmann::json& j) {
    using namespace results;
    detail::require_keys(j, {"schema", "config", "passes", "measured", "entanglement", "theory"},
                         "results");
    if (!j.contains("schema") || j.at("schema") != kResultsSchema)
        throw ValidationError(std::string("results.schema must be \"") + kResultsSchema + "\"");

    ParsedResults out;
    out.document = j;
    out.config = parse_config(j.at("config"));

    const json& passes = j.at("passes");
    detail::require_keys(passes, {"near_x", "near_y", "far_x", "far_y"}, "results.passes");
    validate_pass(passes.at("near_x"), true, "results.passes.near_x");
    validate_pass(passes.at("near_y"), true, "results.passes.near_y");
    validate_pass(passes.at("far_x"), false, "results.passes.far_x");
    validate_pass(passes.at("far_y"), false, "results.passes.far_y");

    const json& measured = j.at("measured");
    detail::require_keys(measured, {"delta_x", "delta_y", "delta_px", "delta_py"},
                         "results.measured");
    out.widths.delta_x_m = expect_length(measured, "delta_x", "results.measured");
    out.widths.delta_y_m = expect_length(measured, "delta_y", "results.measured");
    out.widths.delta_px_hbar_per_m = expect_momentum(measured, "delta_px", "results.measured");
    out.widths.delta_py_hbar_per_m = expect_momentum(measured, "delta_py", "results.measured");

    const json& ent = j.at("entanglement");
    detail::require_keys(ent, {"beta", "gamma_x", "gamma_y", "modes_x", "modes_y", "entangled_x",
                               "entangled_y"},
                         "results.entanglement");
    out.entanglement.beta = expect_number(ent, "beta", "results.entanglement");
    out.entanglement.gamma_x_hbar = expect_action(ent, "gamma_x", "results.entanglement");
    out.entanglement.gamma_y_hbar = expect_action(ent, "gamma_y", "results.entanglement");
    out.entanglement.modes_x = expect_number(ent, "modes_x", "results.entanglement");
    out.entanglement.modes_y = expect_number(ent, "modes_y", "results.entanglement");
    out.entanglement.entangled_x = expect_bool(ent, "entangled_x", "results.entanglement");
    out.entanglement.entangled_y = expect_bool(ent, "entangled_y", "results.entanglement");

    const json& theory = j.at("theory");
    detail::require_keys(theory,
                         {"beta", "sigma_minus", "sigma_plus_x", "sigma_plus_y", "delta_x",
                          "delta_y", "delta_px", "delta_py", "gamma_x", "gamma_y", "modes_x",
                          "modes_y"},
                         "results.theory");
    expect_length(theory, "sigma_minus", "results.theory");
    expect_length(theory, "delta_x", "results.theory");
    expect_momentum(theory, "delta_px", "results.theory");
    expect_action(theory, "gamma_x", "results.theory");
    return out;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path.string() + ": cannot open for writing");
    os << text;
    if (!os) throw IoError(path.string() + ": write failed");
}

inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline void write_profile_csv(const std::filesystem::path& path, const AxisPassResult& pass) {
    std::string text = "offset,jdp_value,fit_value\n";
    for (std::size_t i = 0; i < pass.profile.size(); ++i) {
        text += std::to_string(pass.profile.offsets[i]);
        text += ',';
        text += csv_number(pass.profile.values[i]);
        text += ',';
        text += csv_number(fitted_value(pass.width, pass.profile.offsets[i]));
        text += '\n';
    }
    write_text_file(path, text);
}

inline void write_jdp_csv(const std::filesystem::path& path, const ResolvedJdp& jdp) {
    std::string text;
    for (std::size_t i = 0; i < jdp.n; ++i) {
        for (std::size_t j = 0; j < jdp.n; ++j) {
            if (j) text += ',';
            text += csv_number(jdp.at(i, j));
        }
        text += '\n';
    }
    write_text_file(path, text);
}

inline void emit_pass(const std::filesystem::path& dir, const std::string& name,
                      const AxisPassResult& pass, bool plots) {
    write_profile_csv(dir / ("profile_" + name + ".csv"), pass);
    write_jdp_csv(dir / ("jdp_" + name + ".csv"), pass.resolved);
    if (plots) {
        svg::Series data{"JDP profile", "#1f6fb2", {}, {}, true};
        svg::Series fitted{"fit", "#c23b22", {}, {}, false};
        for (std::size_t i = 0; i < pass.profile.size(); ++i) {
            data.xs.push_back(pass.profile.offsets[i]);
            data.ys.push_back(pass.profile.values[i]);
            fitted.xs.push_back(pass.profile.offsets[i]);
            fitted.ys.push_back(fitted_value(pass.width, pass.profile.offsets[i]));
        }
        svg::write_line_plot((dir / ("profile_" + name + ".svg")).string(),
                             "profile " + name, {data, fitted});
        svg::write_heatmap((dir / ("jdp_" + name + ".svg")).string(), "JDP " + name,
                           pass.resolved.values, pass.resolved.n);
    }
}

} // namespace detail

/// Writes results.json, profile CSVs and resolved-JDP CSV dumps (plus SVG
/// plots on request) into the directory.
inline void emit_outputs(const RunReport& report, const std::filesystem::path& dir,
                         bool plots = false) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string() + ": cannot create output directory");
    detail::write_text_file(dir / "results.json", results_to_json(report).dump(2) + "\n");
    detail::emit_pass(dir, "near_x", report.near_x, plots);
    detail::emit_pass(dir, "near_y", report.near_y, plots);
    detail::emit_pass(dir, "far_x", report.far_x, plots);
    detail::emit_pass(dir, "far_y", report.far_y, plots);
}

namespace detail {

inline std::string beta_label(double beta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", beta);
    return buf;
}

} // namespace detail

/// Sweep artifacts: one row per beta in sweep.csv, one subdirectory per run,
/// optional gamma-versus-beta plot.
inline void emit_sweep_outputs(std::span<const RunReport> reports,
                               const std::filesystem::path& dir, bool plots = false) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string() + ": cannot create output directory");

    std::string csv =
        "beta,gamma_x_hbar,gamma_y_hbar,modes_x,modes_y,entangled_x,entangled_y,"
        "delta_x_um,delta_y_um,delta_px_hbar_per_m,delta_py_hbar_per_m\n";
    for (const RunReport& r : reports) {
        csv += detail::csv_number(r.entanglement.beta);
        csv += ',';
        csv += detail::csv_number(r.entanglement.gamma_x_hbar);
        csv += ',';
        csv += detail::csv_number(r.entanglement.gamma_y_hbar);
        csv += ',';
        csv += detail::csv_number(r.entanglement.modes_x);
        csv += ',';
        csv += detail::csv_number(r.entanglement.modes_y);
        csv += ',';
        csv += r.entanglement.entangled_x ? "true" : "false";
        csv += ',';
        csv += r.entanglement.entangled_y ? "true" : "false";
        csv += ',';
        csv += detail::csv_number(r.widths.delta_x_m * 1e6);
        csv += ',';
        csv += detail::csv_number(r.widths.delta_y_m * 1e6);
        csv += ',';
        csv += detail::csv_number(r.widths.delta_px_hbar_per_m);
        csv += ',';
        csv += detail::csv_number(r.widths.delta_py_hbar_per_m);
        csv += '\n';
        emit_outputs(r, dir / ("beta_" + detail::beta_label(r.entanglement.beta)), plots);
    }
    detail::write_text_file(dir / "sweep.csv", csv);

    if (plots && !reports.empty()) {
        svg::Series gx{"gamma_x", "#1f6fb2", {}, {}, false};
        svg::Series gy{"gamma_y", "#c23b22", {}, {}, false};
        for (const RunReport& r : reports) {
            gx.xs.push_back(r.entanglement.beta);
            gx.ys.push_back(r.entanglement.gamma_x_hbar);
            gy.xs.push_back(r.entanglement.beta);
            gy.ys.push_back(r.entanglement.gamma_y_hbar);
        }
        svg::write_line_plot((dir / "gamma_vs_beta.svg").string(),
                             "conditional uncertainty product vs asymmetry", {gx, gy});
    }
}

} // namespace biphoton
