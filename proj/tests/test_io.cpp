#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "biphoton/config.hpp"
#include "biphoton/pipeline.hpp"
#include "biphoton/results_io.hpp"
#include "biphoton/simulator.hpp"
#include "biphoton/stack_io.hpp"

using namespace biphoton;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "biphoton_io_test";
    fs::create_directories(dir);
    return dir;
}

FrameStack sample_stack() {
    RandomStream rng = derive_stream(404, 0);
    FrameStack stack;
    stack.width = 9;
    stack.height = 5;
    stack.kind = StackKind::Far;
    stack.seed = 0xDEADBEEFCAFEF00Dull;
    for (int i = 0; i < 7; ++i) {
        Frame f(9, 5);
        for (auto& v : f.data) v = std::uint16_t(rng.uniform_below(65536));
        stack.frames.push_back(f);
    }
    stack.frames[0].data[0] = 0;
    stack.frames[0].data[1] = 65535;
    return stack;
}

} // namespace

TEST_CASE("BPFS stacks round-trip bit-exactly", "[io]") {
    const fs::path path = temp_dir() / "roundtrip.bpfs";
    const FrameStack stack = sample_stack();
    write_stack(path.string(), stack);
    const FrameStack back = read_stack(path.string());
    CHECK(back == stack);

    // streamed writer produces identical bytes
    const fs::path streamed = temp_dir() / "streamed.bpfs";
    write_stack_stream(streamed.string(), stack.width, stack.height, stack.kind, stack.seed,
                       stack.frame_count(), [&](std::size_t i) { return stack.frames[i]; }, 2, 3);
    std::ifstream a(path, std::ios::binary), b(streamed, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)),
                              std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)),
                              std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);

    // random access matches sequential
    StackReader reader(path.string());
    CHECK(reader.frame(3) == stack.frames[3]);
    CHECK(reader.frame(0) == stack.frames[0]);
}

TEST_CASE("BPFS rejects malformed files with distinct errors", "[io]") {
    const fs::path dir = temp_dir();
    const FrameStack stack = sample_stack();
    const fs::path good = dir / "good.bpfs";
    write_stack(good.string(), stack);

    SECTION("missing file") {
        CHECK_THROWS_AS(read_stack((dir / "nope.bpfs").string()), IoError);
    }

    SECTION("bad magic") {
        std::string bytes;
        {
            std::ifstream is(good, std::ios::binary);
            bytes.assign((std::istreambuf_iterator<char>(is)),
                         std::istreambuf_iterator<char>());
        }
        bytes[0] = 'X';
        const fs::path bad = dir / "bad_magic.bpfs";
        std::ofstream(bad, std::ios::binary) << bytes;
        CHECK_THROWS_AS(read_stack(bad.string()), FormatError);
    }

    SECTION("version mismatch") {
        std::string bytes;
        {
            std::ifstream is(good, std::ios::binary);
            bytes.assign((std::istreambuf_iterator<char>(is)),
                         std::istreambuf_iterator<char>());
        }
        bytes[4] = 9;
        const fs::path bad = dir / "bad_version.bpfs";
        std::ofstream(bad, std::ios::binary) << bytes;
        CHECK_THROWS_AS(read_stack(bad.string()), FormatError);
    }

    SECTION("truncated payload names expected and actual counts") {
        std::string bytes;
        {
            std::ifstream is(good, std::ios::binary);
            bytes.assign((std::istreambuf_iterator<char>(is)),
                         std::istreambuf_iterator<char>());
        }
        bytes.resize(bytes.size() - 45); // cut into the last 90-byte frame
        const fs::path bad = dir / "truncated.bpfs";
        std::ofstream(bad, std::ios::binary) << bytes;
        try {
            read_stack(bad.string());
            FAIL("expected TruncationError");
        } catch (const TruncationError& e) {
            const std::string what = e.what();
            CHECK(what.find("7") != std::string::npos);
            CHECK(what.find("6") != std::string::npos);
        }
    }
}

TEST_CASE("config documents parse with defaults and reject unknown keys", "[io]") {
    SECTION("canonical round trip") {
        ExperimentConfig cfg;
        cfg.pump.waist_y_m = 0.35 * cfg.pump.waist_x_m;
        cfg.seed = 99;
        cfg.signal_frames = 1234;
        const nlohmann::json j = config_to_json(cfg);
        const ExperimentConfig back = parse_config(j);
        CHECK(config_to_json(back) == j);
    }

    SECTION("minimal document uses defaults") {
        const ExperimentConfig cfg = parse_config({{"schema", kConfigSchema}});
        CHECK(cfg.camera.width_px == 64);
        CHECK(cfg.camera.pixel_pitch_m == 16e-6);
        CHECK(cfg.pump_wavelength_m == 405e-9);
        CHECK(cfg.crystal_spec().pump_wavelength_m == 405e-9);
        CHECK(cfg.far_focal_length_m == 100e-3);
    }

    SECTION("schema and unknown keys fail loud") {
        CHECK_THROWS_AS(parse_config({{"schema", "other/1"}}), ValidationError);
        CHECK_THROWS_AS(parse_config(nlohmann::json{}), ValidationError);
        CHECK_THROWS_AS(parse_config({{"schema", kConfigSchema}, {"typo", 1}}), ValidationError);
        CHECK_THROWS_AS(
            parse_config({{"schema", kConfigSchema}, {"pump", {{"waist_xm", 1e-4}}}}),
            ValidationError);
        CHECK_THROWS_AS(
            parse_config({{"schema", kConfigSchema}, {"camera", {{"em_gain", "high"}}}}),
            ValidationError);
    }

    SECTION("invalid physics is rejected") {
        CHECK_THROWS_AS(parse_config({{"schema", kConfigSchema},
                                      {"pump", {{"waist_x_m", -1.0}}}}),
                        ValidationError);
        CHECK_THROWS_AS(parse_config({{"schema", kConfigSchema},
                                      {"frames", {{"signal", 1}}}}),
                        ValidationError);
        CHECK_THROWS_AS(parse_config({{"schema", kConfigSchema},
                                      {"camera", {{"quantum_efficiency", 1.5}}}}),
                        ValidationError);
    }
}

TEST_CASE("results documents validate and round-trip", "[io]") {
    ExperimentConfig cfg;
    cfg.camera.width_px = 32;
    cfg.camera.height_px = 32;
    cfg.dark_frames = 200;
    cfg.signal_frames = 1500;
    cfg.source.mean_pairs_per_frame = 6.0;
    cfg.pump.waist_x_m = 350e-6;
    cfg.pump.waist_y_m = 350e-6;
    const RunReport report = run_pipeline(cfg, 2);
    const nlohmann::json j = results_to_json(report);

    const ParsedResults parsed = parse_results(j);
    CHECK(parsed.document == j);
    CHECK(config_to_json(parsed.config) == config_to_json(cfg));
    CHECK(parsed.widths.delta_x_m == report.widths.delta_x_m);
    CHECK(parsed.entanglement.entangled_x == report.entanglement.entangled_x);

    SECTION("unit tags are enforced") {
        nlohmann::json broken = j;
        broken["measured"]["delta_x"].erase("um");
        CHECK_THROWS_AS(parse_results(broken), ValidationError);

        nlohmann::json wrong = j;
        wrong["measured"]["delta_x"]["um"] = 1.0; // inconsistent rendering
        CHECK_THROWS_AS(parse_results(wrong), ValidationError);

        nlohmann::json extra = j;
        extra["entanglement"]["gamma_x"]["joule_seconds"] = 1.0;
        CHECK_THROWS_AS(parse_results(extra), ValidationError);
    }

    SECTION("unknown top-level keys are rejected") {
        nlohmann::json extra = j;
        extra["debug"] = true;
        CHECK_THROWS_AS(parse_results(extra), ValidationError);
    }
}

TEST_CASE("file-backed sources validate their headers", "[io]") {
    const fs::path dir = temp_dir();
    CameraConfig cam;
    cam.width_px = 16;
    cam.height_px = 16;
    const FrameStack dark = simulate_dark_stack(cam, 16, 7);
    const fs::path path = dir / "dark16.bpfs";
    write_stack(path.string(), dark);

    CHECK(file_source(path.string(), cam, StackKind::Dark).count == 16);
    CHECK_THROWS_AS(file_source(path.string(), cam, StackKind::Near), ValidationError);
    CameraConfig other = cam;
    other.width_px = 64;
    other.height_px = 64;
    CHECK_THROWS_AS(file_source(path.string(), other, StackKind::Dark), ValidationError);
}
