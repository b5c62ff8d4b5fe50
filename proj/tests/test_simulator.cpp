#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "biphoton/simulator.hpp"

using namespace biphoton;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct RunningStats {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        sumsq += v * v;
        ++n;
    }
    double mean() const { return sum / double(n); }
    double var() const { return sumsq / double(n) - mean() * mean(); }
    double std() const { return std::sqrt(var()); }
};

const GaussianBiphotonModel kRefModel{766e-6, 766e-6, 12.11e-6};

} // namespace

TEST_CASE("pair positions have the model's sum and difference statistics", "[simulator]") {
    RandomStream rng = derive_stream(11, 0);
    RunningStats sum_x, diff_x;
    double corr_acc = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = sample_pair_positions(kRefModel, rng);
        sum_x.add(a.x + b.x);
        diff_x.add(a.x - b.x);
        corr_acc += (a.x / kRefModel.sigma_plus_x_m) * (a.y / kRefModel.sigma_plus_y_m);
    }
    CHECK_THAT(sum_x.std(), WithinRel(kRefModel.sigma_plus_x_m, 0.005));
    CHECK_THAT(diff_x.std(), WithinRel(kRefModel.sigma_minus_m, 0.005));
    // axes independent: normalized cross moment within 3 standard errors of 0
    const double photon_var_x = 0.25 * (1.0 + std::pow(kRefModel.sigma_minus_m /
                                                       kRefModel.sigma_plus_x_m, 2));
    CHECK(std::abs(corr_acc / n) < 3.0 * photon_var_x / std::sqrt(double(n)));
}

TEST_CASE("vanishing difference width puts both photons in one spot", "[simulator]") {
    const GaussianBiphotonModel narrow{766e-6, 766e-6, 1e-300};
    RandomStream rng = derive_stream(12, 0);
    for (int i = 0; i < 100; ++i) {
        const auto [a, b] = sample_pair_positions(narrow, rng);
        CHECK(std::abs(a.x - b.x) < 1e-20);
        CHECK(std::abs(a.y - b.y) < 1e-20);
    }
}

TEST_CASE("pair wavevectors are anti-correlated with the conjugate widths", "[simulator]") {
    RandomStream rng = derive_stream(13, 0);
    RunningStats sum_k, diff_k;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = sample_pair_wavevectors(kRefModel, rng);
        sum_k.add(a.kx + b.kx);
        diff_k.add(a.kx - b.kx);
    }
    CHECK_THAT(sum_k.std(), WithinRel(1.0 / kRefModel.sigma_plus_x_m, 0.005));
    CHECK_THAT(diff_k.std(), WithinRel(1.0 / kRefModel.sigma_minus_m, 0.005));

    // equal widths factorize: signal and idler wavevectors decorrelate
    const GaussianBiphotonModel equal{1e-4, 1e-4, 1e-4};
    RandomStream rng2 = derive_stream(14, 0);
    double cross = 0.0;
    RunningStats ka;
    for (int i = 0; i < n / 4; ++i) {
        const auto [a, b] = sample_pair_wavevectors(equal, rng2);
        cross += a.kx * b.kx;
        ka.add(a.kx);
    }
    const double denom = ka.var();
    CHECK(std::abs(cross / (n / 4) / denom) < 3.0 / std::sqrt(double(n / 4)));
}

TEST_CASE("map_to_camera applies the two imaging configurations", "[simulator]") {
    OpticsConfig near;
    near.mode = ImagingMode::NearField;
    near.magnification = 1.0;
    CHECK(map_to_camera(near, PlanePoint{30e-6, -5e-6}).x == 30e-6);

    OpticsConfig far;
    far.mode = ImagingMode::FarField;
    far.focal_length_m = 100e-3;
    far.spdc_wavelength_m = 810e-9;
    CHECK_THAT(map_to_camera(far, Wavevector{7757.0, 0.0}).x, WithinRel(100e-6, 1e-4));
    CHECK(map_to_camera(far, Wavevector{0.0, 0.0}).x == 0.0);

    CHECK_THROWS_AS(map_to_camera(near, Wavevector{1.0, 1.0}), std::logic_error);
    CHECK_THROWS_AS(map_to_camera(far, PlanePoint{1.0, 1.0}), std::logic_error);
}

TEST_CASE("render_frame trivial and statistical contracts", "[simulator]") {
    CameraConfig cam;
    cam.width_px = 32;
    cam.height_px = 32;
    cam.em_gain = 1.0;
    cam.readout_noise_std = 0.0;
    cam.dark_count_mean = 0.0;
    cam.quantum_efficiency = 1.0;
    OpticsConfig near;
    near.mode = ImagingMode::NearField;

    SECTION("all noise and light off gives an all-zero frame") {
        SourceConfig off{0.0, 0.0};
        RandomStream rng = derive_stream(15, 0);
        const Frame f = render_frame(kRefModel, cam, near, off, rng);
        CHECK(std::accumulate(f.data.begin(), f.data.end(), 0u) == 0u);
    }

    SECTION("mean photon events per frame is twice the pair rate") {
        // model narrow enough that nothing lands off the 32x32 sensor
        const GaussianBiphotonModel narrow{30e-6, 30e-6, 10e-6};
        SourceConfig source{8.0, 0.0};
        double total = 0.0;
        for (int i = 0; i < 10'000; ++i) {
            const Frame f = simulate_frame(narrow, cam, near, source, 99, i);
            total += std::accumulate(f.data.begin(), f.data.end(), 0.0);
        }
        CHECK_THAT(total / 10'000, WithinAbs(16.0, 0.25));
    }

    SECTION("identical seed and configuration give bit-identical frames") {
        SourceConfig source{5.0, 2.0};
        cam.dark_count_mean = 0.01;
        cam.readout_noise_std = 1.0;
        const Frame a = simulate_frame(kRefModel, cam, near, source, 7, 3);
        const Frame b = simulate_frame(kRefModel, cam, near, source, 7, 3);
        CHECK(a == b);
    }
}

TEST_CASE("pixel values clamp at the configured saturation", "[simulator]") {
    CameraConfig cam;
    cam.width_px = 8;
    cam.height_px = 8;
    cam.em_gain = 100.0;
    cam.saturation = 50;
    cam.dark_count_mean = 0.0;
    cam.readout_noise_std = 0.0;
    cam.quantum_efficiency = 1.0;
    OpticsConfig near;
    near.mode = ImagingMode::NearField;
    const GaussianBiphotonModel narrow{10e-6, 10e-6, 5e-6};
    SourceConfig source{10.0, 0.0};
    for (int i = 0; i < 20; ++i) {
        const Frame f = simulate_frame(narrow, cam, near, source, 44, i);
        for (const auto v : f.data) CHECK(v <= 50);
    }
}

TEST_CASE("photons arrive in pairs when nothing is lost", "[simulator]") {
    CameraConfig cam;
    cam.width_px = 32;
    cam.height_px = 32;
    cam.em_gain = 1.0;
    cam.readout_noise_std = 0.0;
    cam.dark_count_mean = 0.0;
    cam.quantum_efficiency = 1.0;
    OpticsConfig near;
    near.mode = ImagingMode::NearField;
    const GaussianBiphotonModel narrow{20e-6, 20e-6, 20e-6}; // off-sensor loss ~ 0
    SourceConfig source{6.0, 0.0};
    for (int i = 0; i < 500; ++i) {
        const Frame f = simulate_frame(narrow, cam, near, source, 21, i);
        const unsigned total = std::accumulate(f.data.begin(), f.data.end(), 0u);
        CHECK(total % 2 == 0);
    }
}

TEST_CASE("simulate_stack is deterministic for any worker count", "[simulator]") {
    CameraConfig cam;
    cam.width_px = 16;
    cam.height_px = 16;
    OpticsConfig near;
    near.mode = ImagingMode::NearField;
    SourceConfig source{4.0, 1.0};

    const FrameStack w1 = simulate_stack(kRefModel, cam, near, source, 100, 5, 1);
    const FrameStack w3 = simulate_stack(kRefModel, cam, near, source, 100, 5, 3);
    CHECK(w1.frame_count() == 100);
    CHECK(w1.width == 16);
    CHECK(w1 == w3);
    CHECK(w1.kind == StackKind::Near);

    const FrameStack other = simulate_stack(kRefModel, cam, near, source, 100, 6, 2);
    CHECK(w1 != other);

    const FrameStack d1 = simulate_dark_stack(cam, 64, 5, 1);
    const FrameStack d4 = simulate_dark_stack(cam, 64, 5, 4);
    CHECK(d1 == d4);
    CHECK(d1.kind == StackKind::Dark);

    CHECK_THROWS_AS(simulate_stack(kRefModel, cam, near, source, 0, 1), ValidationError);
}

TEST_CASE("dark stack mean and variance follow the gain model", "[simulator]") {
    CameraConfig cam;
    cam.width_px = 16;
    cam.height_px = 16;
    cam.em_gain = 30.0;
    cam.dark_count_mean = 2.0;
    cam.readout_noise_std = 3.0;

    const std::size_t n = 100'000;
    std::vector<double> sum(cam.pixel_count(), 0.0), sumsq(cam.pixel_count(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Frame f = simulate_dark_frame(cam, 17, i);
        for (std::size_t p = 0; p < f.data.size(); ++p) {
            sum[p] += f.data[p];
            sumsq[p] += double(f.data[p]) * f.data[p];
        }
    }
    const double expect_mean = cam.em_gain * cam.dark_count_mean;
    const double expect_var = cam.em_gain * cam.em_gain * cam.dark_count_mean +
                              cam.readout_noise_std * cam.readout_noise_std;
    for (std::size_t p = 0; p < cam.pixel_count(); ++p) {
        const double mean = sum[p] / double(n);
        const double var = sumsq[p] / double(n) - mean * mean;
        CHECK_THAT(mean, WithinRel(expect_mean, 0.02));
        CHECK_THAT(var, WithinRel(expect_var, 0.05));
    }

    // no noise sources at all: all-zero frames
    CameraConfig quiet = cam;
    quiet.dark_count_mean = 0.0;
    quiet.readout_noise_std = 0.0;
    const Frame f = simulate_dark_frame(quiet, 3, 0);
    CHECK(std::accumulate(f.data.begin(), f.data.end(), 0u) == 0u);
}

TEST_CASE("pixelated histograms carry the quantization variance", "[simulator]") {
    CameraConfig cam; // 64x64, 16 um
    RandomStream rng = derive_stream(23, 0);

    SECTION("near-field pixel differences") {
        OpticsConfig near;
        near.mode = ImagingMode::NearField;
        RunningStats diff;
        for (int i = 0; i < 1'000'000; ++i) {
            const auto [a, b] = sample_pair_positions(kRefModel, rng);
            std::size_t ax, ay, bx, by;
            if (detail::bin_to_pixel(cam, map_to_camera(near, a), ax, ay) &&
                detail::bin_to_pixel(cam, map_to_camera(near, b), bx, by))
                diff.add((double(ax) - double(bx)) * cam.pixel_pitch_m);
        }
        const double p = cam.pixel_pitch_m;
        const double expected = std::sqrt(kRefModel.sigma_minus_m * kRefModel.sigma_minus_m +
                                          2.0 * p * p / 12.0);
        CHECK_THAT(diff.std(), WithinRel(expected, 0.02));
    }

    SECTION("far-field pixel sums about the sensor center") {
        OpticsConfig far;
        far.mode = ImagingMode::FarField;
        far.focal_length_m = 100e-3;
        RunningStats sum;
        for (int i = 0; i < 1'000'000; ++i) {
            const auto [a, b] = sample_pair_wavevectors(kRefModel, rng);
            std::size_t ax, ay, bx, by;
            if (detail::bin_to_pixel(cam, map_to_camera(far, a), ax, ay) &&
                detail::bin_to_pixel(cam, map_to_camera(far, b), bx, by))
                sum.add((double(ax) + double(bx) - 63.0) * cam.pixel_pitch_m);
        }
        const double p = cam.pixel_pitch_m;
        const double scale = far.focal_length_m / far.wavenumber();
        const double expected = std::sqrt(std::pow(scale / kRefModel.sigma_plus_x_m, 2) +
                                          2.0 * p * p / 12.0);
        CHECK_THAT(sum.std(), WithinRel(expected, 0.02));
    }
}

TEST_CASE("monte carlo sampling matches the theoretical momentum-sum width", "[simulator]") {
    RandomStream rng = derive_stream(29, 0);
    RunningStats sum_k;
    for (int i = 0; i < 1'000'000; ++i) {
        const auto [a, b] = sample_pair_wavevectors(kRefModel, rng);
        sum_k.add(a.kx + b.kx);
    }
    const double theory = marginal_width(kRefModel, Axis::X, Coordinate::Sum, Domain::Momentum);
    CHECK_THAT(sum_k.std(), WithinRel(theory, 0.01));
}
