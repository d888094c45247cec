#include "support.hpp"

#include <cmath>

#include "pm2lat/error.hpp"
#include "pm2lat/membound.hpp"
#include "pm2lat/oracle.hpp"

using namespace pm2lat;

namespace {

constexpr std::array<double, 5> kPlanted = {4e-7, 2e-7, 1.5e-6, 1.2e-6, 8e-7};

// Independent uniform features in [1e6, 1e8]; latency = planted . f + 3.
std::vector<MemBoundRecord> planted_records(std::uint64_t seed, std::size_t n, double noise_of_mean) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(1e6, 1e8);
    std::vector<MemBoundRecord> out;
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) {
        MemBoundFeatures f{u(rng), u(rng), u(rng), u(rng), u(rng)};
        const auto x = as_vector(f);
        double y = 3.0;
        for (int j = 0; j < 5; ++j) y += kPlanted[j] * x[j];
        mean += y / static_cast<double>(n);
        out.push_back({"k", DType::FP32, f, y});
    }
    std::normal_distribution<double> noise(0.0, noise_of_mean * mean);
    for (auto& r : out) r.latency_us += noise(rng);
    return out;
}

}  // namespace

TEST_CASE("noiseless planted model on total bytes is recovered") {
    // y = 0.5 * total_bytes + 3 with every feature drawn independently.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(1.0, 1000.0);
    std::vector<MemBoundRecord> records;
    for (int i = 0; i < 40; ++i) {
        MemBoundFeatures f{u(rng), u(rng), u(rng), u(rng), u(rng)};
        records.push_back({"add", DType::FP32, f, 0.5 * f.total_bytes_accessed + 3.0});
    }
    const auto m = fit(records, "add", DType::FP32, "dev");
    CHECK(std::abs(m.weights[4] - 0.5) <= 1e-9 * 0.5);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(m.weights[j]) <= 1e-9 * 0.5);
    CHECK(std::abs(m.intercept - 3.0) <= 1e-9 * 3.0);
    CHECK(m.residual_stats.max_rel_err < 1e-12);
    CHECK(m.train_device_id == "dev");
}

TEST_CASE("noiseless planted model with all weights is recovered") {
    const auto records = planted_records(11, 64, 0.0);
    const auto m = fit(records, "k", DType::FP32);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(m.weights[j] / kPlanted[j] - 1) <= 1e-9);
    CHECK(std::abs(m.intercept / 3.0 - 1) <= 1e-9);
}

TEST_CASE("one percent noise keeps the training error under the pinned bound") {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto m = fit(planted_records(seed, 64, 0.01), "k", DType::FP32);
        worst = std::max(worst, m.residual_stats.mean_rel_err);
    }
    CHECK(worst <= 0.015);
}

TEST_CASE("too few records") {
    auto records = planted_records(1, 5, 0.0);
    CHECK_THROWS_AS(fit(records, "k", DType::FP32), InsufficientData);
    records = planted_records(1, 6, 0.0);
    CHECK_NOTHROW(fit(records, "k", DType::FP32));
    CHECK_THROWS_AS(fit(records, "k", DType::BF16), InsufficientData);
    CHECK_THROWS_AS(fit(records, "other", DType::FP32), InsufficientData);
}

TEST_CASE("collinear features get the minimum-norm solution") {
    // total = loaded + stored and flops = int_ops: rank-deficient design.
    std::vector<MemBoundRecord> records;
    for (int i = 1; i <= 12; ++i) {
        const double x = 100.0 * i;
        const double ld = 3.0 * x, st = 5.0 * x + (i % 3) * 10;
        records.push_back({"relu", DType::FP32, {x, x, ld, st, ld + st}, 0.01 * (ld + st) + 2.0});
    }
    const auto m = fit(records, "relu", DType::FP32);
    CHECK(m.residual_stats.max_rel_err < 1e-9);
    CHECK(m.weights[0] == doctest::Approx(m.weights[1]).epsilon(1e-6));
}

TEST_CASE("constant latency with varying features warns") {
    test::WarningCapture capture;
    std::vector<MemBoundRecord> records;
    for (int i = 1; i <= 8; ++i) {
        const double x = 10.0 * i;
        records.push_back({"drop", DType::FP32, {x, 2 * x, 3 * x + i % 2, x, 4 * x}, 5.0});
    }
    const auto m = fit(records, "drop", DType::FP32);
    CHECK_FALSE(capture.messages.empty());
    CHECK(m.intercept == doctest::Approx(5.0));
}

TEST_CASE("prediction") {
    MemBoundModel m;
    m.kernel_name = "gelu";
    m.weights = {0, 0, 0, 0, 0.5};
    m.intercept = 3.0;
    SUBCASE("zero features give the intercept") {
        const auto p = predict_membound(m, {});
        CHECK(p.latency_us == 3.0);
        CHECK_FALSE(p.breakdown.floored);
        CHECK(p.kernel == KernelKey::utility("gelu", DType::FP32));
    }
    SUBCASE("intercept below the floor is floored") {
        m.intercept = 0.5;
        const auto p = predict_membound(m, {});
        CHECK(p.latency_us == kDefaultLaunchFloorUs);
        CHECK(p.breakdown.floored);
        CHECK(p.breakdown.raw_latency_us == 0.5);
    }
    SUBCASE("linear with zero intercept") {
        m.intercept = 0;
        const MemBoundFeatures f{0, 0, 0, 0, 100};
        const MemBoundFeatures f2{0, 0, 0, 0, 200};
        CHECK(predict_membound(m, f2).latency_us == 2 * predict_membound(m, f).latency_us);
    }
    SUBCASE("training records predict within their residual") {
        const auto records = planted_records(3, 32, 0.01);
        const auto fitted = fit(records, "k", DType::FP32);
        for (const auto& r : records) {
            const double e = std::abs(predict_membound(fitted, r.features, 0.0).latency_us / r.latency_us - 1);
            CHECK(e <= fitted.residual_stats.max_rel_err * (1 + 1e-9));
        }
    }
}

TEST_CASE("scaling policy") {
    const auto a100 = oracle::table_device("a100");
    const auto rtx = oracle::table_device("rtx3060m");
    SUBCASE("identity") {
        const auto p = derive_policy(a100, a100);
        CHECK(p.byte_scale == 1.0);
        CHECK(p.instr_scale == 1.0);
        const MemBoundFeatures f{1, 2, 3, 4, 7};
        CHECK(scale_features(f, ScalingPolicy::identity()) == f);
    }
    SUBCASE("table devices") {
        const auto p = derive_policy(a100, rtx);
        CHECK(p.byte_scale == 1560.0 / 336.0);
        CHECK(p.byte_scale == doctest::Approx(4.643).epsilon(1e-3));
        CHECK(p.instr_scale == doctest::Approx((6912 * 1.410) / (3840 * 2.090)).epsilon(1e-15));
        CHECK(p.ref_device_id == "a100");
        CHECK(p.target_device_id == "rtx3060m");
    }
    SUBCASE("swapped devices give reciprocals") {
        const auto p = derive_policy(a100, rtx);
        const auto q = derive_policy(rtx, a100);
        CHECK(p.byte_scale * q.byte_scale == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(p.instr_scale * q.instr_scale == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("byte fields scale, instruction fields do not") {
        ScalingPolicy p;
        p.byte_scale = 2;
        const auto s = scale_features({10, 20, 30, 40, 70}, p);
        CHECK(s == MemBoundFeatures{10, 20, 60, 80, 140});
        p = {};
        p.instr_scale = 3;
        CHECK(scale_features({10, 20, 30, 40, 70}, p) == MemBoundFeatures{30, 60, 30, 40, 70});
    }
}
