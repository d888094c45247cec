#include "support.hpp"

#include "pm2lat/error.hpp"
#include "pm2lat/oracle.hpp"
#include "pm2lat/partition.hpp"

using namespace pm2lat;

namespace {

// Every cut evaluated independently with sums in execution order.
CutChoice brute_force(const std::vector<double>& a, const std::vector<double>& b) {
    CutChoice best;
    for (std::size_t c = 0; c <= a.size(); ++c) {
        double sa = 0, sb = 0;
        for (std::size_t i = 0; i < c; ++i) sa += a[i];
        for (std::size_t i = c; i < b.size(); ++i) sb += b[i];
        const double m = std::max(sa, sb);
        if (c == 0 || m < best.bottleneck_us) best = {c, sa, sb, 0, m};
    }
    return best;
}

}  // namespace

TEST_CASE("identical devices split the layers in half") {
    for (std::size_t layers : {1, 2, 5, 8, 13}) {
        CAPTURE(layers);
        const std::vector<double> t(layers, 3.5);
        const auto c = best_cut(t, t);
        CHECK(c.cut == layers / 2);
        CHECK(c.bottleneck_us == 3.5 * static_cast<double>((layers + 1) / 2));
    }
}

TEST_CASE("a twice-as-fast device B takes two thirds of the work") {
    const std::vector<double> a(30, 2.0), b(30, 1.0);
    const auto c = best_cut(a, b);
    CHECK(c.cut == 10);
    CHECK(c.bottleneck_us == 20.0);
    CHECK(c.cut == brute_force(a, b).cut);
}

TEST_CASE("random fixtures match brute force exactly") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> len(1, 64);
    std::uniform_real_distribution<double> lat(0.5, 900.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int layers = len(rng);
        std::vector<double> a(layers), b(layers);
        for (int i = 0; i < layers; ++i) {
            a[i] = lat(rng);
            b[i] = lat(rng);
        }
        const auto got = best_cut(a, b);
        const auto want = brute_force(a, b);
        CHECK(got.cut == want.cut);
        CHECK(got.bottleneck_us == want.bottleneck_us);
        CHECK(got.stage_a_us == want.stage_a_us);
        CHECK(got.stage_b_us == want.stage_b_us);
    }
}

TEST_CASE("transfer cost applies to interior cuts") {
    const std::vector<double> a = {10, 10}, b = {10, 10};
    SUBCASE("cheap link keeps the split") {
        const auto c = best_cut(a, b, std::vector<double>{0, 1, 0});
        CHECK(c.cut == 1);
        CHECK(c.stage_b_us == 11);
        CHECK(c.transfer_us == 1);
    }
    SUBCASE("expensive link keeps everything on one device") {
        const auto c = best_cut(a, b, std::vector<double>{0, 100, 0});
        CHECK(c.cut == 0);
        CHECK(c.bottleneck_us == 20);
    }
    CHECK_THROWS_AS(best_cut(a, b, std::vector<double>{1}), ValidationError);
    CHECK_THROWS_AS(best_cut(a, std::vector<double>{1}), ValidationError);
}

TEST_CASE("pipeline throughput estimate") {
    PartitionPlan plan;
    plan.stage_a_us = 570;
    plan.stage_b_us = 500;
    plan.bottleneck_us = 570;
    CHECK(throughput_estimate(plan, 1) == 1070);
    CHECK(throughput_estimate(plan, 100) == 57500);
    plan.stage_a_us = plan.stage_b_us = plan.bottleneck_us = 7;
    for (std::int64_t n : {1, 2, 10, 1000}) CHECK(throughput_estimate(plan, n) == static_cast<double>(n + 1) * 7);
    // Affine in N: equal increments.
    CHECK(throughput_estimate(plan, 3) - throughput_estimate(plan, 2) ==
          throughput_estimate(plan, 50) - throughput_estimate(plan, 49));
    CHECK_THROWS_AS(throughput_estimate(plan, 0), ValidationError);
}

TEST_CASE("two-device plan on synthetic datasets") {
    const auto cfg_a = oracle::preset("fp32");
    auto cfg_b = oracle::preset("fp32");
    cfg_b.device.profile = oracle::table_device("t4");
    cfg_b.device.profile.device_id = "synthetic-t4";
    for (auto& [key, curve] : cfg_b.device.curves) {
        curve.a *= 0.5;
        curve.b *= 0.5;
    }
    const auto ds_a = oracle::emit_fixture(cfg_a.device, cfg_a.plan);
    const auto ds_b = oracle::emit_fixture(cfg_b.device, cfg_b.plan);
    const auto g = load_model_graph(PM2LAT_SOURCE_DIR "/fixtures/graph_transformer_block.json");
    const auto plan =
        partition_two_device(g, ds_a, ds_b, default_wave_model(ds_a.device), default_wave_model(ds_b.device));

    // Stage sums equal the model totals of the two sub-graphs.
    ModelGraph head{"head", {}, 1}, tail{"tail", {}, 1};
    for (std::size_t i = 0; i < g.layers.size(); ++i) (i < plan.cut_after_layer_index ? head : tail).layers.push_back(g.layers[i]);
    const Predictor pa(ds_a), pb(ds_b);
    CHECK(plan.stage_a_us == (head.layers.empty() ? 0.0 : predict_model(head, pa).total_latency_us));
    CHECK(plan.stage_b_us == (tail.layers.empty() ? 0.0 : predict_model(tail, pb).total_latency_us));
    CHECK(plan.bottleneck_us == std::max(plan.stage_a_us, plan.stage_b_us));
    CHECK(plan.bottleneck_us <= plan.prediction_a.total_latency_us);
    CHECK(plan.bottleneck_us <= plan.prediction_b.total_latency_us);

    const auto linked = partition_two_device(g, pa, pb, {16.0});
    CHECK(linked.bottleneck_us >= plan.bottleneck_us);
}

TEST_CASE("activation bytes") {
    LayerSpec l{"x", parse_family("matmul"), MatMulShape{2, 8, 16, 1000}, DType::FP32, {}, {}};
    CHECK(activation_bytes(l) == 2 * 8 * 16 * 4);
    l.dtype = DType::BF16;
    CHECK(activation_bytes(l) == 2 * 8 * 16 * 2);
    l.family = Family::utility("relu");
    l.shape = MemBoundFeatures{0, 0, 64, 32, 96};
    CHECK(activation_bytes(l) == 32);
}
