#include "support.hpp"

#include <cmath>
#include <numeric>

#include "pm2lat/aggregate.hpp"
#include "pm2lat/error.hpp"
#include "pm2lat/oracle.hpp"

using namespace pm2lat;

namespace {

std::string fixtures() { return PM2LAT_SOURCE_DIR "/fixtures"; }

struct Fixture {
    oracle::OracleConfig cfg;
    Dataset ds;
};

const Fixture& fp32_fixture() {
    static const Fixture fx = [] {
        Fixture f{oracle::preset("fp32"), {}};
        f.ds = oracle::emit_fixture(f.cfg.device, f.cfg.plan);
        return f;
    }();
    return fx;
}

LayerSpec random_layer(std::mt19937_64& rng, int index) {
    static const char* gemm[] = {"matmul", "linear", "batched_matmul"};
    static const char* util[] = {"gelu", "relu", "softmax", "add", "layernorm"};
    std::uniform_int_distribution<int> pick(0, 7);
    std::uniform_int_distribution<std::int64_t> dim(16, 4096);
    LayerSpec l;
    l.layer_id = "l" + std::to_string(index);
    const int choice = pick(rng);
    if (choice < 3) {
        l.family = parse_family(gemm[choice]);
        l.shape = MatMulShape{choice == 2 ? dim(rng) % 32 + 1 : 1, dim(rng), dim(rng), dim(rng)};
    } else {
        l.family = Family::utility(util[choice - 3]);
        const double n = static_cast<double>(dim(rng)) * static_cast<double>(dim(rng));
        l.shape = MemBoundFeatures{4 * n, n, 4 * n, 4 * n, 8 * n};
    }
    return l;
}

ModelGraph random_graph(std::mt19937_64& rng, const std::string& prefix) {
    std::uniform_int_distribution<int> len(1, 24);
    ModelGraph g;
    g.model_name = prefix;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        auto l = random_layer(rng, i);
        l.layer_id = prefix + l.layer_id;
        g.layers.push_back(std::move(l));
    }
    return g;
}

}  // namespace

TEST_CASE("single layer graph total is that layer") {
    const Predictor p(fp32_fixture().ds);
    ModelGraph g{"one", {}, 1};
    g.layers.push_back({"mm", parse_family("matmul"), MatMulShape{1, 512, 512, 1024}, DType::FP32, {}, {}});
    const auto mp = predict_model(g, p);
    REQUIRE(mp.per_layer.size() == 1);
    CHECK(mp.total_latency_us == mp.per_layer[0].prediction.latency_us);
    CHECK(mp.per_layer[0].kind == PredictorKind::Compute);
    CHECK(std::abs(mp.total_latency_us - p.predict_layer(g.layers[0]).latency_us) <= kLatencyQuantumUs / 2);
}

TEST_CASE("totals are exact, order-free and additive") {
    const Predictor p(fp32_fixture().ds);
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_graph(rng, "a");
        const auto b = random_graph(rng, "b");
        auto ab = a;
        ab.layers.insert(ab.layers.end(), b.layers.begin(), b.layers.end());
        const auto pa = predict_model(a, p);
        const auto pb = predict_model(b, p);
        const auto pab = predict_model(ab, p);
        double sum = 0;
        for (const auto& lp : pab.per_layer) sum += lp.prediction.latency_us;
        CHECK(pab.total_latency_us == sum);
        CHECK(pab.total_latency_us == pa.total_latency_us + pb.total_latency_us);

        auto shuffled = ab;
        std::shuffle(shuffled.layers.begin(), shuffled.layers.end(), rng);
        const auto ps = predict_model(shuffled, p);
        CHECK(ps.total_latency_us == pab.total_latency_us);
        CHECK(ps.per_layer.front().layer_id == shuffled.layers.front().layer_id);
    }
}

TEST_CASE("layers dispatch by family and report flags") {
    const Predictor p(fp32_fixture().ds);
    const auto g = load_model_graph(fixtures() + "/graph_transformer_block.json");
    const auto mp = predict_model(g, p);
    REQUIRE(mp.per_layer.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(mp.per_layer[i].layer_id == g.layers[i].layer_id);
        CHECK((mp.per_layer[i].kind == PredictorKind::MemBound) == g.layers[i].family.is_utility());
    }
    // 768 / 2304 / 3072 are not on the power-of-two config grid.
    CHECK(std::any_of(mp.flags.begin(), mp.flags.end(), [](const LayerFlag& f) { return f.flag == "nearest_config"; }));
}

TEST_CASE("transformer block stays within budget of the oracle") {
    auto cfg = oracle::preset("fp32");
    for (std::int64_t v : {768, 2304, 3072}) {
        cfg.plan.config_m.push_back(v);
        cfg.plan.config_n.push_back(v);
        cfg.plan.config_k.push_back(v);
    }
    cfg.plan.config_batch.push_back(12);
    const auto ds = oracle::emit_fixture(cfg.device, cfg.plan);
    const auto g = load_model_graph(fixtures() + "/graph_transformer_block.json");
    const auto mp = predict_model(g, ds, default_wave_model(ds.device));
    const WaveModel wm = default_wave_model(ds.device);
    double truth = 0;
    for (const auto& l : g.layers) {
        if (l.family.is_utility()) {
            truth += oracle::true_membound_latency(cfg.device, l.family.utility_name, l.dtype,
                                                   std::get<MemBoundFeatures>(l.shape));
            continue;
        }
        const auto transpose = l.transpose_mode.value_or(default_transpose(l.family));
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [key, curve] : cfg.device.curves) {
            if (key.family == l.family && key.transpose_mode == transpose && key.dtype == l.dtype) {
                best = std::min(best, oracle::true_duration(cfg.device, key, std::get<MatMulShape>(l.shape), wm));
            }
        }
        truth += best;
    }
    CHECK(std::abs(mp.total_latency_us / truth - 1) <= 0.0304);
}

TEST_CASE("unresolvable layers name the layer") {
    const Predictor p(fp32_fixture().ds);
    ModelGraph g{"g", {}, 1};
    g.layers.push_back({"ok", parse_family("matmul"), MatMulShape{1, 64, 64, 64}, DType::FP32, {}, {}});
    g.layers.push_back({"attn", parse_family("flash_attention"), AttentionShape{1, 8, 128, 128}, DType::FP32, {}, {}});
    try {
        predict_model(g, p);
        FAIL("expected UnresolvedLayer");
    } catch (const UnresolvedLayer& e) {
        CHECK(std::string(e.what()).find("'attn'") != std::string::npos);
        CHECK(std::string(e.what()).find("synthetic-rtx3060m") != std::string::npos);
    }
    g.layers[1] = {"pool", Family::utility("maxpool"), MemBoundFeatures{1, 1, 1, 1, 2}, DType::FP32, {}, {}};
    CHECK_THROWS_AS(predict_model(g, p), UnresolvedLayer);
}

TEST_CASE("missing models are fitted from raw records") {
    Dataset ds = fp32_fixture().ds;
    REQUIRE(ds.membound_models.empty());
    const Predictor p(ds);
    CHECK(p.membound_models().size() == 7);
    const auto models = fit_all(ds);
    CHECK(models.size() == 7);
    ds.membound_models = models;
    const Predictor q(ds);
    const MemBoundFeatures f{1e6, 1e6, 4e6, 4e6, 8e6};
    CHECK(p.predict_utility("gelu", DType::FP32, f) == q.predict_utility("gelu", DType::FP32, f));
}

TEST_CASE("relative error") {
    CHECK(relative_error(100, 100) == 0.0);
    CHECK(relative_error(100, 110) == doctest::Approx(0.10).epsilon(1e-15));
    CHECK(relative_error(200, 150) == -0.25);
    CHECK_THROWS_AS(relative_error(0, 1), ZeroMeasured);
    CHECK_THROWS_AS(relative_error(-5, 1), ZeroMeasured);
}

TEST_CASE("error report") {
    SUBCASE("all exact") {
        std::vector<ErrorCase> cases;
        for (int i = 0; i < 50; ++i) cases.push_back({"c" + std::to_string(i), 10, 10, static_cast<double>(i)});
        const auto r = build_error_report(cases);
        CHECK(r.binned_max.size() == 100);
        for (const auto& b : r.binned_max) {
            if (b.count > 0) CHECK(b.max_abs_rel_err == 0.0);
            else CHECK_FALSE(b.max_abs_rel_err.has_value());
        }
        CHECK(r.histogram[0] == 50);
        CHECK(r.mean_abs_rel_err == 0.0);
    }
    SUBCASE("single record") {
        const auto r = build_error_report({{"only", 100, 90, 3.0}});
        const auto non_empty = std::count_if(r.binned_max.begin(), r.binned_max.end(),
                                             [](const ErrorBin& b) { return b.count > 0; });
        CHECK(non_empty == 1);
        CHECK(r.histogram[histogram_bucket(0.1)] == 1);
    }
    SUBCASE("planted outlier lands in its bin") {
        std::vector<ErrorCase> cases;
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> small(-0.02, 0.02);
        for (int i = 0; i < 1000; ++i) {
            const double measured = 100.0 + i;
            cases.push_back({"c" + std::to_string(i), measured, measured * (1 + small(rng)), static_cast<double>(i)});
        }
        const int x0 = 437;
        cases[x0].predicted_us = cases[x0].measured_us * 1.12;
        const auto r = build_error_report(cases);
        // Axis 0..999 in 100 bins of width 9.99: 437 is in bin 43.
        const auto& bin = r.binned_max[43];
        CHECK(bin.lo <= x0);
        CHECK(x0 < bin.hi);
        CHECK(*bin.max_abs_rel_err == doctest::Approx(0.12).epsilon(1e-12));
        for (std::size_t i = 0; i < r.binned_max.size(); ++i) {
            if (i != 43) CHECK(*r.binned_max[i].max_abs_rel_err <= 0.02);
        }
        CHECK(r.histogram[2] == 1);
        CHECK(std::accumulate(r.histogram.begin(), r.histogram.end(), std::size_t{0}) == 1000);
        double mean = 0;
        for (const auto& rec : r.records) mean += std::abs(rec.signed_rel_err);
        CHECK(std::abs(r.mean_abs_rel_err - mean / 1000) <= 1e-12);
    }
    SUBCASE("bins partition the axis") {
        std::vector<ErrorCase> cases;
        for (int i = 0; i < 37; ++i) cases.push_back({"c", 10, 11, std::sqrt(static_cast<double>(i))});
        const auto r = build_error_report(cases, {}, 10);
        CHECK(r.binned_max.front().lo == r.axis_min);
        CHECK(r.binned_max.back().hi == r.axis_max);
        for (std::size_t i = 1; i < r.binned_max.size(); ++i) CHECK(r.binned_max[i].lo == r.binned_max[i - 1].hi);
        std::size_t total = 0;
        for (const auto& b : r.binned_max) total += b.count;
        CHECK(total == 37);
    }
    SUBCASE("custom axis") {
        const auto r = build_error_report({{"a", 10, 11, 0}, {"b", 10, 12, 0}},
                                          [](const ErrorCase& c) { return c.predicted_us; }, 2);
        CHECK(r.axis_min == 11);
        CHECK(r.axis_max == 12);
    }
    SUBCASE("histogram buckets") {
        CHECK(histogram_bucket(0.0) == 0);
        CHECK(histogram_bucket(0.0499) == 0);
        CHECK(histogram_bucket(0.12) == 2);
        CHECK(histogram_bucket(0.95) == 19);
        CHECK(histogram_bucket(7.0) == 19);
    }
    CHECK_THROWS_AS(build_error_report({}), EmptyInput);
}
