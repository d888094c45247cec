#include "support.hpp"

#include <fstream>

#include "pm2lat/error.hpp"
#include "pm2lat/ingest.hpp"
#include "pm2lat/oracle.hpp"

using namespace pm2lat;
using nlohmann::json;

namespace {

Dataset small_dataset(const std::string& device_id = "test-device") {
    Dataset ds;
    ds.device = test::test_device(device_id);
    for (std::int64_t tile : {64, 128}) {
        auto key = test::gemm_key(tile, tile);
        auto curve = test::make_curve(key, {{32, 100}, {64, 180}, {128, 300}}, 12.5, 2);
        curve.device_id = device_id;
        ds.curves.emplace(key, curve);
        ds.config_map.push_back({parse_family("matmul"), DType::FP32, TransposeMode::NN, {1, tile, tile, tile}, key});
    }
    for (int i = 0; i < 6; ++i) {
        const double x = 1000.0 * (i + 1);
        ds.membound_records.push_back(
            {"relu", DType::FP32, {x, x, 4 * x, 4 * x, 8 * x + (i % 2)}, 2.0 + 0.001 * x});
    }
    canonicalize(ds);
    return ds;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string fixtures() {
    const char* dir = std::getenv("PM2LAT_FIXTURES");
    return dir != nullptr ? dir : PM2LAT_SOURCE_DIR "/fixtures";
}

}  // namespace

TEST_CASE("dataset json round-trip is exact") {
    const auto ds = small_dataset();
    CHECK(dataset_from_json(to_json(ds)) == ds);
    const auto fx = oracle::emit_fixture(oracle::preset("generic").device, oracle::preset("generic").plan);
    CHECK(dataset_from_json(json::parse(to_json(fx).dump())) == fx);
}

TEST_CASE("loading an emitted fp32 fixture gives 13 curves") {
    test::TempDir dir;
    const auto cfg = oracle::preset("fp32");
    save_dataset(oracle::emit_fixture(cfg.device, cfg.plan), dir / "fx.json");
    const auto ds = load_dataset(dir / "fx.json");
    CHECK(ds.curves.size() == 13);
    CHECK_NOTHROW(validate(ds));
}

TEST_CASE("malformed inputs") {
    test::TempDir dir;
    SUBCASE("empty file is a parse error") {
        write(dir / "empty.json", "");
        CHECK_THROWS_AS(load_dataset(dir / "empty.json"), ParseError);
    }
    SUBCASE("missing file is an I/O error") {
        CHECK_THROWS_AS(load_dataset(dir / "absent.json"), IoError);
    }
    SUBCASE("unsorted samples name the curve") {
        auto j = to_json(small_dataset());
        std::swap(j["curves"][0]["samples"][0], j["curves"][0]["samples"][1]);
        write(dir / "bad.json", j.dump());
        try {
            load_dataset(dir / "bad.json");
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("matmul") != std::string::npos);
            CHECK(msg.find("bad.json") != std::string::npos);
        }
    }
    SUBCASE("missing field is a schema error with a pointer") {
        auto j = to_json(small_dataset());
        j["curves"][1].erase("ref_duration_us");
        try {
            dataset_from_json(j, "x.json");
            FAIL("expected SchemaError");
        } catch (const SchemaError& e) {
            CHECK(std::string(e.what()).find("/curves/1/ref_duration_us") != std::string::npos);
        }
    }
    SUBCASE("wrong type is a schema error") {
        auto j = to_json(small_dataset());
        j["device"]["sm_count"] = "thirty";
        CHECK_THROWS_AS(dataset_from_json(j), SchemaError);
    }
    SUBCASE("unknown major version is rejected") {
        auto j = to_json(small_dataset());
        j["schema_version"] = "2";
        CHECK_THROWS_AS(dataset_from_json(j), ValidationError);
        j["schema_version"] = "1.3";
        CHECK_NOTHROW(dataset_from_json(j));
    }
    SUBCASE("unknown fields warn and are ignored") {
        test::WarningCapture capture;
        auto j = to_json(small_dataset());
        j["device"]["fan_speed"] = 3;
        CHECK(dataset_from_json(j) == small_dataset());
        REQUIRE(capture.messages.size() == 1);
        CHECK(capture.messages[0].find("fan_speed") != std::string::npos);
    }
    SUBCASE("curve from another device") {
        auto j = to_json(small_dataset());
        j["curves"][0]["device_id"] = "elsewhere";
        CHECK_THROWS_AS(dataset_from_json(j), ValidationError);
    }
    SUBCASE("conflicting config choices") {
        auto ds = small_dataset();
        auto rec = ds.config_map.front();
        rec.chosen_key = ds.config_map.back().chosen_key;
        ds.config_map.push_back(rec);
        CHECK_THROWS_AS(validate(ds), Error);
    }
}

TEST_CASE("model graphs") {
    SUBCASE("two-layer fixture keeps file order") {
        const auto g = load_model_graph(fixtures() + "/graph_two_layer.json");
        REQUIRE(g.layers.size() == 2);
        CHECK(g.layers[0].family == parse_family("linear"));
        CHECK(g.layers[1].family == parse_family("utility:softmax"));
        CHECK(g.layers[0].layer_id == "proj");
    }
    SUBCASE("transformer block has 8 layers") {
        const auto g = load_model_graph(fixtures() + "/graph_transformer_block.json");
        CHECK(g.layers.size() == 8);
        CHECK(model_graph_from_json(to_json(g)) == g);
    }
    SUBCASE("zero layers") {
        CHECK_THROWS_AS(model_graph_from_json(json{{"model_name", "m"}, {"layers", json::array()}}),
                        ValidationError);
    }
    SUBCASE("unknown family names the layer") {
        try {
            load_model_graph(fixtures() + "/graph_unknown_family.json");
            FAIL("expected UnresolvedLayer");
        } catch (const UnresolvedLayer& e) {
            CHECK(std::string(e.what()).find("conv1") != std::string::npos);
        }
    }
    SUBCASE("generic shapes") {
        const json j = {{"model_name", "g"},
                        {"layers",
                         {{{"layer_id", "attn"},
                           {"family", "flash_attention"},
                           {"dtype", "bf16"},
                           {"shape", {{"heads", 8}, {"q_len", 128}, {"kv_len", 512}}}},
                          {{"layer_id", "norm"},
                           {"family", "triton_vec"},
                           {"dtype", "fp32"},
                           {"shape", {{"rows", 64}, {"length", 1024}}}}}}};
        const auto g = model_graph_from_json(j);
        CHECK(std::get<AttentionShape>(g.layers[0].shape) == AttentionShape{1, 8, 128, 512});
        CHECK(std::get<VectorShape>(g.layers[1].shape) == VectorShape{64, 1024});
        CHECK(model_graph_from_json(to_json(g)) == g);
    }
}

TEST_CASE("merge") {
    const auto a = small_dataset();
    SUBCASE("identical inputs are idempotent") {
        CHECK(merge_datasets(a, a) == a);
    }
    SUBCASE("disjoint curve sets add up and merge commutes") {
        Dataset b = a;
        b.curves.clear();
        b.config_map.clear();
        b.membound_records.clear();
        auto key = test::gemm_key(256, 128);
        auto curve = test::make_curve(key, {{32, 50}, {128, 90}}, 4.0, 1);
        b.curves.emplace(key, curve);
        const auto ab = merge_datasets(a, b);
        CHECK(ab.curves.size() == a.curves.size() + b.curves.size());
        CHECK(ab == merge_datasets(b, a));
        CHECK(fingerprint(ab) == fingerprint(merge_datasets(b, a)));
    }
    SUBCASE("same key with different throughput conflicts") {
        Dataset b = a;
        b.curves.begin()->second.samples[1].throughput_gflops += 1e-9;
        CHECK_THROWS_AS(merge_datasets(a, b), ConflictError);
    }
    SUBCASE("different devices") {
        CHECK_THROWS_AS(merge_datasets(a, small_dataset("other")), DeviceMismatch);
    }
    SUBCASE("records form a multiset union") {
        Dataset b = a;
        b.curves.clear();
        b.config_map.clear();
        b.membound_records.resize(2);
        const auto ab = merge_datasets(a, b);
        CHECK(ab.membound_records.size() == a.membound_records.size());
    }
}

TEST_CASE("fingerprint is stable under canonicalization") {
    auto a = small_dataset();
    auto b = a;
    std::reverse(b.membound_records.begin(), b.membound_records.end());
    std::reverse(b.config_map.begin(), b.config_map.end());
    canonicalize(b);
    CHECK(fingerprint(a) == fingerprint(b));
    b.device.power_w += 1;
    CHECK(fingerprint(a) != fingerprint(b));
    CHECK(fingerprint(a).size() == 16);
}

TEST_CASE("save and load") {
    test::TempDir dir;
    const auto ds = small_dataset();
    save_dataset(ds, dir / "ds.json");
    CHECK(load_dataset(dir / "ds.json") == ds);
    CHECK_THROWS_AS(save_dataset(ds, dir / "no/such/dir/ds.json"), IoError);
}
