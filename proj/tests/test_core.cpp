#include "support.hpp"

#include "pm2lat/error.hpp"

using namespace pm2lat;

TEST_CASE("flop_count is 2 * batch * m * n * k") {
    CHECK(flop_count({1, 1, 1, 1}) == 2.0);
    CHECK(flop_count({1, 128, 128, 64}) == 2097152.0);
    CHECK(flop_count({8, 64, 64, 32}) == 2097152.0);
}

TEST_CASE("family strings round-trip") {
    for (const auto* s : {"matmul", "batched_matmul", "linear", "triton_mm", "triton_vec", "flash_attention",
                          "cutlass_attention", "utility:softmax"}) {
        CHECK(to_string(parse_family(s)) == s);
    }
    CHECK(parse_family("utility:gelu").utility_name == "gelu");
    CHECK_THROWS_AS(parse_family("conv2d"), UnknownFamily);
    CHECK_THROWS_AS(parse_family("utility:"), Error);
}

TEST_CASE("default transpose follows framework conventions") {
    CHECK(default_transpose(parse_family("linear")) == TransposeMode::TN);
    CHECK(default_transpose(parse_family("matmul")) == TransposeMode::NN);
    CHECK(default_transpose(parse_family("batched_matmul")) == TransposeMode::NN);
}

TEST_CASE("dtype, library and transpose parse their canonical spellings") {
    CHECK(parse_dtype("fp32") == DType::FP32);
    CHECK(parse_dtype("bf16") == DType::BF16);
    CHECK(to_string(DType::BF16) == "bf16");
    CHECK(parse_transpose("TN") == TransposeMode::TN);
    CHECK(parse_library("cutlass") == Library::CUTLASS);
    CHECK_THROWS_AS(parse_dtype("fp8"), Error);
}

TEST_CASE("kernel keys differing in any field are distinct") {
    const auto base = test::gemm_key();
    auto other = base;
    other.swizzle = 1;
    CHECK(base != other);
    CHECK((base < other || other < base));
    CHECK(std::hash<KernelKey>{}(base) == std::hash<KernelKey>{}(test::gemm_key()));
}

TEST_CASE("kernel key validation rejects zero tiles and bad split_k") {
    auto k = test::gemm_key();
    CHECK_NOTHROW(validate(k));
    k.tile_n = 0;
    CHECK_THROWS_AS(validate(k), ValidationError);
    k = test::gemm_key();
    k.split_k = 0;
    CHECK_THROWS_AS(validate(k), ValidationError);
    CHECK_NOTHROW(validate(KernelKey::utility("gelu", DType::FP32)));
}

TEST_CASE("curve validation names the curve") {
    auto c = test::make_curve(test::gemm_key(), {{64, 100}, {32, 90}, {128, 110}}, 10);
    try {
        validate(c);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    }
    c = test::make_curve(test::gemm_key(), {{32, 90}, {64, 100}}, 10);
    CHECK_NOTHROW(validate(c));
    c.samples[0].throughput_gflops = 0;
    CHECK_THROWS_AS(validate(c), ValidationError);
}

TEST_CASE("model graph needs layers with unique ids") {
    ModelGraph g{"m", {}, 1};
    CHECK_THROWS_AS(validate(g), ValidationError);
    LayerSpec l{"a", parse_family("matmul"), MatMulShape{1, 2, 2, 2}, DType::FP32, std::nullopt, std::nullopt};
    g.layers = {l, l};
    CHECK_THROWS_AS(validate(g), ValidationError);
    g.layers[1].layer_id = "b";
    CHECK_NOTHROW(validate(g));
}

TEST_CASE("device profile validation") {
    auto d = test::test_device();
    CHECK_NOTHROW(validate(d));
    d.sm_count = 0;
    CHECK_THROWS_AS(validate(d), ValidationError);
}

TEST_CASE("error categories") {
    CHECK(UnresolvedLayer("x").category() == ErrorCategory::Prediction);
    CHECK(StaleCache("x").category() == ErrorCategory::Data);
    CHECK(IoError("x").category() == ErrorCategory::Io);
    CHECK(UsageError("x").category() == ErrorCategory::Usage);
    CHECK(InsufficientData("x").kind() == "InsufficientData");
}
