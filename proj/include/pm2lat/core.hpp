#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace pm2lat {

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class DType { FP32, BF16 };

enum class FamilyKind {
    MatMul,
    BatchedMatMul,
    Linear,
    TritonMM,
    TritonVec,
    FlashAttention,
    CutlassAttention,
    Utility,
};

enum class Library { cuBLAS, CUTLASS, Triton, Custom };

enum class TransposeMode { NN, TN, NT, TT };

std::string_view to_string(DType d);
std::string_view to_string(Library l);
std::string_view to_string(TransposeMode t);
DType parse_dtype(std::string_view s);
Library parse_library(std::string_view s);
TransposeMode parse_transpose(std::string_view s);

// Kernel family. Utility kernels carry their name ("softmax", "gelu", ...),
// so every prediction flows through one KernelKey identity scheme.
struct Family {
    FamilyKind kind = FamilyKind::MatMul;
    std::string utility_name;  // empty unless kind == Utility

    static Family utility(std::string name) { return {FamilyKind::Utility, std::move(name)}; }

    bool is_utility() const { return kind == FamilyKind::Utility; }
    // MatMul, BatchedMatMul, Linear and TritonMM share the GEMM tile formula.
    bool uses_gemm_tiles() const;

    auto operator<=>(const Family&) const = default;
    bool operator==(const Family&) const = default;
};

// "matmul", "batched_matmul", "linear", "triton_mm", "triton_vec",
// "flash_attention", "cutlass_attention", "utility:<name>".
std::string to_string(const Family& f);
Family parse_family(std::string_view s);

// Default transpose convention per family: Linear layers are TN, the rest NN.
TransposeMode default_transpose(const Family& f);

// ---------------------------------------------------------------------------
// Device
// ---------------------------------------------------------------------------

struct DeviceProfile {
    std::string device_id;
    double max_freq_ghz = 0;
    double fp32_tflops = 0;
    std::optional<double> bf16_tflops;  // absent on devices without BF16
    double dram_bw_gbs = 0;
    double mem_gb = 0;
    double l2_mb = 0;
    std::int64_t sm_count = 0;
    std::int64_t cuda_cores = 0;
    double power_w = 0;
    double collection_freq_mhz = 0;

    bool operator==(const DeviceProfile&) const = default;
};

void validate(const DeviceProfile& d);

// ---------------------------------------------------------------------------
// Kernel identity
// ---------------------------------------------------------------------------

// Every field participates in equality and ordering: two configurations that
// differ in any field are different kernels with their own throughput curve.
struct KernelKey {
    Family family;
    DType dtype = DType::FP32;
    Library library = Library::cuBLAS;
    std::int64_t algorithm_id = 0;
    std::int64_t tile_m = 0;  // block size for TritonVec / attention families
    std::int64_t tile_n = 0;
    std::int64_t split_k = 1;
    std::int64_t swizzle = 0;
    std::int64_t reduction_scheme = 0;
    std::int64_t stages = 0;
    TransposeMode transpose_mode = TransposeMode::NN;

    auto operator<=>(const KernelKey&) const = default;
    bool operator==(const KernelKey&) const = default;

    // Degenerate key for a named memory-bound kernel.
    static KernelKey utility(std::string name, DType dtype);
};

std::string to_string(const KernelKey& k);
void validate(const KernelKey& k);

// ---------------------------------------------------------------------------
// Shapes and features
// ---------------------------------------------------------------------------

struct MatMulShape {
    std::int64_t batch = 1;
    std::int64_t m = 1;
    std::int64_t n = 1;
    std::int64_t k = 1;

    auto operator<=>(const MatMulShape&) const = default;
    bool operator==(const MatMulShape&) const = default;
};

// Row-parallel vector kernel (TritonVec): each block processes whole rows.
struct VectorShape {
    std::int64_t rows = 1;
    std::int64_t length = 1;

    bool operator==(const VectorShape&) const = default;
};

// Attention instance; the varying dimension is the key/value sequence length.
struct AttentionShape {
    std::int64_t batch = 1;
    std::int64_t heads = 1;
    std::int64_t q_len = 1;
    std::int64_t kv_len = 1;

    bool operator==(const AttentionShape&) const = default;
};

void validate(const MatMulShape& s);
void validate(const VectorShape& s);
void validate(const AttentionShape& s);

// 2 * batch * m * n * k.
double flop_count(const MatMulShape& s);

// Proxy metrics of a memory-bound kernel, in the order the regression uses.
struct MemBoundFeatures {
    double flops = 0;
    double int_ops = 0;
    double bytes_loaded = 0;
    double bytes_stored = 0;
    double total_bytes_accessed = 0;

    bool operator==(const MemBoundFeatures&) const = default;
};

void validate(const MemBoundFeatures& f);

// ---------------------------------------------------------------------------
// Throughput curve
// ---------------------------------------------------------------------------

struct ThroughputSample {
    std::int64_t dim_value = 0;
    double throughput_gflops = 0;

    bool operator==(const ThroughputSample&) const = default;
};

struct ThroughputCurve {
    KernelKey kernel;
    std::string varying_dim_name = "K";
    std::vector<ThroughputSample> samples;  // strictly ascending dim_value
    std::int64_t ref_dim_value = 8192;      // == samples.back().dim_value
    double ref_duration_us = 0;
    std::int64_t ref_waves = 1;
    std::string device_id;
    std::optional<std::int64_t> blocks_per_sm;  // occupancy override for this kernel

    double ref_throughput() const { return samples.back().throughput_gflops; }

    bool operator==(const ThroughputCurve&) const = default;
};

// Throws ValidationError naming the curve on any invariant violation.
void validate(const ThroughputCurve& c);

// ---------------------------------------------------------------------------
// Model graph
// ---------------------------------------------------------------------------

using LayerShape = std::variant<MatMulShape, VectorShape, AttentionShape, MemBoundFeatures>;

struct LayerSpec {
    std::string layer_id;
    Family family;
    LayerShape shape;
    DType dtype = DType::FP32;
    std::optional<TransposeMode> transpose_mode;  // family default when absent
    std::optional<KernelKey> resolved_key;

    bool operator==(const LayerSpec&) const = default;
};

struct ModelGraph {
    std::string model_name;
    std::vector<LayerSpec> layers;  // execution order
    std::int64_t batch_size = 1;

    bool operator==(const ModelGraph&) const = default;
};

void validate(const ModelGraph& g);

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

enum class ConfigMatch { None, Exact, Nearest };
std::string_view to_string(ConfigMatch m);

struct PredictionBreakdown {
    // compute path
    double base_duration_us = 0;
    double wave_scale = 1;  // waves / ref_waves
    double interpolated_throughput = 0;
    double ref_throughput = 0;
    std::int64_t waves = 0;
    std::int64_t ref_waves = 0;
    std::int64_t varying_value = 0;
    bool below_range = false;
    bool above_range = false;
    ConfigMatch config_match = ConfigMatch::None;
    // memory-bound path
    double raw_latency_us = 0;
    bool floored = false;

    bool operator==(const PredictionBreakdown&) const = default;
};

struct Prediction {
    double latency_us = 0;
    KernelKey kernel;
    PredictionBreakdown breakdown;

    bool operator==(const Prediction&) const = default;
};

}  // namespace pm2lat

template <>
struct std::hash<pm2lat::KernelKey> {
    std::size_t operator()(const pm2lat::KernelKey& k) const noexcept;
};
