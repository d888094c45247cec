#pragma once

#include <array>
#include <map>
#include <span>
#include <tuple>
#include <variant>
#include <vector>

#include "pm2lat/core.hpp"

namespace pm2lat {

inline constexpr std::string_view kVaryingK = "K";
inline constexpr std::string_view kVaryingLength = "length";
inline constexpr std::string_view kVaryingSeqLen = "seq_len";

// Occupancy model: a wave holds sm_count * blocks_per_sm thread blocks.
struct WaveModel {
    std::int64_t sm_count = 1;
    std::int64_t blocks_per_sm = 1;

    std::int64_t blocks_per_wave() const { return sm_count * blocks_per_sm; }
};

// One recorded answer of the vendor's configuration heuristic.
struct ConfigRecord {
    Family family;
    DType dtype = DType::FP32;
    TransposeMode transpose_mode = TransposeMode::NN;
    MatMulShape shape;
    KernelKey chosen_key;

    bool operator==(const ConfigRecord&) const = default;
};

void validate(const ConfigRecord& r);

struct ResolvedConfig {
    KernelKey key;
    ConfigMatch match = ConfigMatch::None;
    MatMulShape matched_shape;
};

// Replays recorded configuration choices. Exact shape hits return the recorded
// key; otherwise the nearest recorded shape by Chebyshev distance in
// (log2 m, log2 n, log2 k), ties going to the lexicographically smaller
// (m, n, k) and then the batch closest in log2.
class ConfigResolver {
public:
    ConfigResolver() = default;
    explicit ConfigResolver(std::span<const ConfigRecord> records);

    // Throws NoConfigAvailable when nothing was recorded for the triple.
    ResolvedConfig resolve(const Family& family, DType dtype, TransposeMode transpose,
                           const MatMulShape& shape) const;

    bool empty() const { return table_.empty(); }
    std::size_t size() const;

private:
    using Triple = std::tuple<Family, DType, TransposeMode>;
    struct Entry {
        MatMulShape shape;
        KernelKey key;
        std::array<double, 4> lg{};  // log2 of batch, m, n, k
    };
    std::map<Triple, std::vector<Entry>> table_;  // entries sorted by shape
};

ResolvedConfig resolve_config(const Family& family, DType dtype, TransposeMode transpose,
                              const MatMulShape& shape, const ConfigResolver& resolver);

// blocks = batch * ceil(m / tile_m) * ceil(n / tile_n) * split_k;
// waves = ceil(blocks / blocks_per_wave). Partial tiles and partial waves cost
// as much as full ones. Throws InvalidTile on a zero tile dimension.
std::int64_t gemm_block_count(const MatMulShape& shape, const KernelKey& key);
std::int64_t wave_count(const MatMulShape& shape, const KernelKey& key, const WaveModel& wm);
std::int64_t waves_for_blocks(std::int64_t blocks, const WaveModel& wm);

struct InterpolatedThroughput {
    double throughput = 0;
    bool below_range = false;
    bool above_range = false;
};

// Piecewise-linear throughput between the nearest samples below and above
// new_dim; exact sample values on grid hits; clamps (and flags) outside the
// sampled range.
InterpolatedThroughput interpolate_throughput(const ThroughputCurve& curve, std::int64_t new_dim);

// Reference-scaled duration:
//   base    = ref_duration * (k / ref_dim) * (ref_throughput / throughput(k))
//   latency = base * waves / ref_waves
// Throws CurveMismatch when key differs from curve.kernel.
Prediction predict_compute(const MatMulShape& shape, const KernelKey& key,
                           const ThroughputCurve& curve, const WaveModel& wm);

using KernelInstance = std::variant<MatMulShape, VectorShape, AttentionShape>;

// Varying dimension a family is collected along ("K", "length", "seq_len").
std::string_view varying_dim_of(const Family& family);

// Same formula as predict_compute with the family's block-count rule:
// TritonMM uses GEMM tiles (varying K); TritonVec uses ceil(rows / block)
// (varying length); attention uses batch * heads * ceil(q_len / block)
// (varying kv sequence length). Block size lives in key.tile_m.
Prediction predict_generic(const KernelInstance& instance, const KernelKey& key,
                           const ThroughputCurve& curve, const WaveModel& wm);

// Shape used to look a generic instance up in the config map.
MatMulShape resolution_shape(const KernelInstance& instance);

}  // namespace pm2lat
