#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pm2lat/compute.hpp"
#include "pm2lat/core.hpp"
#include "pm2lat/ingest.hpp"
#include "pm2lat/membound.hpp"

namespace pm2lat::oracle {

// throughput(x) = (a x + b) / (c x + d), in GFLOP/s.
struct PlantedCurve {
    double a = 1;
    double b = 0;
    double c = 0;
    double d = 1;

    double operator()(double x) const { return (a * x + b) / (c * x + d); }
};

// latency_us = weights . features + intercept
struct PlantedLinear {
    std::array<double, kMemBoundFeatureCount> weights{};
    double intercept = 0;
};

// Per-element proxy metrics of a utility kernel; features for a launch over
// `rows` x `cols` elements are derived from these.
struct UtilityTraits {
    double flops_per_element = 1;
    double int_ops_per_element = 1;
    double int_ops_per_row = 0;
    double loads_per_element = 1;  // input arity
    double stores_per_element = 1;
};

struct SyntheticDevice {
    DeviceProfile profile;
    std::map<KernelKey, PlantedCurve> curves;
    std::map<std::pair<std::string, DType>, PlantedLinear> membound;
    std::map<std::pair<std::string, DType>, UtilityTraits> utility_traits;
    std::uint64_t noise_seed = 0;
    double noise_rel_sigma = 0;
};

// Throws ValidationError when a planted curve is non-positive or has a pole
// anywhere on [1, 2 * max_dim].
void validate(const SyntheticDevice& dev, std::int64_t max_dim = 8192);

// Work one wave does at a given varying-dimension value, in GFLOP-equivalents:
// 2 * varying * tile_m * max(tile_n, 1) * blocks_per_wave * 1e-9.
double wave_work_gflop(const KernelKey& key, std::int64_t varying, const WaveModel& wm);

// Ground truth: wave_work(varying) / throughput(varying) * waves, with the
// same partial-tile and partial-wave ceilings as the predictor. With nonzero
// noise the result is multiplied by exp(N(0, sigma)) drawn from a stream keyed
// by (seed, key, shape, repetition).
double true_duration(const SyntheticDevice& dev, const KernelKey& key, const KernelInstance& instance,
                     const WaveModel& wm, std::int64_t repetition = 0);
double true_duration(const SyntheticDevice& dev, const KernelKey& key, const MatMulShape& shape,
                     const WaveModel& wm, std::int64_t repetition = 0);

double true_membound_latency(const SyntheticDevice& dev, const std::string& kernel_name, DType dtype,
                             const MemBoundFeatures& features, std::int64_t repetition = 0);

MemBoundFeatures utility_features(const UtilityTraits& traits, DType dtype, std::int64_t rows, std::int64_t cols);

struct SamplingPlan {
    std::vector<std::int64_t> dims;  // powers of two 32..8192 by default
    std::int64_t ref_waves = 2;
    std::int64_t repetitions = 25;
    // Shapes for which the heuristic choice (fastest planted kernel) is recorded.
    std::vector<std::int64_t> config_batch{1};
    std::vector<std::int64_t> config_m;
    std::vector<std::int64_t> config_n;
    std::vector<std::int64_t> config_k;
    // (rows, cols) launches recorded for each utility kernel.
    std::vector<std::pair<std::int64_t, std::int64_t>> utility_sizes;

    static SamplingPlan defaults();
};

std::vector<std::int64_t> powers_of_two(std::int64_t lo, std::int64_t hi);

// Collection shape for a key: full tiles and full waves at ref_waves.
KernelInstance collection_instance(const KernelKey& key, const WaveModel& wm, std::int64_t ref_waves,
                                   std::int64_t varying);

Dataset emit_fixture(const SyntheticDevice& dev, const SamplingPlan& plan);

struct OracleConfig {
    SyntheticDevice device;
    SamplingPlan plan;
};

// Named presets: "fp32" (13 kernel keys), "bf16" (100 kernel keys), "generic"
// (Triton / attention families).
OracleConfig preset(const std::string& name);
std::vector<std::string> preset_names();

nlohmann::json to_json(const OracleConfig& cfg);
OracleConfig oracle_config_from_json(const nlohmann::json& j, const std::string& source = "oracle config");

// Table I style device profiles used by the presets and tests.
DeviceProfile table_device(const std::string& name);  // "rtx3060m", "t4", "l4", "a100", "rtx5070"

}  // namespace pm2lat::oracle
