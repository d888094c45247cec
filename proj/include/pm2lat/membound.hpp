#pragma once

#include <array>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "pm2lat/core.hpp"

namespace pm2lat {

inline constexpr std::size_t kMemBoundFeatureCount = 5;
inline constexpr std::size_t kMinMemBoundRecords = kMemBoundFeatureCount + 1;
inline constexpr double kDefaultLaunchFloorUs = 2.0;

// Feature vector in regression order: flops, int_ops, bytes_loaded,
// bytes_stored, total_bytes_accessed.
Eigen::Matrix<double, 5, 1> as_vector(const MemBoundFeatures& f);

struct MemBoundRecord {
    std::string kernel_name;
    DType dtype = DType::FP32;
    MemBoundFeatures features;
    double latency_us = 0;

    bool operator==(const MemBoundRecord&) const = default;
};

struct ResidualStats {
    double max_rel_err = 0;
    double mean_rel_err = 0;

    bool operator==(const ResidualStats&) const = default;
};

struct MemBoundModel {
    std::string kernel_name;
    DType dtype = DType::FP32;
    std::array<double, kMemBoundFeatureCount> weights{};
    double intercept = 0;
    std::string train_device_id;
    ResidualStats residual_stats;

    KernelKey key() const { return KernelKey::utility(kernel_name, dtype); }

    bool operator==(const MemBoundModel&) const = default;
};

// Ordinary least squares on [features | 1] -> latency_us over the records
// matching (kernel_name, dtype). Columns are scaled to unit max before the
// solve; rank-deficient systems get the minimum-norm solution. Identical
// latencies with varying features only raise a warning.
// Throws InsufficientData below 6 matching records.
MemBoundModel fit(std::span<const MemBoundRecord> records, const std::string& kernel_name,
                  DType dtype, const std::string& train_device_id = {});

// weights . features + intercept, floored at launch_floor_us.
Prediction predict_membound(const MemBoundModel& model, const MemBoundFeatures& features,
                            double launch_floor_us = kDefaultLaunchFloorUs);

struct ScalingPolicy {
    double byte_scale = 1;
    double instr_scale = 1;
    std::string ref_device_id;
    std::string target_device_id;

    static ScalingPolicy identity() { return {}; }
};

// byte_scale = ref.dram_bw / target.dram_bw,
// instr_scale = (ref.cuda_cores * ref.max_freq) / (target.cuda_cores * target.max_freq).
ScalingPolicy derive_policy(const DeviceProfile& ref, const DeviceProfile& target);

MemBoundFeatures scale_features(const MemBoundFeatures& features, const ScalingPolicy& policy);

}  // namespace pm2lat
