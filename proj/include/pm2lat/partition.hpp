#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pm2lat/aggregate.hpp"

namespace pm2lat {

// Layers [0, cut) run on device A, [cut, L) on device B.
struct PartitionPlan {
    std::size_t cut_after_layer_index = 0;  // 0 = all on B, L = all on A
    double stage_a_us = 0;
    double stage_b_us = 0;
    double transfer_us = 0;  // included in stage_b_us
    double bottleneck_us = 0;
    ModelPrediction prediction_a;  // every layer on A
    ModelPrediction prediction_b;  // every layer on B
};

struct CutChoice {
    std::size_t cut = 0;
    double stage_a_us = 0;
    double stage_b_us = 0;
    double transfer_us = 0;
    double bottleneck_us = 0;
};

// Scans all L + 1 cuts. Stage sums accumulate in execution order, so they
// equal the sequential model totals of the same layer ranges bit for bit.
// transfer_us[c] (optional, size L + 1) is added to stage B for 0 < c < L.
// Ties go to the smaller cut.
CutChoice best_cut(std::span<const double> latency_a, std::span<const double> latency_b,
                   std::span<const double> transfer_us = {});

struct PartitionOptions {
    // Inter-device link bandwidth; zero disables transfer cost.
    double link_gbs = 0;
};

// Bytes of the activation a layer hands to its successor.
double activation_bytes(const LayerSpec& layer);

PartitionPlan partition_two_device(const ModelGraph& graph, const Predictor& device_a, const Predictor& device_b,
                                   const PartitionOptions& options = {});
PartitionPlan partition_two_device(const ModelGraph& graph, const Dataset& ds_a, const Dataset& ds_b,
                                   const WaveModel& wm_a, const WaveModel& wm_b,
                                   const PartitionOptions& options = {});

// Steady-state pipeline: stage_a + stage_b + (num_requests - 1) * bottleneck.
double throughput_estimate(const PartitionPlan& plan, std::int64_t num_requests);

}  // namespace pm2lat
