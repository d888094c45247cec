#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pm2lat/compute.hpp"
#include "pm2lat/core.hpp"
#include "pm2lat/ingest.hpp"
#include "pm2lat/membound.hpp"

namespace pm2lat {

// Default wave model of a device: one resident block per SM.
WaveModel default_wave_model(const DeviceProfile& device);

// Read-only prediction engine over one dataset. Memory-bound models stored in
// the dataset are used as-is; any (kernel, dtype) group that only has raw
// records is fitted on construction. Safe to share across threads.
class Predictor {
public:
    explicit Predictor(const Dataset& dataset, std::optional<WaveModel> wave_model = std::nullopt,
                       double launch_floor_us = kDefaultLaunchFloorUs);

    // Resolves the configuration for a compute-bound instance and predicts it.
    Prediction predict_compute_instance(const Family& family, DType dtype, TransposeMode transpose,
                                        const KernelInstance& instance) const;
    Prediction predict_utility(const std::string& kernel_name, DType dtype, const MemBoundFeatures& features) const;

    // Dispatches on the layer family. Prediction-side failures are rethrown
    // as UnresolvedLayer naming the layer.
    Prediction predict_layer(const LayerSpec& layer) const;

    const DeviceProfile& device() const { return device_; }
    const WaveModel& wave_model() const { return wave_model_; }
    const std::map<std::pair<std::string, DType>, MemBoundModel>& membound_models() const { return models_; }
    const std::string& dataset_fingerprint() const { return fingerprint_; }

private:
    DeviceProfile device_;
    WaveModel wave_model_;
    double launch_floor_us_;
    std::map<KernelKey, ThroughputCurve> curves_;
    ConfigResolver resolver_;
    std::map<std::pair<std::string, DType>, MemBoundModel> models_;
    std::string fingerprint_;
};

// Fits one model per (kernel_name, dtype) group with enough records.
std::vector<MemBoundModel> fit_all(const Dataset& dataset);

// Model-level latencies sit on a 2^-20 us grid (about a femtosecond). Every
// sum of grid values below 2^33 us is exact in binary64, so graph totals are
// independent of summation order and additive under concatenation.
inline constexpr double kLatencyQuantumUs = 1.0 / 1048576.0;
double quantize_latency(double latency_us);

enum class PredictorKind { Compute, MemBound };
std::string_view to_string(PredictorKind k);

struct LayerPrediction {
    std::string layer_id;
    Prediction prediction;
    PredictorKind kind = PredictorKind::Compute;
};

struct LayerFlag {
    std::string layer_id;
    std::string flag;  // "nearest_config", "below_range", "above_range", "floored"
};

struct ModelPrediction {
    std::string model_name;
    double total_latency_us = 0;
    std::vector<LayerPrediction> per_layer;
    std::vector<LayerFlag> flags;
};

// Per-layer predictions in execution order, each quantized to the latency
// grid, summed left to right.
ModelPrediction predict_model(const ModelGraph& graph, const Predictor& predictor);
ModelPrediction predict_model(const ModelGraph& graph, const Dataset& dataset, const WaveModel& wm);

// (predicted - measured) / measured; ZeroMeasured when measured <= 0.
double relative_error(double measured_us, double predicted_us);

struct ErrorCase {
    std::string case_id;
    double measured_us = 0;
    double predicted_us = 0;
    double axis = 0;  // default binning coordinate
};

struct ErrorRecord {
    std::string case_id;
    double measured_us = 0;
    double predicted_us = 0;
    double signed_rel_err = 0;
    double axis = 0;
};

struct ErrorBin {
    double lo = 0;
    double hi = 0;
    std::size_t count = 0;
    std::optional<double> max_abs_rel_err;  // empty bins carry no value
};

inline constexpr std::size_t kHistogramBuckets = 20;  // 5% wide, last is >= 95%
inline constexpr double kHistogramWidth = 0.05;

struct ErrorReport {
    std::vector<ErrorRecord> records;
    double mean_abs_rel_err = 0;
    double axis_min = 0;
    double axis_max = 0;
    std::vector<ErrorBin> binned_max;
    std::array<std::size_t, kHistogramBuckets> histogram{};
};

using ErrorAxis = std::function<double(const ErrorCase&)>;

// Equal-width bins over [min axis, max axis] with the max |rel err| per bin,
// plus a 5%-bucket histogram of |rel err|. Throws EmptyInput on no records.
ErrorReport build_error_report(const std::vector<ErrorCase>& cases, const ErrorAxis& axis = {},
                               std::size_t bins = 100);

std::size_t histogram_bucket(double abs_rel_err);

}  // namespace pm2lat
