#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "pm2lat/core.hpp"
#include "pm2lat/log.hpp"

namespace pm2lat::test {

inline KernelKey gemm_key(std::int64_t tile_m = 128, std::int64_t tile_n = 128, std::int64_t split_k = 1,
                          FamilyKind kind = FamilyKind::MatMul) {
    KernelKey k;
    k.family = {kind, ""};
    k.tile_m = tile_m;
    k.tile_n = tile_n;
    k.split_k = split_k;
    k.stages = 3;
    k.transpose_mode = kind == FamilyKind::Linear ? TransposeMode::TN : TransposeMode::NN;
    return k;
}

// Curve over the given (dim, throughput) points with the last point as the reference.
inline ThroughputCurve make_curve(const KernelKey& key, std::vector<ThroughputSample> samples, double ref_duration_us,
                                  std::int64_t ref_waves = 1, std::string varying = "K") {
    ThroughputCurve c;
    c.kernel = key;
    c.varying_dim_name = std::move(varying);
    c.samples = std::move(samples);
    c.ref_dim_value = c.samples.back().dim_value;
    c.ref_duration_us = ref_duration_us;
    c.ref_waves = ref_waves;
    c.device_id = "test-device";
    return c;
}

inline DeviceProfile test_device(std::string id = "test-device") {
    DeviceProfile d;
    d.device_id = std::move(id);
    d.max_freq_ghz = 1.5;
    d.fp32_tflops = 10;
    d.dram_bw_gbs = 500;
    d.mem_gb = 16;
    d.l2_mb = 4;
    d.sm_count = 30;
    d.cuda_cores = 3840;
    d.power_w = 150;
    d.collection_freq_mhz = 1500;
    return d;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("pm2lat-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Collects warnings for the lifetime of the object.
class WarningCapture {
public:
    WarningCapture() {
        set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
    }
    ~WarningCapture() { reset_warning_sink(); }
    std::vector<std::string> messages;
};

}  // namespace pm2lat::test
