#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pm2lat/aggregate.hpp"

namespace pm2lat {

// Explicit value lists per axis. Axis names and their canonical order depend
// on the family: GEMM families (batch, m, n, k), TritonVec (rows, length),
// attention (batch, heads, q_len, kv_len). batch and heads default to {1}.
struct GridSpec {
    Family family;
    DType dtype = DType::FP32;
    std::optional<TransposeMode> transpose_mode;
    std::map<std::string, std::vector<std::int64_t>> axes;
};

std::vector<std::string> canonical_axes(const Family& family);

// Checks axis names and values and returns the spec with sorted axes and
// defaulted optional axes filled in.
GridSpec normalize(const GridSpec& grid);

// Product of axis sizes; throws ValidationError on overflow.
std::uint64_t cardinality(const GridSpec& grid);

nlohmann::json to_json(const GridSpec& grid);
GridSpec grid_from_json(const nlohmann::json& j, const std::string& source = "grid");
GridSpec load_grid(const std::filesystem::path& path);
std::string fingerprint(const GridSpec& grid);

// Coordinates in canonical axis order.
using GridPoint = std::vector<std::int64_t>;

GridPoint point_at(const GridSpec& normalized, std::uint64_t index);
KernelInstance instance_of(const GridSpec& normalized, const GridPoint& point);

struct PrecomputeOptions {
    unsigned jobs = 1;
    bool skip_unresolved = false;
};

struct PrecomputeSummary {
    std::uint64_t count = 0;    // entries written
    std::uint64_t skipped = 0;  // unresolved points left out
    double elapsed_s = 0;
    double mean_us_per_prediction = 0;
};

// Predicts every grid point and writes the store. Evaluation is sharded over
// `jobs` threads; the writer emits records in canonical key order, so the
// file does not depend on the job count.
PrecomputeSummary precompute(const GridSpec& grid, const Predictor& predictor, const std::filesystem::path& out,
                             const PrecomputeOptions& options = {});

// Store file layout (all integers big-endian):
//   "PM2L" | u16 version | u32 header_len | header JSON | records
// Each record is one u64 per axis followed by the latency as an IEEE-754
// binary64. Records are sorted by key bytes.
inline constexpr char kStoreMagic[4] = {'P', 'M', '2', 'L'};
inline constexpr std::uint16_t kStoreVersion = 1;

class CacheStore {
public:
    // Maps the file read-only. Throws IoError / ParseError on a malformed
    // file and StaleCache when expected_dataset_fingerprint is given and
    // differs from the header.
    static CacheStore open(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_dataset_fingerprint = std::nullopt);

    CacheStore(CacheStore&& other) noexcept;
    CacheStore& operator=(CacheStore&& other) noexcept;
    CacheStore(const CacheStore&) = delete;
    CacheStore& operator=(const CacheStore&) = delete;
    ~CacheStore();

    // Binary search over the sorted records. Throws MissingEntry.
    double lookup(const GridPoint& point) const;
    double lookup(const std::map<std::string, std::int64_t>& named_point) const;

    const nlohmann::json& header() const { return header_; }
    const std::vector<std::string>& axes() const { return axes_; }
    std::uint64_t entry_count() const { return entries_; }

private:
    CacheStore() = default;

    const unsigned char* data_ = nullptr;
    std::size_t size_ = 0;
    const unsigned char* records_ = nullptr;
    std::uint64_t entries_ = 0;
    std::size_t record_width_ = 0;
    std::vector<std::string> axes_;
    nlohmann::json header_;
};

}  // namespace pm2lat
