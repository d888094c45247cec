#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pm2lat/compute.hpp"
#include "pm2lat/core.hpp"
#include "pm2lat/membound.hpp"

namespace pm2lat {

inline constexpr std::string_view kSchemaVersion = "1";

// Everything collected on one device. Config records, memory-bound records
// and models are kept in canonical sorted order so that equal content means
// equal objects regardless of file or merge order.
struct Dataset {
    std::string schema_version{kSchemaVersion};
    DeviceProfile device;
    std::map<KernelKey, ThroughputCurve> curves;
    std::vector<ConfigRecord> config_map;
    std::vector<MemBoundRecord> membound_records;
    std::vector<MemBoundModel> membound_models;

    bool operator==(const Dataset&) const = default;
};

// Sorts the list sections and checks every cross-record invariant.
// `source` prefixes error messages.
void canonicalize(Dataset& ds);
void validate(const Dataset& ds, const std::string& source = "dataset");

// JSON <-> types. Decoding errors carry `source` and a JSON pointer.
nlohmann::json to_json(const KernelKey& k);
nlohmann::json to_json(const DeviceProfile& d);
nlohmann::json to_json(const ThroughputCurve& c);
nlohmann::json to_json(const MemBoundFeatures& f);
nlohmann::json to_json(const MemBoundModel& m);
nlohmann::json to_json(const Dataset& ds);
nlohmann::json to_json(const ModelGraph& g);

KernelKey kernel_key_from_json(const nlohmann::json& j, const std::string& source = "kernel");
MemBoundFeatures features_from_json(const nlohmann::json& j, const std::string& source = "features");
Dataset dataset_from_json(const nlohmann::json& j, const std::string& source = "dataset");
ModelGraph model_graph_from_json(const nlohmann::json& j, const std::string& source = "graph");

// File-level entry points. ParseError on malformed JSON, SchemaError on
// missing/mistyped fields, ValidationError on violated invariants, IoError
// when the file cannot be read or written.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
ModelGraph load_model_graph(const std::filesystem::path& path);
void save_model_graph(const ModelGraph& g, const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Union of two datasets from the same device. Identical curves/records
// dedupe; the same kernel (or config query, or model) with different content
// throws ConflictError. Different devices throw DeviceMismatch.
Dataset merge_datasets(const Dataset& a, const Dataset& b);

// Stable 64-bit FNV-1a digest of the canonical JSON form, as 16 hex digits.
std::string fingerprint(const Dataset& ds);
std::string fnv1a_hex(std::string_view bytes);

}  // namespace pm2lat
