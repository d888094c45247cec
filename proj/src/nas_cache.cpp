#include "pm2lat/nas_cache.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <thread>

#include "pm2lat/error.hpp"

namespace pm2lat {

using nlohmann::json;

namespace {

void put_be(std::string& out, std::uint64_t v, int bytes) {
    for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

std::uint64_t get_be(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
    return v;
}

std::string encode_key(const GridPoint& point) {
    std::string key;
    key.reserve(point.size() * 8);
    for (auto v : point) put_be(key, static_cast<std::uint64_t>(v), 8);
    return key;
}

std::string point_label(const std::vector<std::string>& axes, const GridPoint& point) {
    std::string s = "(";
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (i > 0) s += ", ";
        s += axes[i] + "=" + std::to_string(point[i]);
    }
    return s + ")";
}

bool defaults_to_one(const std::string& axis) { return axis == "batch" || axis == "heads"; }

}  // namespace

std::vector<std::string> canonical_axes(const Family& family) {
    switch (family.kind) {
        case FamilyKind::TritonVec: return {"rows", "length"};
        case FamilyKind::FlashAttention:
        case FamilyKind::CutlassAttention: return {"batch", "heads", "q_len", "kv_len"};
        case FamilyKind::Utility:
            throw ValidationError("utility kernels are not grid-precomputable; predict them from features");
        default: return {"batch", "m", "n", "k"};
    }
}

GridSpec normalize(const GridSpec& grid) {
    GridSpec out = grid;
    out.axes.clear();
    const auto names = canonical_axes(grid.family);
    for (const auto& [name, values] : grid.axes) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            throw ValidationError("grid axis '" + name + "' does not apply to " + to_string(grid.family));
        }
    }
    for (const auto& name : names) {
        auto it = grid.axes.find(name);
        if (it == grid.axes.end()) {
            if (!defaults_to_one(name)) throw ValidationError("grid is missing axis '" + name + "'");
            out.axes[name] = {1};
            continue;
        }
        auto values = it->second;
        if (values.empty()) throw ValidationError("grid axis '" + name + "' is empty");
        std::sort(values.begin(), values.end());
        if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
            throw ValidationError("grid axis '" + name + "' repeats a value");
        }
        if (values.front() < 1) throw ValidationError("grid axis '" + name + "' has a value < 1");
        out.axes[name] = std::move(values);
    }
    if (!out.transpose_mode) out.transpose_mode = default_transpose(grid.family);
    return out;
}

std::uint64_t cardinality(const GridSpec& grid) {
    const auto g = normalize(grid);
    std::uint64_t total = 1;
    for (const auto& [name, values] : g.axes) {
        const auto n = static_cast<std::uint64_t>(values.size());
        if (total > UINT64_MAX / n) throw ValidationError("grid cardinality overflows 64 bits");
        total *= n;
    }
    return total;
}

json to_json(const GridSpec& grid) {
    json j;
    j["family"] = to_string(grid.family);
    j["dtype"] = to_string(grid.dtype);
    if (grid.transpose_mode) j["transpose_mode"] = to_string(*grid.transpose_mode);
    j["axes"] = grid.axes;
    return j;
}

GridSpec grid_from_json(const json& j, const std::string& source) {
    GridSpec g;
    try {
        g.family = parse_family(j.at("family").get<std::string>());
        g.dtype = parse_dtype(j.at("dtype").get<std::string>());
        if (j.contains("transpose_mode")) g.transpose_mode = parse_transpose(j.at("transpose_mode").get<std::string>());
        g.axes = j.at("axes").get<std::map<std::string, std::vector<std::int64_t>>>();
    } catch (const json::exception& e) {
        throw SchemaError(source + ": " + e.what());
    }
    return g;
}

GridSpec load_grid(const std::filesystem::path& path) { return grid_from_json(read_json_file(path), path.string()); }

std::string fingerprint(const GridSpec& grid) { return fnv1a_hex(to_json(normalize(grid)).dump()); }

GridPoint point_at(const GridSpec& g, std::uint64_t index) {
    const auto names = canonical_axes(g.family);
    GridPoint p(names.size());
    for (std::size_t i = names.size(); i-- > 0;) {
        const auto& values = g.axes.at(names[i]);
        p[i] = values[index % values.size()];
        index /= values.size();
    }
    return p;
}

KernelInstance instance_of(const GridSpec& g, const GridPoint& p) {
    switch (g.family.kind) {
        case FamilyKind::TritonVec: return VectorShape{p[0], p[1]};
        case FamilyKind::FlashAttention:
        case FamilyKind::CutlassAttention: return AttentionShape{p[0], p[1], p[2], p[3]};
        default: return MatMulShape{p[0], p[1], p[2], p[3]};
    }
}

PrecomputeSummary precompute(const GridSpec& grid, const Predictor& predictor, const std::filesystem::path& out,
                             const PrecomputeOptions& options) {
    const auto g = normalize(grid);
    const auto names = canonical_axes(g.family);
    const auto total = cardinality(g);
    std::vector<double> latency(total);
    std::vector<char> resolved(total, 0);

    const auto start = std::chrono::steady_clock::now();
    const unsigned jobs = std::max(1U, options.jobs);
    auto work = [&](std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t i = lo; i < hi; ++i) {
            try {
                latency[i] = predictor
                                 .predict_compute_instance(g.family, g.dtype, *g.transpose_mode,
                                                           instance_of(g, point_at(g, i)))
                                 .latency_us;
                resolved[i] = 1;
            } catch (const Error& e) {
                if (e.category() != ErrorCategory::Prediction) throw;
            }
        }
    };
    if (jobs == 1) {
        work(0, total);
    } else {
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(jobs);
        const std::uint64_t shard = (total + jobs - 1) / jobs;
        for (unsigned t = 0; t < jobs; ++t) {
            const auto lo = std::min<std::uint64_t>(total, shard * t);
            const auto hi = std::min<std::uint64_t>(total, lo + shard);
            threads.emplace_back([&, lo, hi, t] {
                try {
                    work(lo, hi);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : threads) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    PrecomputeSummary summary;
    for (std::uint64_t i = 0; i < total; ++i) {
        if (resolved[i]) continue;
        if (!options.skip_unresolved) {
            throw UnresolvedPoint("grid point " + point_label(names, point_at(g, i)) + " for " + to_string(g.family) +
                                  "/" + std::string(to_string(g.dtype)) + " cannot be resolved on " +
                                  predictor.device().device_id);
        }
        ++summary.skipped;
    }
    summary.count = total - summary.skipped;
    summary.elapsed_s = elapsed;
    summary.mean_us_per_prediction = total == 0 ? 0 : elapsed * 1e6 / static_cast<double>(total);

    json header;
    header["device_id"] = predictor.device().device_id;
    header["dataset_fingerprint"] = predictor.dataset_fingerprint();
    header["grid_fingerprint"] = fingerprint(g);
    header["entry_count"] = summary.count;
    header["family"] = to_string(g.family);
    header["dtype"] = to_string(g.dtype);
    header["transpose_mode"] = to_string(*g.transpose_mode);
    header["axes"] = names;
    header["key_width"] = names.size() * 8;
    const auto header_text = header.dump();

    std::string bytes(kStoreMagic, sizeof kStoreMagic);
    put_be(bytes, kStoreVersion, 2);
    put_be(bytes, header_text.size(), 4);
    bytes += header_text;
    bytes.reserve(bytes.size() + summary.count * (names.size() + 1) * 8);
    for (std::uint64_t i = 0; i < total; ++i) {
        if (!resolved[i]) continue;
        bytes += encode_key(point_at(g, i));
        put_be(bytes, std::bit_cast<std::uint64_t>(latency[i]), 8);
    }
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + out.string() + "'");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for '" + out.string() + "'");
    return summary;
}

// ---------------------------------------------------------------------------
// CacheStore
// ---------------------------------------------------------------------------

CacheStore CacheStore::open(const std::filesystem::path& path, const std::optional<std::string>& expected) {
    const int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) throw IoError("cannot open '" + path.string() + "'");
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw IoError("cannot stat '" + path.string() + "'");
    }
    CacheStore store;
    store.size_ = static_cast<std::size_t>(st.st_size);
    if (store.size_ < 10) {
        ::close(fd);
        throw ParseError(path.string() + ": too short for a store file");
    }
    void* mapped = ::mmap(nullptr, store.size_, PROT_READ, MAP_PRIVATE, fd, 0);
    ::close(fd);
    if (mapped == MAP_FAILED) throw IoError("cannot map '" + path.string() + "'");
    store.data_ = static_cast<const unsigned char*>(mapped);

    if (std::memcmp(store.data_, kStoreMagic, sizeof kStoreMagic) != 0) {
        throw ParseError(path.string() + ": bad magic, not a store file");
    }
    const auto version = get_be(store.data_ + 4, 2);
    if (version != kStoreVersion) throw ParseError(path.string() + ": unsupported store version " + std::to_string(version));
    const auto header_len = static_cast<std::size_t>(get_be(store.data_ + 6, 4));
    if (10 + header_len > store.size_) throw ParseError(path.string() + ": truncated header");
    try {
        store.header_ = json::parse(store.data_ + 10, store.data_ + 10 + header_len);
        store.axes_ = store.header_.at("axes").get<std::vector<std::string>>();
        store.entries_ = store.header_.at("entry_count").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": bad header: " + e.what());
    }
    store.record_width_ = (store.axes_.size() + 1) * 8;
    store.records_ = store.data_ + 10 + header_len;
    if (store.records_ + store.entries_ * store.record_width_ != store.data_ + store.size_) {
        throw ParseError(path.string() + ": record section size does not match entry_count");
    }
    if (expected) {
        const auto stored = store.header_.value("dataset_fingerprint", std::string{});
        if (stored != *expected) {
            throw StaleCache(path.string() + ": built from dataset " + stored + ", expected " + *expected);
        }
    }
    return store;
}

CacheStore::CacheStore(CacheStore&& o) noexcept { *this = std::move(o); }

CacheStore& CacheStore::operator=(CacheStore&& o) noexcept {
    if (this != &o) {
        if (data_ != nullptr) ::munmap(const_cast<unsigned char*>(data_), size_);
        data_ = std::exchange(o.data_, nullptr);
        size_ = std::exchange(o.size_, 0);
        records_ = std::exchange(o.records_, nullptr);
        entries_ = std::exchange(o.entries_, 0);
        record_width_ = o.record_width_;
        axes_ = std::move(o.axes_);
        header_ = std::move(o.header_);
    }
    return *this;
}

CacheStore::~CacheStore() {
    if (data_ != nullptr) ::munmap(const_cast<unsigned char*>(data_), size_);
}

double CacheStore::lookup(const GridPoint& point) const {
    if (point.size() != axes_.size()) {
        throw MissingEntry("point has " + std::to_string(point.size()) + " coordinates, store has " +
                           std::to_string(axes_.size()) + " axes");
    }
    const auto key = encode_key(point);
    std::uint64_t lo = 0;
    std::uint64_t hi = entries_;
    while (lo < hi) {
        const auto mid = lo + (hi - lo) / 2;
        const auto* rec = records_ + mid * record_width_;
        const int cmp = std::memcmp(rec, key.data(), key.size());
        if (cmp == 0) return std::bit_cast<double>(get_be(rec + key.size(), 8));
        if (cmp < 0) lo = mid + 1;
        else hi = mid;
    }
    throw MissingEntry("no entry for " + point_label(axes_, point));
}

double CacheStore::lookup(const std::map<std::string, std::int64_t>& named) const {
    GridPoint p;
    for (const auto& axis : axes_) {
        auto it = named.find(axis);
        if (it == named.end()) {
            if (!defaults_to_one(axis)) throw MissingEntry("point is missing axis '" + axis + "'");
            p.push_back(1);
        } else {
            p.push_back(it->second);
        }
    }
    for (const auto& [name, v] : named) {
        if (std::find(axes_.begin(), axes_.end(), name) == axes_.end()) {
            throw MissingEntry("store has no axis '" + name + "'");
        }
    }
    return lookup(p);
}

}  // namespace pm2lat
