#include "ia2u/watersim/corpus.hpp"

#include "ia2u/core/error.hpp"
#include "ia2u/core/image_io.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;

namespace ia2u::watersim {
namespace {

// Runs job(i) for i in [0, n) on `workers` threads; rethrows the first failure.
template <typename Job>
void parallel_for(int64_t n, int workers, Job job) {
    if (workers <= 1 || n <= 1) {
        for (int64_t i = 0; i < n; ++i) {
            job(i);
        }
        return;
    }
    std::atomic<int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int64_t i = next++; i < n; i = next++) {
                    try {
                        job(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) {
                            failure = std::current_exception();
                        }
                        next = n;
                    }
                }
            });
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

std::string sample_id(Split split, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%05d", split_name(split), index);
    return buf;
}

}  // namespace

const char* split_name(Split s) {
    switch (s) {
        case Split::Train:
            return "train";
        case Split::Val:
            return "val";
        case Split::Test:
            return "test";
    }
    return "train";
}

Split parse_split(const std::string& name) {
    if (name == "train") {
        return Split::Train;
    }
    if (name == "val") {
        return Split::Val;
    }
    if (name == "test") {
        return Split::Test;
    }
    throw ValidationError("unknown split '" + name + "' (expected train, val or test)");
}

int env_workers() {
    const char* v = std::getenv("IA2U_NUM_WORKERS");
    if (v == nullptr) {
        return 1;
    }
    const int n = std::atoi(v);
    return n >= 1 ? n : 1;
}

std::string to_json_line(const ManifestRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["split"] = split_name(r.split);
    j["clean_path"] = r.clean_path;
    j["degraded_path"] = r.degraded_path;
    j["water_type"] = r.water_type;
    auto boxes = nlohmann::ordered_json::array();
    for (const auto& b : r.boxes) {
        boxes.push_back({b.cls, b.x0, b.y0, b.x1, b.y1});
    }
    j["boxes"] = std::move(boxes);
    return j.dump();
}

ManifestRecord from_json_line(const std::string& line) {
    ManifestRecord r;
    try {
        const auto j = nlohmann::json::parse(line);
        r.id = j.at("id").get<std::string>();
        r.split = parse_split(j.value("split", std::string("train")));
        r.clean_path = j.at("clean_path").get<std::string>();
        r.degraded_path = j.at("degraded_path").get<std::string>();
        r.water_type = j.at("water_type").get<int>();
        for (const auto& b : j.at("boxes")) {
            if (b.size() != 5) {
                throw ValidationError("box must have 5 entries [cls,x0,y0,x1,y1]");
            }
            r.boxes.push_back({b[0].get<int>(), b[1].get<float>(), b[2].get<float>(), b[3].get<float>(),
                               b[4].get<float>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifest record: ") + e.what());
    }
    return r;
}

std::vector<ManifestRecord> generate_corpus(const CorpusOptions& opts, const std::string& out_dir) {
    if (opts.n_train <= 0 || opts.n_val <= 0 || opts.n_test <= 0) {
        throw ValidationError("corpus split sizes must all be positive");
    }
    std::error_code ec;
    for (const auto s : {Split::Train, Split::Val, Split::Test}) {
        fs::create_directories(fs::path(out_dir) / split_name(s), ec);
        if (ec) {
            throw IoError("cannot create '" + (fs::path(out_dir) / split_name(s)).string() + "': " +
                          ec.message());
        }
    }

    struct Slot {
        Split split;
        int index;
    };
    std::vector<Slot> slots;
    for (int i = 0; i < opts.n_train; ++i) slots.push_back({Split::Train, i});
    for (int i = 0; i < opts.n_val; ++i) slots.push_back({Split::Val, i});
    for (int i = 0; i < opts.n_test; ++i) slots.push_back({Split::Test, i});

    std::vector<ManifestRecord> records(slots.size());
    const int workers = opts.workers > 0 ? opts.workers : env_workers();
    parallel_for(static_cast<int64_t>(slots.size()), workers, [&](int64_t g) {
        const auto& slot = slots[static_cast<size_t>(g)];
        const int water_type = slot.index % kNumWaterTypes;
        auto sample = make_sample(opts.seed, static_cast<uint64_t>(g), water_type, opts.image_size,
                                  opts.with_objects);
        ManifestRecord& r = records[static_cast<size_t>(g)];
        r.id = sample_id(slot.split, slot.index);
        r.split = slot.split;
        r.clean_path = std::string(split_name(slot.split)) + "/" + r.id + "_clean.png";
        r.degraded_path = std::string(split_name(slot.split)) + "/" + r.id + "_degraded.png";
        r.water_type = water_type;
        r.boxes = std::move(sample.boxes);
        write_png((fs::path(out_dir) / r.clean_path).string(), sample.clean.data()[0]);
        write_png((fs::path(out_dir) / r.degraded_path).string(), sample.degraded.data()[0]);
    });

    const auto manifest_path = fs::path(out_dir) / kManifestName;
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write manifest '" + manifest_path.string() + "'");
    }
    for (const auto& r : records) {
        out << to_json_line(r) << '\n';
    }
    if (!out) {
        throw IoError("failed writing manifest '" + manifest_path.string() + "'");
    }
    return records;
}

std::vector<ManifestRecord> read_manifest(const std::string& corpus_dir) {
    const auto path = fs::path(corpus_dir) / kManifestName;
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest '" + path.string() + "'");
    }
    std::vector<ManifestRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            records.push_back(from_json_line(line));
        }
    }
    return records;
}

LoadedSplit load_split(const std::string& corpus_dir, Split split, int limit) {
    LoadedSplit out;
    for (auto& r : read_manifest(corpus_dir)) {
        if (r.split == split && (limit <= 0 || static_cast<int>(out.records.size()) < limit)) {
            out.records.push_back(std::move(r));
        }
    }
    if (out.records.empty()) {
        throw ValidationError(std::string("corpus '") + corpus_dir + "' has no " + split_name(split) +
                              " samples");
    }
    const auto n = static_cast<int64_t>(out.records.size());
    std::vector<torch::Tensor> clean(static_cast<size_t>(n));
    std::vector<torch::Tensor> degraded(static_cast<size_t>(n));
    parallel_for(n, env_workers(), [&](int64_t i) {
        const auto& r = out.records[static_cast<size_t>(i)];
        clean[static_cast<size_t>(i)] = read_png((fs::path(corpus_dir) / r.clean_path).string());
        degraded[static_cast<size_t>(i)] = read_png((fs::path(corpus_dir) / r.degraded_path).string());
    });
    out.clean = torch::stack(clean);
    out.degraded = torch::stack(degraded);
    std::vector<int64_t> types;
    for (const auto& r : out.records) {
        types.push_back(r.water_type);
    }
    out.water_types = torch::tensor(types, torch::kInt64);
    return out;
}

}  // namespace ia2u::watersim
