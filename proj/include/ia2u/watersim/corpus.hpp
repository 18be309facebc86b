#pragma once

#include "ia2u/watersim/watersim.hpp"

#include <torch/torch.h>

#include <string>
#include <vector>

namespace ia2u::watersim {

enum class Split { Train, Val, Test };

const char* split_name(Split s);
/// Throws ValidationError for anything but "train", "val" or "test".
Split parse_split(const std::string& name);

/// One line of manifest.jsonl. Paths are relative to the corpus directory.
struct ManifestRecord {
    std::string id;
    Split split = Split::Train;
    std::string clean_path;
    std::string degraded_path;
    int water_type = 0;
    std::vector<Box> boxes;

    bool operator==(const ManifestRecord&) const = default;
};

struct CorpusOptions {
    int n_train = 0;
    int n_val = 0;
    int n_test = 0;
    bool with_objects = false;
    int image_size = 64;
    uint64_t seed = 0;
    /// Worker threads; 0 reads IA2U_NUM_WORKERS (default 1).
    int workers = 0;
};

inline constexpr const char* kManifestName = "manifest.jsonl";

/// Renders samples as PNG pairs under out_dir/{train,val,test}/ and writes
/// out_dir/manifest.jsonl. Water types cycle 0..8 within each split, so every
/// split is balanced. Output is identical for any worker count.
/// Throws ValidationError for non-positive counts and IoError for unwritable paths.
std::vector<ManifestRecord> generate_corpus(const CorpusOptions& opts, const std::string& out_dir);

std::string to_json_line(const ManifestRecord& r);
ManifestRecord from_json_line(const std::string& line);

std::vector<ManifestRecord> read_manifest(const std::string& corpus_dir);

/// Split loaded into memory. Images are (N, 3, H, W) float tensors.
struct LoadedSplit {
    std::vector<ManifestRecord> records;
    torch::Tensor clean;
    torch::Tensor degraded;
    torch::Tensor water_types;  // int64 (N)

    int64_t size() const { return static_cast<int64_t>(records.size()); }
};

/// Loads every record of `split`; `limit` > 0 keeps only the first `limit`.
LoadedSplit load_split(const std::string& corpus_dir, Split split, int limit = 0);

/// Value of IA2U_NUM_WORKERS (at least 1; 1 when unset or invalid).
int env_workers();

}  // namespace ia2u::watersim
