#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hessavg/types.hpp"

namespace hessavg {

struct SparseEntry {
  int index = 0;  // 1-based, as in the file
  double value = 0.0;
};

/// Labelled sparse rows in LIBSVM layout. Labels are always ±1.
struct SparseDataset {
  Index dim = 0;
  std::vector<std::vector<SparseEntry>> rows;
  std::vector<int> labels;

  Index n() const { return static_cast<Index>(rows.size()); }
};

struct LibsvmOptions {
  /// Raw label text value -> ±1. Empty map: labels must already be ±1.
  std::map<double, int> label_map;
  /// Feature count; 0 means "max index seen".
  Index dim = 0;
};

/// Parses "label idx:val idx:val ..." lines. Throws ValidationError naming the
/// offending line on malformed tokens, non-increasing indices or bad labels.
SparseDataset parse_libsvm(std::string_view text, const LibsvmOptions& options = {});
std::string serialize_libsvm(const SparseDataset& data);

/// Deterministic shuffled split: the first k rows of a seeded permutation
/// become the training set, the rest are returned second.
std::pair<SparseDataset, SparseDataset> train_split(const SparseDataset& data, Index k, std::uint64_t seed);

struct DatasetManifest {
  std::string name;
  std::string url;
  /// 64 hex chars, or empty when the digest is pinned on first download.
  std::string sha256;
  Index expected_n = 0;
  Index dim = 0;
  Index train_size = 0;  // 0: use every row
  std::string compression = "none";  // "none" | "bz2"
  std::map<double, int> label_map;

  std::string file_name() const;
};

/// Reads a JSON manifest list ({"datasets": [...]}).
std::vector<DatasetManifest> load_manifests(const std::filesystem::path& file);
const DatasetManifest& find_manifest(const std::vector<DatasetManifest>& all, std::string_view name);
/// Manifest shipped with the repository (data/datasets.json).
std::filesystem::path default_manifest_path();
/// $HESSAVG_DATA_DIR, else ./data/cache.
std::filesystem::path default_data_dir();

/// Downloads `url` into `destination`; throws IoError on failure.
using HttpFetcher = std::function<void(const std::string& url, const std::filesystem::path& destination)>;
HttpFetcher curl_fetcher();

std::string sha256_file(const std::filesystem::path& file);
std::string sha256_hex(std::string_view bytes);

/// Ensures the dataset file is present under `dir` with a verified checksum.
/// A cached file with a matching digest is returned without any network I/O.
/// A mismatching download is deleted and reported. When the manifest carries
/// no digest the first verified download pins it in "<file>.sha256".
std::filesystem::path fetch_dataset(const DatasetManifest& manifest, const std::filesystem::path& dir,
                                    const HttpFetcher& fetcher = curl_fetcher());

/// Reads a (possibly bz2-compressed) file into memory.
std::string read_dataset_text(const std::filesystem::path& file, const std::string& compression);

/// Fetch (if needed), parse with the manifest's label map and dim, verify the
/// row count and apply the train split.
SparseDataset load_dataset(const DatasetManifest& manifest, const std::filesystem::path& dir,
                           std::uint64_t split_seed, const HttpFetcher& fetcher = curl_fetcher());

}  // namespace hessavg
