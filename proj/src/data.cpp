#include "hessavg/data.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>

#include <boost/iostreams/copy.hpp>
#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "hessavg/rng.hpp"

#ifndef HESSAVG_SOURCE_DIR
#define HESSAVG_SOURCE_DIR "."
#endif

namespace hessavg {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw ValidationError("libsvm line " + std::to_string(line) + ": " + what);
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_int(std::string_view tok, int& out) {
  if (tok.empty()) return false;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool is_hex64(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isxdigit(c); });
}

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string digest_to_hex(const unsigned char* md, unsigned len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

}  // namespace

SparseDataset parse_libsvm(std::string_view text, const LibsvmOptions& options) {
  SparseDataset out;
  int max_index = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) tokens.push_back(line.substr(i, j - i));
      i = j;
    }
    if (tokens.empty()) continue;

    double raw_label = 0.0;
    if (!parse_double(tokens[0], raw_label)) parse_error(line_no, "unparsable label '" + std::string(tokens[0]) + "'");
    int label = 0;
    if (!options.label_map.empty()) {
      auto it = options.label_map.find(raw_label);
      if (it == options.label_map.end()) parse_error(line_no, "label '" + std::string(tokens[0]) + "' not in label map");
      label = it->second;
    } else if (raw_label == 1.0 || raw_label == -1.0) {
      label = static_cast<int>(raw_label);
    } else {
      parse_error(line_no, "label '" + std::string(tokens[0]) + "' is not +1/-1 and no label map was given");
    }
    if (label != 1 && label != -1) parse_error(line_no, "label map must produce +1/-1");

    std::vector<SparseEntry> row;
    row.reserve(tokens.size() - 1);
    int prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) parse_error(line_no, "malformed token '" + std::string(tok) + "'");
      SparseEntry e;
      if (!parse_int(tok.substr(0, colon), e.index) || e.index < 1) {
        parse_error(line_no, "bad feature index in '" + std::string(tok) + "'");
      }
      if (!parse_double(tok.substr(colon + 1), e.value)) {
        parse_error(line_no, "bad feature value in '" + std::string(tok) + "'");
      }
      if (e.index <= prev) parse_error(line_no, "feature indices must be strictly increasing");
      if (options.dim > 0 && e.index > options.dim) {
        parse_error(line_no, "feature index " + std::to_string(e.index) + " exceeds dim " + std::to_string(options.dim));
      }
      prev = e.index;
      row.push_back(e);
    }
    max_index = std::max(max_index, prev);
    out.rows.push_back(std::move(row));
    out.labels.push_back(label);
  }
  out.dim = options.dim > 0 ? options.dim : max_index;
  return out;
}

std::string serialize_libsvm(const SparseDataset& data) {
  std::string out;
  for (Index r = 0; r < data.n(); ++r) {
    out += data.labels[static_cast<std::size_t>(r)] > 0 ? "+1" : "-1";
    for (const auto& e : data.rows[static_cast<std::size_t>(r)]) {
      out += ' ';
      out += std::to_string(e.index);
      out += ':';
      out += format_double(e.value);
    }
    out += '\n';
  }
  return out;
}

std::pair<SparseDataset, SparseDataset> train_split(const SparseDataset& data, Index k, std::uint64_t seed) {
  if (k < 0 || k > data.n()) {
    throw ValidationError("train_split: k=" + std::to_string(k) + " exceeds n=" + std::to_string(data.n()));
  }
  RandomStream rng(seed, "train-split");
  const auto perm = rng.permutation(data.n());
  SparseDataset train, rest;
  train.dim = rest.dim = data.dim;
  for (Index i = 0; i < data.n(); ++i) {
    auto& dst = i < k ? train : rest;
    const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
    dst.rows.push_back(data.rows[src]);
    dst.labels.push_back(data.labels[src]);
  }
  return {std::move(train), std::move(rest)};
}

std::string DatasetManifest::file_name() const {
  return compression == "bz2" ? name + ".bz2" : name;
}

std::vector<DatasetManifest> load_manifests(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open dataset manifest " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest " + file.string() + ": " + e.what());
  }
  std::vector<DatasetManifest> out;
  try {
    for (const auto& d : j.at("datasets")) {
      DatasetManifest m;
      m.name = d.at("name").get<std::string>();
      m.url = d.at("url").get<std::string>();
      if (d.contains("sha256") && !d.at("sha256").is_null()) {
        m.sha256 = to_lower(d.at("sha256").get<std::string>());
        if (!is_hex64(m.sha256)) throw ValidationError("manifest " + m.name + ": sha256 must be 64 hex characters");
      }
      m.expected_n = d.value("n", Index{0});
      m.dim = d.value("dim", Index{0});
      m.train_size = d.value("train_size", Index{0});
      m.compression = d.value("compression", std::string("none"));
      if (m.compression != "none" && m.compression != "bz2") {
        throw ValidationError("manifest " + m.name + ": unknown compression " + m.compression);
      }
      if (d.contains("label_map")) {
        for (const auto& [k, v] : d.at("label_map").items()) m.label_map[std::stod(k)] = v.get<int>();
      }
      out.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest " + file.string() + ": " + e.what());
  }
  return out;
}

const DatasetManifest& find_manifest(const std::vector<DatasetManifest>& all, std::string_view name) {
  for (const auto& m : all)
    if (m.name == name) return m;
  throw ValidationError("unknown dataset '" + std::string(name) + "'");
}

fs::path default_manifest_path() {
  if (const char* env = std::getenv("HESSAVG_MANIFEST")) return env;
  return fs::path(HESSAVG_SOURCE_DIR) / "data" / "datasets.json";
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("HESSAVG_DATA_DIR"); env && *env) return env;
  return fs::path("data") / "cache";
}

namespace {

std::size_t write_to_file(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  return std::fwrite(ptr, size, nmemb, static_cast<std::FILE*>(user));
}

}  // namespace

HttpFetcher curl_fetcher() {
  return [](const std::string& url, const fs::path& destination) {
    static std::once_flag init;
    std::call_once(init, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
    std::FILE* file = std::fopen(destination.c_str(), "wb");
    if (!file) throw IoError("cannot write " + destination.string());
    CURL* curl = curl_easy_init();
    if (!curl) {
      std::fclose(file);
      throw IoError("curl initialization failed");
    }
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 30L);
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_to_file);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, file);
    const CURLcode rc = curl_easy_perform(curl);
    curl_easy_cleanup(curl);
    const bool closed = std::fclose(file) == 0;
    if (rc != CURLE_OK) throw IoError("download of " + url + " failed: " + curl_easy_strerror(rc));
    if (!closed) throw IoError("write to " + destination.string() + " failed");
  };
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 computation failed");
  }
  return digest_to_hex(md, len);
}

std::string sha256_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return digest_to_hex(md, len);
}

fs::path fetch_dataset(const DatasetManifest& manifest, const fs::path& dir, const HttpFetcher& fetcher) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create data directory " + dir.string() + ": " + ec.message());

  const fs::path path = dir / manifest.file_name();
  const fs::path pin = path.string() + ".sha256";
  std::string expected = manifest.sha256;
  if (expected.empty() && fs::exists(pin)) {
    std::ifstream in(pin);
    in >> expected;
    expected = to_lower(expected);
  }
  auto write_pin = [&](const std::string& digest) {
    std::ofstream out(pin);
    out << digest << "\n";
    if (!out) throw IoError("cannot write " + pin.string());
  };

  if (fs::exists(path)) {
    const std::string actual = sha256_file(path);
    if (expected.empty()) {
      write_pin(actual);
      return path;
    }
    if (actual == expected) return path;
    fs::remove(path);
  }

  const fs::path part = path.string() + ".part";
  try {
    fetcher(manifest.url, part);
  } catch (...) {
    fs::remove(part, ec);
    throw;
  }
  const std::string actual = sha256_file(part);
  if (!expected.empty() && actual != expected) {
    fs::remove(part, ec);
    throw IoError("checksum mismatch for " + manifest.name + ": expected " + expected + ", got " + actual);
  }
  fs::rename(part, path, ec);
  if (ec) throw IoError("cannot move download into place: " + ec.message());
  if (expected.empty()) write_pin(actual);
  return path;
}

std::string read_dataset_text(const fs::path& file, const std::string& compression) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  if (compression == "none") {
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  if (compression != "bz2") throw ValidationError("unknown compression " + compression);
  namespace io = boost::iostreams;
  io::filtering_istream stream;
  stream.push(io::bzip2_decompressor());
  stream.push(in);
  std::ostringstream ss;
  try {
    io::copy(stream, ss);
  } catch (const std::exception& e) {
    throw IoError("bz2 decompression of " + file.string() + " failed: " + e.what());
  }
  return ss.str();
}

SparseDataset load_dataset(const DatasetManifest& manifest, const fs::path& dir, std::uint64_t split_seed,
                           const HttpFetcher& fetcher) {
  const fs::path file = fetch_dataset(manifest, dir, fetcher);
  LibsvmOptions opts;
  opts.label_map = manifest.label_map;
  opts.dim = manifest.dim;
  SparseDataset data = parse_libsvm(read_dataset_text(file, manifest.compression), opts);
  if (manifest.expected_n > 0 && data.n() != manifest.expected_n) {
    throw ValidationError(manifest.name + ": expected " + std::to_string(manifest.expected_n) + " rows, parsed " +
                          std::to_string(data.n()));
  }
  if (manifest.train_size > 0 && manifest.train_size < data.n()) {
    return train_split(data, manifest.train_size, split_seed).first;
  }
  return data;
}

}  // namespace hessavg
