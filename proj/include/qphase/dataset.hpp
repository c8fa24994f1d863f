#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "qphase/anomaly.hpp"
#include "qphase/mps.hpp"
#include "qphase/tensor.hpp"

namespace qphase {

// Single file: 8-byte magic, u64 manifest length, JSON manifest, blob of
// little-endian doubles. Complex entries are interleaved (re, im).
constexpr int kDatasetSchemaVersion = 1;

struct DatasetEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::uint64_t offset = 0;  // bytes into the blob
  std::uint64_t count = 0;   // doubles
  std::string kind = "real";  // real | complex
  std::string provenance;
  std::uint32_t crc32 = 0;
};

struct DatasetManifest {
  int schema_version = kDatasetSchemaVersion;
  std::vector<DatasetEntry> entries;
  nlohmann::json meta = nlohmann::json::object();
  std::uint64_t blob_bytes = 0;
  std::uint32_t blob_crc32 = 0;
};

class DatasetWriter {
 public:
  void add_real(const std::string& name, const std::vector<std::size_t>& shape, const std::vector<double>& data,
                const std::string& provenance = "");
  void add_complex(const std::string& name, const DenseTensor& t, const std::string& provenance = "");
  nlohmann::json& meta() { return manifest_.meta; }
  // Temp file in the same directory, then rename over `path`.
  void save(const std::string& path) const;

 private:
  DatasetManifest manifest_;
  std::vector<double> blob_;
};

// Reads the header and manifest only; entries are read on request.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path);

  const DatasetManifest& manifest() const { return manifest_; }
  const nlohmann::json& meta() const { return manifest_.meta; }
  bool has(const std::string& name) const;
  const DatasetEntry& entry(const std::string& name) const;
  std::vector<double> read_real(const std::string& name);
  DenseTensor read_complex(const std::string& name);
  // Streams the whole blob and checks the manifest checksum.
  void verify();
  std::uint64_t bytes_read() const { return bytes_read_; }

 private:
  std::vector<double> read_raw(const DatasetEntry& e);

  std::string path_;
  std::ifstream in_;
  DatasetManifest manifest_;
  std::uint64_t blob_start_ = 0;
  std::uint64_t bytes_read_ = 0;
};

// save_dataset / load_dataset: the grid, its axes and per-point status.
void save_grid(const LabeledGrid& grid, const std::string& path, const nlohmann::json& extra_meta = {});
LabeledGrid load_grid(const std::string& path);

void add_mps(DatasetWriter& w, const std::string& prefix, const MpsState& s);
MpsState read_mps(DatasetReader& r, const std::string& prefix);

std::uint32_t crc32_of(const void* data, std::size_t bytes, std::uint32_t crc = 0);

}  // namespace qphase
