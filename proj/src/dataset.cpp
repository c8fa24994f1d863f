#include "qphase/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include <unistd.h>
#include <zlib.h>

namespace qphase {

namespace {

constexpr char kMagic[8] = {'Q', 'P', 'H', 'A', 'S', 'E', 'D', 'S'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

// Host-independent little-endian encoding.
std::string encode(const std::vector<double>& xs) {
  std::string out;
  out.reserve(xs.size() * 8);
  for (double x : xs) put_u64(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

std::vector<double> decode(const std::string& bytes) {
  std::vector<double> out(bytes.size() / 8);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<double>(get_u64(p + 8 * i));
  return out;
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["blob_bytes"] = m.blob_bytes;
  j["blob_crc32"] = m.blob_crc32;
  j["meta"] = m.meta;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries)
    j["entries"].push_back({{"name", e.name},
                            {"shape", e.shape},
                            {"offset", e.offset},
                            {"count", e.count},
                            {"kind", e.kind},
                            {"provenance", e.provenance},
                            {"crc32", e.crc32}});
  return j;
}

DatasetManifest from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != kDatasetSchemaVersion)
    throw Error(ErrorCode::SchemaVersionMismatch, "container schema " + std::to_string(m.schema_version) +
                                                      ", this build reads " + std::to_string(kDatasetSchemaVersion));
  m.blob_bytes = j.at("blob_bytes").get<std::uint64_t>();
  m.blob_crc32 = j.at("blob_crc32").get<std::uint32_t>();
  m.meta = j.at("meta");
  for (const auto& e : j.at("entries")) {
    DatasetEntry d;
    d.name = e.at("name").get<std::string>();
    d.shape = e.at("shape").get<std::vector<std::size_t>>();
    d.offset = e.at("offset").get<std::uint64_t>();
    d.count = e.at("count").get<std::uint64_t>();
    d.kind = e.at("kind").get<std::string>();
    d.provenance = e.at("provenance").get<std::string>();
    d.crc32 = e.at("crc32").get<std::uint32_t>();
    m.entries.push_back(d);
  }
  return m;
}

void check_layout(const DatasetManifest& m) {
  std::vector<const DatasetEntry*> es;
  for (const auto& e : m.entries) es.push_back(&e);
  std::sort(es.begin(), es.end(), [](auto a, auto b) { return a->offset < b->offset; });
  std::uint64_t end = 0;
  for (const auto* e : es) {
    if (e->offset < end) throw Error(ErrorCode::ChecksumMismatch, "overlapping entries at '" + e->name + "'");
    end = e->offset + 8 * e->count;
  }
  if (end > m.blob_bytes) throw Error(ErrorCode::ChecksumMismatch, "entry extends past the blob");
}

}  // namespace

std::uint32_t crc32_of(const void* data, std::size_t bytes, std::uint32_t crc) {
  return static_cast<std::uint32_t>(::crc32(crc, static_cast<const Bytef*>(data), static_cast<uInt>(bytes)));
}

void DatasetWriter::add_real(const std::string& name, const std::vector<std::size_t>& shape,
                             const std::vector<double>& data, const std::string& provenance) {
  if (shape_product(shape) != data.size() && !(shape.empty() && data.size() == 1))
    throw Error(ErrorCode::ShapeMismatch, "entry '" + name + "' shape does not match its data");
  for (const auto& e : manifest_.entries)
    if (e.name == name) throw Error(ErrorCode::ValidationError, "duplicate entry '" + name + "'");
  DatasetEntry e;
  e.name = name;
  e.shape = shape;
  e.offset = blob_.size() * 8;
  e.count = data.size();
  e.provenance = provenance;
  const std::string bytes = encode(data);
  e.crc32 = crc32_of(bytes.data(), bytes.size());
  blob_.insert(blob_.end(), data.begin(), data.end());
  manifest_.entries.push_back(e);
}

void DatasetWriter::add_complex(const std::string& name, const DenseTensor& t, const std::string& provenance) {
  std::vector<double> flat;
  flat.reserve(2 * t.size());
  for (const auto& z : t.data()) {
    flat.push_back(z.real());
    flat.push_back(z.imag());
  }
  std::vector<std::size_t> shape = t.shape();
  add_real(name, {flat.size()}, flat, provenance);
  manifest_.entries.back().shape = shape;
  manifest_.entries.back().kind = "complex";
}

void DatasetWriter::save(const std::string& path) const {
  namespace fs = std::filesystem;
  const std::string blob = encode(blob_);
  DatasetManifest m = manifest_;
  m.blob_bytes = blob.size();
  m.blob_crc32 = crc32_of(blob.data(), blob.size());
  const std::string manifest = to_json(m).dump(1);
  std::string header(kMagic, 8);
  put_u64(header, manifest.size());

  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(header.data(), header.size());
    out.write(manifest.data(), manifest.size());
    out.write(blob.data(), blob.size());
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::IoError, "rename to " + path + " failed: " + ec.message());
  }
}

DatasetReader::DatasetReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorCode::IoError, "cannot open dataset " + path);
  unsigned char head[16];
  in_.read(reinterpret_cast<char*>(head), 16);
  if (in_.gcount() != 16 || std::memcmp(head, kMagic, 8) != 0)
    throw Error(ErrorCode::SchemaVersionMismatch, path + " is not a dataset container");
  const std::uint64_t mlen = get_u64(head + 8);
  const auto file_size = std::filesystem::file_size(path);
  if (16 + mlen > file_size) throw Error(ErrorCode::ChecksumMismatch, "truncated manifest in " + path);
  std::string text(mlen, '\0');
  in_.read(text.data(), static_cast<std::streamsize>(mlen));
  bytes_read_ = 16 + mlen;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ChecksumMismatch, "corrupt manifest in " + path + ": " + e.what());
  }
  try {
    manifest_ = from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ChecksumMismatch, "corrupt manifest in " + path + ": " + e.what());
  }
  blob_start_ = 16 + mlen;
  if (blob_start_ + manifest_.blob_bytes != file_size)
    throw Error(ErrorCode::ChecksumMismatch, "blob size does not match the manifest (partial write?)");
  check_layout(manifest_);
}

bool DatasetReader::has(const std::string& name) const {
  return std::any_of(manifest_.entries.begin(), manifest_.entries.end(),
                     [&](const DatasetEntry& e) { return e.name == name; });
}

const DatasetEntry& DatasetReader::entry(const std::string& name) const {
  for (const auto& e : manifest_.entries)
    if (e.name == name) return e;
  throw Error(ErrorCode::ValidationError, "no entry '" + name + "' in " + path_);
}

std::vector<double> DatasetReader::read_raw(const DatasetEntry& e) {
  std::string bytes(8 * e.count, '\0');
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(blob_start_ + e.offset));
  in_.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in_.gcount()) != bytes.size())
    throw Error(ErrorCode::IoError, "short read of '" + e.name + "'");
  bytes_read_ += bytes.size();
  if (crc32_of(bytes.data(), bytes.size()) != e.crc32)
    throw Error(ErrorCode::ChecksumMismatch, "entry '" + e.name + "' fails its checksum");
  return decode(bytes);
}

std::vector<double> DatasetReader::read_real(const std::string& name) {
  const auto& e = entry(name);
  if (e.kind != "real") throw Error(ErrorCode::ValidationError, "entry '" + name + "' is " + e.kind);
  return read_raw(e);
}

DenseTensor DatasetReader::read_complex(const std::string& name) {
  const auto& e = entry(name);
  if (e.kind != "complex") throw Error(ErrorCode::ValidationError, "entry '" + name + "' is " + e.kind);
  const auto flat = read_raw(e);
  std::vector<cplx> data(flat.size() / 2);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = cplx(flat[2 * i], flat[2 * i + 1]);
  return DenseTensor(e.shape, std::move(data));
}

void DatasetReader::verify() {
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(blob_start_));
  std::vector<char> buf(1 << 16);
  std::uint64_t left = manifest_.blob_bytes;
  std::uint32_t crc = 0;
  while (left > 0) {
    const auto n = static_cast<std::streamsize>(std::min<std::uint64_t>(left, buf.size()));
    in_.read(buf.data(), n);
    if (in_.gcount() != n) throw Error(ErrorCode::IoError, "short read while verifying " + path_);
    crc = crc32_of(buf.data(), static_cast<std::size_t>(n), crc);
    left -= static_cast<std::uint64_t>(n);
  }
  if (crc != manifest_.blob_crc32) throw Error(ErrorCode::ChecksumMismatch, path_ + " fails its blob checksum");
}

void save_grid(const LabeledGrid& grid, const std::string& path, const nlohmann::json& extra_meta) {
  const std::size_t n = grid.points.size();
  std::size_t dim = 0;
  for (const auto& p : grid.points) dim = std::max<std::size_t>(dim, p.feature.size());
  std::vector<double> feats(n * dim, 0.0), params;
  std::vector<std::string> status;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = grid.points[i];
    if (static_cast<std::size_t>(p.feature.size()) == dim)
      for (std::size_t k = 0; k < dim; ++k) feats[i * dim + k] = p.feature[k];
    params.insert(params.end(), p.params.begin(), p.params.end());
    status.push_back(p.status);
  }
  DatasetWriter w;
  w.add_real("features", {n, dim}, feats, "scan_grid");
  w.add_real("params", {n, grid.axis_names.size()}, params, "grid");
  w.meta() = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
  w.meta()["axis_names"] = grid.axis_names;
  w.meta()["shape"] = grid.shape;
  w.meta()["feature_kind"] = feature_kind_name(grid.kind);
  w.meta()["status"] = status;
  w.save(path);
}

LabeledGrid load_grid(const std::string& path) {
  DatasetReader r(path);
  r.verify();
  LabeledGrid g;
  try {
    g.axis_names = r.meta().at("axis_names").get<std::vector<std::string>>();
    g.shape = r.meta().at("shape").get<std::vector<std::size_t>>();
    g.kind = feature_kind_from_string(r.meta().at("feature_kind").get<std::string>());
    const auto status = r.meta().at("status").get<std::vector<std::string>>();
    const auto& fe = r.entry("features");
    const std::size_t n = fe.shape.at(0), dim = fe.shape.at(1), na = g.axis_names.size();
    const auto feats = r.read_real("features");
    const auto params = r.read_real("params");
    if (status.size() != n || params.size() != n * na) throw Error(ErrorCode::ChecksumMismatch, "inconsistent grid");
    g.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& p = g.points[i];
      p.status = status[i];
      p.params.assign(params.begin() + i * na, params.begin() + (i + 1) * na);
      p.feature = VecD::Zero(dim);
      for (std::size_t k = 0; k < dim; ++k) p.feature[k] = feats[i * dim + k];
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ChecksumMismatch, "grid metadata missing in " + path + ": " + e.what());
  }
  return g;
}

void add_mps(DatasetWriter& w, const std::string& prefix, const MpsState& s) {
  for (std::size_t i = 0; i < s.gammas.size(); ++i) w.add_complex(prefix + "/gamma/" + std::to_string(i), s.gammas[i]);
  for (std::size_t i = 0; i < s.lambdas.size(); ++i)
    w.add_real(prefix + "/lambda/" + std::to_string(i), {s.lambdas[i].size()}, s.lambdas[i]);
  w.meta()[prefix] = {{"length", s.length}, {"phys_dim", s.phys_dim}, {"form", form_name(s.form)}, {"center", s.center}};
}

MpsState read_mps(DatasetReader& r, const std::string& prefix) {
  MpsState s;
  const auto& m = r.meta().at(prefix);
  s.length = m.at("length").get<std::size_t>();
  s.phys_dim = m.at("phys_dim").get<std::size_t>();
  s.center = m.at("center").get<std::size_t>();
  const auto form = m.at("form").get<std::string>();
  for (auto f : {CanonicalForm::Vidal, CanonicalForm::Left, CanonicalForm::Right, CanonicalForm::Mixed, CanonicalForm::None})
    if (form == form_name(f)) s.form = f;
  for (std::size_t i = 0; i < s.length; ++i) s.gammas.push_back(r.read_complex(prefix + "/gamma/" + std::to_string(i)));
  for (std::size_t i = 0; i <= s.length; ++i) s.lambdas.push_back(r.read_real(prefix + "/lambda/" + std::to_string(i)));
  return s;
}

}  // namespace qphase
