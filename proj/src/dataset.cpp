#include "fbh/dataset.hpp"

#include <cstring>
#include <fstream>

namespace fbh {
namespace {

constexpr std::uint32_t kBundleMagic = 0x44484246;      // "FBHD"
constexpr std::uint32_t kCheckpointMagic = 0x43484246;  // "FBHC"
constexpr std::uint32_t kVersion = 1;

// Raw little-endian scalar I/O (the toolkit targets little-endian hosts).
template <typename T>
void put_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("unexpected end of file");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get_raw<std::uint32_t>(is);
  if (n > (1u << 20)) throw IoError("implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError("unexpected end of file");
  return s;
}

void put_doubles(std::ostream& os, const double* p, std::uint64_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& is, double* p, std::uint64_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw IoError("unexpected end of file");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return is;
}

}  // namespace

void ArrayBundle::put(const std::string& name, std::vector<std::uint64_t> dims,
                      Eigen::VectorXd flat) {
  std::uint64_t total = 1;
  for (auto d : dims) total *= d;
  if (total != static_cast<std::uint64_t>(flat.size()))
    throw std::invalid_argument("ArrayBundle::put: dims do not match data length");
  arrays[name] = {std::move(dims), std::move(flat)};
}

void ArrayBundle::put_vector(const std::string& name, const Eigen::VectorXd& v) {
  put(name, {static_cast<std::uint64_t>(v.size())}, v);
}

void ArrayBundle::put_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  put(name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
      Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()));
}

void ArrayBundle::put_scalar(const std::string& name, double v) {
  put(name, {1}, Eigen::VectorXd::Constant(1, v));
}

const Eigen::VectorXd& ArrayBundle::vec(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw IoError("bundle is missing array: " + name);
  return it->second.second;
}

const std::vector<std::uint64_t>& ArrayBundle::dims(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw IoError("bundle is missing array: " + name);
  return it->second.first;
}

Eigen::MatrixXd ArrayBundle::matrix(const std::string& name) const {
  const auto& d = dims(name);
  if (d.size() != 2) throw IoError("bundle array is not a matrix: " + name);
  const auto& v = vec(name);
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), static_cast<long>(d[0]),
                                           static_cast<long>(d[1]));
}

double ArrayBundle::scalar(const std::string& name) const {
  const auto& v = vec(name);
  if (v.size() != 1) throw IoError("bundle array is not a scalar: " + name);
  return v[0];
}

void save_bundle(const std::string& path, const ArrayBundle& bundle) {
  auto os = open_out(path);
  put_raw(os, kBundleMagic);
  put_raw(os, kVersion);
  put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(bundle.arrays.size()));
  for (const auto& [name, entry] : bundle.arrays) {
    put_string(os, name);
    put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(entry.first.size()));
    for (auto d : entry.first) put_raw<std::uint64_t>(os, d);
    put_doubles(os, entry.second.data(), static_cast<std::uint64_t>(entry.second.size()));
  }
  if (!os) throw IoError("write failed: " + path);
}

ArrayBundle load_bundle(const std::string& path) {
  auto is = open_in(path);
  if (get_raw<std::uint32_t>(is) != kBundleMagic) throw IoError("not a bundle file: " + path);
  if (get_raw<std::uint32_t>(is) != kVersion) throw IoError("unsupported bundle version");
  const auto count = get_raw<std::uint32_t>(is);
  ArrayBundle bundle;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(is);
    const auto rank = get_raw<std::uint32_t>(is);
    if (rank > 8) throw IoError("implausible array rank");
    std::vector<std::uint64_t> dims(rank);
    std::uint64_t total = 1;
    for (auto& d : dims) {
      d = get_raw<std::uint64_t>(is);
      total *= d;
    }
    if (total > (1ull << 32)) throw IoError("implausible array size");
    Eigen::VectorXd flat(static_cast<long>(total));
    get_doubles(is, flat.data(), total);
    bundle.arrays[name] = {std::move(dims), std::move(flat)};
  }
  return bundle;
}

std::uint64_t layout_hash(const FlatParams& p) {
  // FNV-1a over the segment table and total length.
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const void* data, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  const std::uint64_t total = static_cast<std::uint64_t>(p.size());
  mix(&total, sizeof(total));
  for (const auto& s : p.segments) {
    mix(s.name.data(), s.name.size());
    const std::uint64_t off = static_cast<std::uint64_t>(s.offset);
    const std::uint64_t sz = static_cast<std::uint64_t>(s.size);
    mix(&off, sizeof(off));
    mix(&sz, sizeof(sz));
  }
  return h;
}

void save_checkpoint(const std::string& path, const FlatParams& p) {
  auto os = open_out(path);
  put_raw(os, kCheckpointMagic);
  put_raw(os, kVersion);
  put_raw<std::uint64_t>(os, layout_hash(p));
  put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(p.segments.size()));
  for (const auto& s : p.segments) {
    put_string(os, s.name);
    put_raw<std::uint64_t>(os, static_cast<std::uint64_t>(s.offset));
    put_raw<std::uint64_t>(os, static_cast<std::uint64_t>(s.size));
  }
  put_raw<std::uint64_t>(os, static_cast<std::uint64_t>(p.size()));
  put_doubles(os, p.values.data(), static_cast<std::uint64_t>(p.size()));
  if (!os) throw IoError("write failed: " + path);
}

FlatParams load_checkpoint(const std::string& path, std::uint64_t expected_layout) {
  auto is = open_in(path);
  if (get_raw<std::uint32_t>(is) != kCheckpointMagic)
    throw IoError("not a checkpoint file: " + path);
  if (get_raw<std::uint32_t>(is) != kVersion) throw IoError("unsupported checkpoint version");
  const auto stored_hash = get_raw<std::uint64_t>(is);
  if (stored_hash != expected_layout)
    throw IoError("checkpoint layout does not match the configured model: " + path);
  const auto nseg = get_raw<std::uint32_t>(is);
  if (nseg > (1u << 20)) throw IoError("implausible segment count");
  FlatParams p;
  for (std::uint32_t i = 0; i < nseg; ++i) {
    Segment s;
    s.name = get_string(is);
    s.offset = static_cast<long>(get_raw<std::uint64_t>(is));
    s.size = static_cast<long>(get_raw<std::uint64_t>(is));
    p.segments.push_back(std::move(s));
  }
  const auto total = get_raw<std::uint64_t>(is);
  if (total > (1ull << 32)) throw IoError("implausible parameter count");
  p.values.resize(static_cast<long>(total));
  get_doubles(is, p.values.data(), total);
  if (layout_hash(p) != stored_hash) throw IoError("checkpoint layout table is corrupt");
  return p;
}

}  // namespace fbh
