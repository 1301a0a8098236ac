#include "mmce/dataset.hpp"

#include <cstring>
#include <fstream>

namespace mmce {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'D', 'S'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a(const unsigned char* data, size_t n) {
  uint64_t hash = 1469598103934665603ULL;
  for (size_t i = 0; i < n; ++i) {
    hash ^= data[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  const size_t img = static_cast<size_t>(ds.g_r) * ds.g_t;
  std::vector<unsigned char> buf;
  buf.reserve(32 + ds.pairs.size() * img * 8);
  auto pod = [&buf](const auto& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(v));
  };
  buf.insert(buf.end(), kMagic, kMagic + 4);
  pod(kVersion);
  pod(static_cast<uint32_t>(ds.g_r));
  pod(static_cast<uint32_t>(ds.g_t));
  pod(static_cast<uint32_t>(ds.k_p));
  pod(static_cast<uint64_t>(ds.pairs.size()));
  for (const auto& pr : ds.pairs) {
    if (pr.input.rows() != ds.g_r || pr.input.cols() != ds.g_t ||
        pr.label.rows() != ds.g_r || pr.label.cols() != ds.g_t)
      throw ConfigError("write_dataset: pair shape disagrees with the header");
    const auto* a = reinterpret_cast<const unsigned char*>(pr.input.data());
    buf.insert(buf.end(), a, a + img * sizeof(float));
    const auto* b = reinterpret_cast<const unsigned char*>(pr.label.data());
    buf.insert(buf.end(), b, b + img * sizeof(float));
  }
  pod(fnv1a(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_dataset: cannot open " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_dataset: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  constexpr size_t kHeader = 4 + 4 * 4 + 8;
  if (buf.size() < kHeader + 8) throw ParseError("dataset file: truncated");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw ParseError("dataset file: bad magic");

  uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (stored != fnv1a(buf.data(), buf.size() - 8))
    throw ParseError("dataset file: checksum mismatch");

  const unsigned char* p = buf.data() + 4;
  auto pod_u32 = [&p] {
    uint32_t v;
    std::memcpy(&v, p, 4);
    p += 4;
    return v;
  };
  if (pod_u32() != kVersion) throw ParseError("dataset file: unsupported version");
  Dataset ds;
  ds.g_r = static_cast<int>(pod_u32());
  ds.g_t = static_cast<int>(pod_u32());
  ds.k_p = static_cast<int>(pod_u32());
  uint64_t count;
  std::memcpy(&count, p, 8);
  p += 8;

  const size_t img = static_cast<size_t>(ds.g_r) * ds.g_t;
  const size_t need = kHeader + count * img * 2 * sizeof(float) + 8;
  if (buf.size() != need)
    throw ParseError("dataset file: payload length does not match the header");

  ds.pairs.resize(count);
  for (auto& pr : ds.pairs) {
    pr.input.resize(ds.g_r, ds.g_t);
    std::memcpy(pr.input.data(), p, img * sizeof(float));
    p += img * sizeof(float);
    pr.label.resize(ds.g_r, ds.g_t);
    std::memcpy(pr.label.data(), p, img * sizeof(float));
    p += img * sizeof(float);
  }
  return ds;
}

}  // namespace mmce
