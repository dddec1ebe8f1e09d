#include "inferem/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace inferem {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw CheckpointError("truncated checkpoint: " + path.string());
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open for writing: " + path.string());
  out.write(kCheckpointMagic, 4);
  out.put(static_cast<char>(kCheckpointVersion));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& rec : records) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.name.size()));
    out.write(rec.name.data(), static_cast<std::streamsize>(rec.name.size()));
    put_le<std::uint32_t>(out, 2);
    put_le<std::uint64_t>(out, rec.value.rows());
    put_le<std::uint64_t>(out, rec.value.cols());
    for (double v : rec.value.values()) put_le<double>(out, v);
  }
  if (!out) throw CheckpointError("write failed: " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic): " + path.string());
  }
  const int version = in.get();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in, path);
  std::vector<NamedTensor> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("truncated checkpoint: " + path.string());
    const auto rank = get_le<std::uint32_t>(in, path);
    if (rank < 1 || rank > 2) {
      throw CheckpointError("record " + name + " has unsupported rank " + std::to_string(rank));
    }
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t d = 0; d < rank; ++d) dims[d] = get_le<std::uint64_t>(in, path);
    if (rank == 1) std::swap(dims[0], dims[1]);
    Tensor t(dims[0], dims[1]);
    for (auto& v : t.values()) v = get_le<double>(in, path);
    records.push_back({std::move(name), std::move(t)});
  }
  return records;
}

std::vector<NamedTensor> parameter_records(const ag::ParameterStore& store) {
  std::vector<NamedTensor> out;
  out.reserve(store.size());
  for (const auto& p : store) out.push_back({p->name, p->value});
  return out;
}

void assign_parameters(ag::ParameterStore& store, const std::vector<NamedTensor>& records,
                       bool strict) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& r : records) by_name[r.name] = &r.value;
  for (auto& p : store) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      if (strict) throw CheckpointError("checkpoint is missing parameter " + p->name);
      continue;
    }
    if (!it->second->same_shape(p->value)) {
      throw CheckpointError("shape mismatch for " + p->name + ": checkpoint " +
                            shape_string(*it->second) + ", model " + shape_string(p->value));
    }
    p->value = *it->second;
  }
}

}  // namespace inferem
