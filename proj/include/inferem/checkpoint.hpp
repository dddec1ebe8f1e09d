#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "inferem/autograd.hpp"

namespace inferem {

/// One checkpoint record: a name and a 2-D tensor.
struct NamedTensor {
  std::string name;
  Tensor value;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File layout: magic "IFEM", version byte, u32 record count, then per record
// u32 name length, name bytes, u32 rank, u64 dims[rank], float64 values.
// Every integer and float is little-endian.
inline constexpr char kCheckpointMagic[4] = {'I', 'F', 'E', 'M'};
inline constexpr unsigned char kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

/// Parameter values only, in store order.
std::vector<NamedTensor> parameter_records(const ag::ParameterStore& store);

/// Copies every record whose name matches a parameter. With `strict`, every
/// parameter must be present with a matching shape.
void assign_parameters(ag::ParameterStore& store, const std::vector<NamedTensor>& records,
                       bool strict = true);

}  // namespace inferem
