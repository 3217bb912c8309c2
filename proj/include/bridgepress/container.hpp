#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bridgepress/errors.hpp"

namespace bridgepress {

inline constexpr std::uint16_t kContainerVersion = 1;

/// One array in a .bprs file:
///
///   "BPRS" | u16 version | u32 header length | header | f64 payload
///
/// All integers and payload values are little-endian. The header is UTF-8
/// `key=value` lines; shape, dtype and byte_order are always present.
struct ArrayRecord {
  std::vector<Eigen::Index> shape;
  std::string role;   // depth, pressure, anthro, param, ...
  std::string units;
  std::string name;
  std::map<std::string, std::string> extra;  // any further header keys
  Eigen::VectorXd values;                    // row-major payload

  Eigen::Index size() const;
};

std::string encode_record(const ArrayRecord& record);
/// Decodes the record starting at `offset` and advances it past the payload.
ArrayRecord decode_record(const std::string& bytes, std::size_t& offset);

/// Writes one record; the file is replaced atomically.
void write_container(const std::filesystem::path& path, const ArrayRecord& record);
/// Reads a file that holds exactly one record.
ArrayRecord read_container(const std::filesystem::path& path);

/// Multi-record files (checkpoints): records are concatenated.
void write_containers(const std::filesystem::path& path, const std::vector<ArrayRecord>& records);
std::vector<ArrayRecord> read_containers(const std::filesystem::path& path);

/// Writes `text` to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace bridgepress
