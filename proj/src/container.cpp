#include "bridgepress/container.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bridgepress {

namespace {

constexpr char kMagic[4] = {'B', 'P', 'R', 'S'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

std::string shape_text(const std::vector<Eigen::Index>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::vector<Eigen::Index> parse_shape(const std::string& text) {
  std::vector<Eigen::Index> shape;
  if (text.empty()) return shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v < 0) throw FormatError("bad shape entry '" + part + "'");
      shape.push_back(static_cast<Eigen::Index>(v));
    } catch (const std::logic_error&) {
      throw FormatError("bad shape entry '" + part + "'");
    }
  }
  return shape;
}

bool reserved(const std::string& key) {
  return key == "shape" || key == "dtype" || key == "byte_order" || key == "role" ||
         key == "units" || key == "name";
}

}  // namespace

Eigen::Index ArrayRecord::size() const {
  Eigen::Index n = 1;
  for (Eigen::Index d : shape) n *= d;
  return n;
}

std::string encode_record(const ArrayRecord& r) {
  if (r.size() != r.values.size()) {
    throw LengthError("record shape " + shape_text(r.shape) + " does not match " +
                      std::to_string(r.values.size()) + " values");
  }
  if (!r.values.allFinite()) throw NumericError("refusing to write non-finite values");
  std::string header = "shape=" + shape_text(r.shape) + "\ndtype=f64\nbyte_order=little\n";
  header += "role=" + r.role + "\nunits=" + r.units + "\nname=" + r.name + "\n";
  for (const auto& [k, v] : r.extra) {
    if (reserved(k) || k.find_first_of("=\n") != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw FormatError("invalid header entry '" + k + "'");
    }
    header += k + "=" + v + "\n";
  }
  std::string out(kMagic, 4);
  put_le(out, kContainerVersion, 2);
  put_le(out, header.size(), 4);
  out += header;
  out.reserve(out.size() + 8 * static_cast<std::size_t>(r.values.size()));
  for (Eigen::Index i = 0; i < r.values.size(); ++i) {
    put_le(out, std::bit_cast<std::uint64_t>(r.values[i]), 8);
  }
  return out;
}

ArrayRecord decode_record(const std::string& bytes, std::size_t& offset) {
  if (bytes.size() - offset < 4 || bytes.compare(offset, 4, kMagic, 4) != 0) {
    throw FormatError("bad magic: not a BPRS container");
  }
  if (bytes.size() - offset < 10) throw LengthError("container truncated inside the preamble");
  const auto version = static_cast<std::uint16_t>(get_le(bytes, offset + 4, 2));
  if (version > kContainerVersion) {
    throw UnsupportedVersionError("container version " + std::to_string(version) +
                                  " is newer than " + std::to_string(kContainerVersion));
  }
  if (version == 0) throw FormatError("container version 0 is invalid");
  const std::size_t header_len = get_le(bytes, offset + 6, 4);
  std::size_t at = offset + 10;
  if (bytes.size() - at < header_len) throw LengthError("container truncated inside the header");
  const std::string header = bytes.substr(at, header_len);
  at += header_len;

  ArrayRecord r;
  std::map<std::string, std::string> fields;
  std::stringstream ss(header);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("header line without '=': " + line);
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"shape", "dtype", "byte_order"}) {
    if (!fields.count(key)) throw FormatError(std::string("header lacks '") + key + "'");
  }
  if (fields["dtype"] != "f64") throw FormatError("unsupported dtype " + fields["dtype"]);
  if (fields["byte_order"] != "little") throw FormatError("unsupported byte order");
  r.shape = parse_shape(fields["shape"]);
  r.role = fields["role"];
  r.units = fields["units"];
  r.name = fields["name"];
  for (const auto& [k, v] : fields) {
    if (!reserved(k)) r.extra[k] = v;
  }
  const Eigen::Index n = r.size();
  const std::size_t payload = 8 * static_cast<std::size_t>(n);
  if (bytes.size() - at < payload) {
    throw LengthError("payload holds " + std::to_string((bytes.size() - at) / 8) +
                      " values, header shape needs " + std::to_string(n));
  }
  r.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.values[i] = std::bit_cast<double>(get_le(bytes, at + 8 * static_cast<std::size_t>(i), 8));
  }
  offset = at + payload;
  return r;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_container(const std::filesystem::path& path, const ArrayRecord& record) {
  write_file_atomic(path, encode_record(record));
}

ArrayRecord read_container(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t offset = 0;
  ArrayRecord r = decode_record(bytes, offset);
  if (offset != bytes.size()) {
    throw LengthError(path.string() + ": " + std::to_string(bytes.size() - offset) +
                      " bytes beyond the declared payload");
  }
  return r;
}

void write_containers(const std::filesystem::path& path, const std::vector<ArrayRecord>& records) {
  std::string bytes;
  for (const ArrayRecord& r : records) bytes += encode_record(r);
  write_file_atomic(path, bytes);
}

std::vector<ArrayRecord> read_containers(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::vector<ArrayRecord> out;
  std::size_t offset = 0;
  while (offset < bytes.size()) out.push_back(decode_record(bytes, offset));
  return out;
}

}  // namespace bridgepress
