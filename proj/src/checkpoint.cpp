#include "bridgepress/checkpoint.hpp"

#include <set>

namespace bridgepress {

void write_params(const std::filesystem::path& path, const ParamSet& params) {
  std::vector<ArrayRecord> records;
  for (const auto& [name, tensor] : params) {
    ArrayRecord r;
    r.shape = tensor.shape();
    r.role = "param";
    r.units = "1";
    r.name = name;
    r.values = tensor.values();
    records.push_back(std::move(r));
  }
  write_containers(path, records);
}

void read_params(const std::filesystem::path& path, ParamSet& target) {
  std::set<std::string> seen;
  for (const ArrayRecord& r : read_containers(path)) {
    if (r.role != "param") throw FormatError(path.string() + ": record '" + r.name + "' is not a param");
    if (!target.contains(r.name)) {
      throw FormatError(path.string() + ": unexpected parameter '" + r.name + "'");
    }
    Tensor& t = target.at(r.name);
    if (Shape(r.shape.begin(), r.shape.end()) != t.shape()) {
      throw FormatError(path.string() + ": parameter '" + r.name + "' has shape " +
                        shape_string(Shape(r.shape.begin(), r.shape.end())) + ", expected " +
                        shape_string(t.shape()));
    }
    t.mutable_values() = r.values;
    seen.insert(r.name);
  }
  if (seen.size() != target.size()) {
    for (const auto& [name, t] : target) {
      if (!seen.count(name)) throw FormatError(path.string() + ": parameter '" + name + "' missing");
    }
  }
}

}  // namespace bridgepress
