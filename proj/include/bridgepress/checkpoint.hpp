#pragma once

#include <filesystem>

#include "bridgepress/container.hpp"
#include "bridgepress/nn.hpp"

namespace bridgepress {

/// One record per parameter, in name order, role "param".
void write_params(const std::filesystem::path& path, const ParamSet& params);

/// Loads values into `target`. The file must hold exactly the parameter
/// names of `target` with matching shapes; anything else is a FormatError.
void read_params(const std::filesystem::path& path, ParamSet& target);

}  // namespace bridgepress
