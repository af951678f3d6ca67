#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace v1 {

inline constexpr const char* kVersionString = "v1net 0.1.0";

// Every subcommand writes a manifest beside its outputs: config snapshot,
// seed, and input checksums, enough to re-run the step exactly.
void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& subcommand, nlohmann::json config,
                    const std::vector<std::filesystem::path>& inputs);

}  // namespace v1
