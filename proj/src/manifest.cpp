#include "v1net/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "v1net/tensor.hpp"

namespace v1 {

void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& subcommand, nlohmann::json config,
                    const std::vector<std::filesystem::path>& inputs) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json j;
  j["version"] = kVersionString;
  j["subcommand"] = subcommand;
  j["config"] = std::move(config);
  nlohmann::json checks = nlohmann::json::object();
  for (const auto& p : inputs) {
    if (std::filesystem::is_regular_file(p)) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%016llx",
                    static_cast<unsigned long long>(file_checksum(p)));
      checks[p.string()] = buf;
    } else {
      checks[p.string()] = "directory";
    }
  }
  j["input_checksums"] = checks;
  std::ofstream os(out_dir / "manifest.json");
  if (!os)
    throw std::runtime_error("cannot write manifest in " + out_dir.string());
  os << j.dump(2) << "\n";
}

}  // namespace v1
