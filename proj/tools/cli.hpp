#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hcap::cli {

// Runs one `hcap` invocation; args exclude the program name. Returns the
// process exit code. Usable in-process (tests drive it this way).
int run(const std::vector<std::string>& args);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Hashes of a file, or of every regular file below a directory (relative
// paths, sorted).
std::map<std::string, std::string> hash_artifact(const std::filesystem::path& path);

}  // namespace hcap::cli
