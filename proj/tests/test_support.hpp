#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>

namespace test_support {

inline constexpr std::uint64_t kGoldenFirstDraw = 6620213255463616931ULL;

inline std::filesystem::path fixture_dir() {
  if (const char* env = std::getenv("GRIDMFG_FIXTURES")) return env;
  return std::filesystem::path(__FILE__).parent_path() / "fixtures";
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "gridmfg_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test_support
