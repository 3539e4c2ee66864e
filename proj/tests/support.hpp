#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "repopulse/ingest.hpp"

namespace testsupport {

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline repopulse::Timestamp at(const char* iso) { return *repopulse::parse_utc(iso); }

inline repopulse::EventRecord event(repopulse::EventType type, std::string user, std::string repo,
                                    repopulse::Timestamp t) {
  return {type, std::move(user), std::move(repo), t};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("repopulse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
