#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mia/core.hpp"
#include "mia/rng.hpp"

namespace testing {

inline mia::SampleRecord make_record(std::string id, std::vector<double> losses,
                                     mia::Label label = mia::Label::member) {
  mia::SampleRecord r;
  r.id = std::move(id);
  r.domain = "test";
  r.label = label;
  for (std::size_t i = 0; i <= losses.size(); ++i) r.token_ids.push_back(i);
  r.losses = std::move(losses);
  return r;
}

inline std::vector<double> random_losses(mia::Rng& rng, std::size_t n, double scale = 5.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.uniform01();
  return v;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mia_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
