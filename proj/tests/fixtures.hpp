#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fdid/dataset.hpp"

namespace fixtures {

inline fdid::Dataset from_rows(const std::vector<std::array<double, 4>>& rows) {
  std::vector<fdid::Observation> obs;
  for (const auto& r : rows) {
    obs.push_back({r[0], static_cast<int>(r[1]), static_cast<int>(r[2]), static_cast<int>(r[3]),
                   std::nullopt});
  }
  return fdid::Dataset(std::move(obs));
}

// Canonical 16-row fixture: four cells of four observations each.
//   (g,t)=(0,0): (d,y) = (0,0),(0,2),(1,10),(1,12)
//   (g,t)=(0,1): (d,y) = (0,1),(0,3),(1,13),(1,15)
//   (g,t)=(1,0): (d,y) = (0,0),(0,1),(0,2),(1,11)
//   (g,t)=(1,1): (d,y) = (0,2),(1,22),(1,24),(1,30)
inline fdid::Dataset toy16() {
  return from_rows({
      {0, 0, 0, 0}, {2, 0, 0, 0}, {10, 1, 0, 0}, {12, 1, 0, 0},
      {1, 0, 0, 1}, {3, 0, 0, 1}, {13, 1, 0, 1}, {15, 1, 0, 1},
      {0, 0, 1, 0}, {1, 0, 1, 0}, {2, 0, 1, 0}, {11, 1, 1, 0},
      {2, 0, 1, 1}, {22, 1, 1, 1}, {24, 1, 1, 1}, {30, 1, 1, 1},
  });
}

// toy16 with the control group's period-1 treatments flipped to (0,0,0,1):
// the control stops being stable (lambda_{00} = 1.5, lambda_{01} = 0.5).
inline fdid::Dataset toy16_unstable() {
  return from_rows({
      {0, 0, 0, 0}, {2, 0, 0, 0}, {10, 1, 0, 0}, {12, 1, 0, 0},
      {1, 0, 0, 1}, {3, 0, 0, 1}, {13, 0, 0, 1}, {15, 1, 0, 1},
      {0, 0, 1, 0}, {1, 0, 1, 0}, {2, 0, 1, 0}, {11, 1, 1, 0},
      {2, 0, 1, 1}, {22, 1, 1, 1}, {24, 1, 1, 1}, {30, 1, 1, 1},
  });
}

inline std::string toy16_csv_text() {
  std::string text = "y,d,g,t\n";
  const fdid::Dataset ds = toy16();
  for (const auto& r : ds.rows()) {
    text += std::to_string(r.y) + "," + std::to_string(r.d) + "," +
            std::to_string(ds.raw_group_label(r.g)) + "," +
            std::to_string(ds.raw_period_label(r.t)) + "\n";
  }
  return text;
}

class TempFile {
 public:
  explicit TempFile(const std::string& contents, const std::string& name = "fdid_test.csv") {
    path_ = (std::filesystem::temp_directory_path() /
             (std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" + name))
                .string();
    std::ofstream out(path_);
    out << contents;
  }
  ~TempFile() { std::remove(path_.c_str()); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace fixtures
