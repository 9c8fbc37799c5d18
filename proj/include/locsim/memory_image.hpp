// Copyright 2026 The locsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>

#include "locsim/log_layout.hpp"

namespace locsim {

enum class Region : std::uint8_t { kHome = 0, kLog = 1 };

/// Sparse persistent-memory contents: the home (data) area and the memory
/// log area. Absent blocks read as zero.
class PersistentImage {
 public:
  explicit PersistentImage(std::uint64_t log_blocks = kDefaultLogAreaBytes / kBlockSize)
      : log_blocks_(log_blocks) {}

  std::uint64_t log_blocks() const { return log_blocks_; }
  std::uint32_t log_units() const { return units_in_log(log_blocks_); }

  const Block& home(BlockAddr addr) const;
  void set_home(BlockAddr addr, const Block& data);
  const Block& log(std::uint64_t index) const;
  void set_log(std::uint64_t index, const Block& data);
  void write(Region region, std::uint64_t index, const Block& data);

  const std::unordered_map<BlockAddr, Block>& home_blocks() const { return home_; }
  const std::unordered_map<std::uint64_t, Block>& log_area() const { return log_; }

  /// Home contents with all-zero blocks dropped, ordered by address.
  std::map<BlockAddr, Block> normalized_home() const;

  /// Flat binary format: "LOCIMG01", u64 log_blocks, u64 entry count, then
  /// entries of (u8 region, u64 index, 64 data bytes), all little-endian.
  void dump(const std::string& path) const;
  static PersistentImage load(const std::string& path);

  friend bool operator==(const PersistentImage& a, const PersistentImage& b);

 private:
  std::uint64_t log_blocks_;
  std::unordered_map<BlockAddr, Block> home_;
  std::unordered_map<std::uint64_t, Block> log_;
};

}  // namespace locsim
