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

#include "locsim/memory_image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <vector>

namespace locsim {

namespace {

const Block kZeroBlock{};
constexpr char kMagic[8] = {'L', 'O', 'C', 'I', 'M', 'G', '0', '1'};

bool is_zero(const Block& b) {
  return std::all_of(b.begin(), b.end(), [](std::uint8_t x) { return x == 0; });
}

void write_le(std::ofstream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_le(std::ifstream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw Error(ErrorCode::kIo, "truncated image file");
    v |= static_cast<std::uint64_t>(c & 0xff) << (8 * i);
  }
  return v;
}

}  // namespace

const Block& PersistentImage::home(BlockAddr addr) const {
  auto it = home_.find(addr);
  return it == home_.end() ? kZeroBlock : it->second;
}

void PersistentImage::set_home(BlockAddr addr, const Block& data) { home_[addr] = data; }

const Block& PersistentImage::log(std::uint64_t index) const {
  auto it = log_.find(index);
  return it == log_.end() ? kZeroBlock : it->second;
}

void PersistentImage::set_log(std::uint64_t index, const Block& data) {
  if (index >= log_blocks_) throw Error(ErrorCode::kFieldOverflow, "log index out of range");
  log_[index] = data;
}

void PersistentImage::write(Region region, std::uint64_t index, const Block& data) {
  if (region == Region::kHome) {
    set_home(static_cast<BlockAddr>(index), data);
  } else {
    set_log(index, data);
  }
}

std::map<BlockAddr, Block> PersistentImage::normalized_home() const {
  std::map<BlockAddr, Block> out;
  for (const auto& [addr, data] : home_) {
    if (!is_zero(data)) out.emplace(addr, data);
  }
  return out;
}

void PersistentImage::dump(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path);
  struct Entry {
    Region region;
    std::uint64_t index;
    const Block* data;
  };
  std::vector<Entry> entries;
  for (const auto& [addr, data] : home_) entries.push_back({Region::kHome, addr, &data});
  for (const auto& [idx, data] : log_) entries.push_back({Region::kLog, idx, &data});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.region, a.index) < std::tie(b.region, b.index);
  });
  out.write(kMagic, sizeof(kMagic));
  write_le(out, log_blocks_, 8);
  write_le(out, entries.size(), 8);
  for (const Entry& e : entries) {
    out.put(static_cast<char>(e.region));
    write_le(out, e.index, 8);
    out.write(reinterpret_cast<const char*>(e.data->data()), kBlockSize);
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

PersistentImage PersistentImage::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kIo, "bad image magic in " + path);
  }
  PersistentImage image(read_le(in, 8));
  const std::uint64_t count = read_le(in, 8);
  for (std::uint64_t i = 0; i < count; ++i) {
    const int region = in.get();
    const std::uint64_t index = read_le(in, 8);
    Block b{};
    in.read(reinterpret_cast<char*>(b.data()), kBlockSize);
    if (!in || (region != 0 && region != 1)) throw Error(ErrorCode::kIo, "corrupt image entry");
    image.write(static_cast<Region>(region), index, b);
  }
  return image;
}

bool operator==(const PersistentImage& a, const PersistentImage& b) {
  if (a.log_blocks_ != b.log_blocks_ || a.normalized_home() != b.normalized_home()) return false;
  auto non_zero = [](const std::unordered_map<std::uint64_t, Block>& m) {
    std::map<std::uint64_t, Block> out;
    for (const auto& [k, v] : m) {
      if (!is_zero(v)) out.emplace(k, v);
    }
    return out;
  };
  return non_zero(a.log_) == non_zero(b.log_);
}

}  // namespace locsim
