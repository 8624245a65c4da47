#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wsr/network.hpp"
#include "wsr/tensor.hpp"

namespace wsr {

inline constexpr char kCheckpointMagic[4] = {'W', 'S', 'R', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// One stored array. Layout on disk (all integers u32 little-endian):
//   name_len, name bytes (UTF-8), rank, extents[rank], f32 LE values.
struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> extents;
  std::vector<float> values;
};

// File: "WSR1", u32 version, u32 entry count, entries.
std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries);
// `origin` only labels error messages. FormatError names the byte offset.
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes, std::string_view origin);

// Atomic: writes a sibling temp file then renames it over `path`.
void write_checkpoint_file(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint_file(const std::filesystem::path& path);

// Tensor <-> entry. Leading unit extents are dropped on write (rank >= 1)
// and restored on read.
CheckpointEntry to_entry(std::string name, const Tensor& t);
Tensor from_entry(const CheckpointEntry& e);

// Scalars and text stored exactly as 16-bit chunks / bytes in f32 arrays.
CheckpointEntry u64_entry(std::string name, std::uint64_t v);
std::uint64_t entry_u64(const CheckpointEntry& e);
CheckpointEntry text_entry(std::string name, std::string_view text);
std::string entry_text(const CheckpointEntry& e);

const CheckpointEntry& find_entry(const std::vector<CheckpointEntry>& entries, std::string_view name);
const CheckpointEntry* find_entry_or_null(const std::vector<CheckpointEntry>& entries, std::string_view name);

// Round every value to the nearest f32 in place.
void snap_to_f32(Tensor& t);

// Generator-only model file (what `sr` consumes). Sizing is inferred from
// the stored shapes.
void save_generator(const std::filesystem::path& path, Generator& gen);
Generator generator_from_entries(const std::vector<CheckpointEntry>& entries);
Generator load_generator(const std::filesystem::path& path);

// Copies every entry whose name is in `params` into it (shapes must match).
void load_params(ParamSet& params, const std::vector<CheckpointEntry>& entries, std::string_view origin);

}  // namespace wsr
