#pragma once

// Detector click records and the PTTG binary container.
//
// PTTG layout (little-endian):
//   offset 0   char[4]  magic "PTTG"
//   offset 4   u16      version (1)
//   offset 6   u32      resolution in ps
//   offset 10  u8       channel count
//   offset 11  u8[5]    reserved, zero
//   offset 16  records of 10 bytes: u64 timestamp (ps), u8 channel, u8 setting id

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace qdent {

struct TimeTag {
  std::uint64_t timestamp_ps = 0;
  std::uint8_t channel = 0;
  std::uint8_t setting_id = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Total order used for every merged stream: time, then channel, then setting.
inline bool tag_less(const TimeTag& a, const TimeTag& b) {
  if (a.timestamp_ps != b.timestamp_ps) return a.timestamp_ps < b.timestamp_ps;
  if (a.channel != b.channel) return a.channel < b.channel;
  return a.setting_id < b.setting_id;
}

bool is_time_sorted(std::span<const TimeTag> tags);

struct PttgHeader {
  std::uint16_t version = 1;
  std::uint32_t resolution_ps = 1;
  std::uint8_t channel_count = 4;
};

inline constexpr std::size_t kPttgHeaderBytes = 16;
inline constexpr std::size_t kPttgRecordBytes = 10;

/// Serialized bytes of a stream. Throws InvalidInput if tags are unsorted or
/// reference a channel >= channel_count.
std::vector<std::uint8_t> encode_pttg(std::span<const TimeTag> tags, const PttgHeader& header = {});

struct PttgStream {
  PttgHeader header;
  std::vector<TimeTag> tags;
};

/// Parses and validates a PTTG image; `source` names it in FormatError.
PttgStream decode_pttg(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

void write_pttg(const std::filesystem::path& path, std::span<const TimeTag> tags,
                const PttgHeader& header = {});
PttgStream read_pttg(const std::filesystem::path& path);

}  // namespace qdent
