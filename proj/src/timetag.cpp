#include "qdent/timetag.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "qdent/error.hpp"

namespace qdent {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'T', 'G'};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <class T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  return v;
}

}  // namespace

bool is_time_sorted(std::span<const TimeTag> tags) {
  return std::adjacent_find(tags.begin(), tags.end(), [](const TimeTag& a, const TimeTag& b) {
           return b.timestamp_ps < a.timestamp_ps;
         }) == tags.end();
}

std::vector<std::uint8_t> encode_pttg(std::span<const TimeTag> tags, const PttgHeader& header) {
  require(header.version == 1, "only PTTG version 1 can be written");
  require(header.resolution_ps > 0, "PTTG resolution must be > 0");
  std::vector<std::uint8_t> out;
  out.reserve(kPttgHeaderBytes + kPttgRecordBytes * tags.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(out, header.version);
  put_le<std::uint32_t>(out, header.resolution_ps);
  out.push_back(header.channel_count);
  out.insert(out.end(), 5, 0);
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const TimeTag& t = tags[i];
    if (t.timestamp_ps < last)
      throw InvalidInput("PTTG writer: stream not timestamp-sorted at record " + std::to_string(i));
    if (t.channel >= header.channel_count)
      throw InvalidInput("PTTG writer: channel " + std::to_string(t.channel) + " out of range at record " +
                         std::to_string(i));
    last = t.timestamp_ps;
    put_le<std::uint64_t>(out, t.timestamp_ps);
    out.push_back(t.channel);
    out.push_back(t.setting_id);
  }
  return out;
}

PttgStream decode_pttg(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < kPttgHeaderBytes) throw FormatError(source, bytes.size(), "truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError(source, 0, "bad magic, expected PTTG");
  PttgStream s;
  s.header.version = get_le<std::uint16_t>(bytes.data() + 4);
  if (s.header.version != 1)
    throw FormatError(source, 4, "unsupported version " + std::to_string(s.header.version));
  s.header.resolution_ps = get_le<std::uint32_t>(bytes.data() + 6);
  if (s.header.resolution_ps == 0) throw FormatError(source, 6, "resolution must be > 0");
  s.header.channel_count = bytes[10];
  for (std::size_t i = 11; i < kPttgHeaderBytes; ++i)
    if (bytes[i] != 0) throw FormatError(source, i, "reserved header byte is not zero");

  const std::size_t body = bytes.size() - kPttgHeaderBytes;
  if (body % kPttgRecordBytes != 0)
    throw FormatError(source, kPttgHeaderBytes + body / kPttgRecordBytes * kPttgRecordBytes,
                      "truncated record");
  const std::size_t n = body / kPttgRecordBytes;
  s.tags.resize(n);
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = kPttgHeaderBytes + i * kPttgRecordBytes;
    const std::uint8_t* p = bytes.data() + off;
    TimeTag& t = s.tags[i];
    t.timestamp_ps = get_le<std::uint64_t>(p);
    t.channel = p[8];
    t.setting_id = p[9];
    if (t.timestamp_ps < last) throw FormatError(source, off, "timestamps not sorted");
    if (t.channel >= s.header.channel_count)
      throw FormatError(source, off + 8, "channel " + std::to_string(t.channel) + " out of range");
    last = t.timestamp_ps;
  }
  return s;
}

void write_pttg(const std::filesystem::path& path, std::span<const TimeTag> tags, const PttgHeader& header) {
  const auto bytes = encode_pttg(tags, header);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

PttgStream read_pttg(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_pttg(bytes, path.string());
}

}  // namespace qdent
