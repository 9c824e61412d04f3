#ifndef DOCGRID_CHECKPOINT_HPP
#define DOCGRID_CHECKPOINT_HPP

// Binary checkpoint file:
//
//   "DGRD" | version u16 | payload | crc32(payload) u32
//   payload = u64 header length | header text | tensors
//   tensor  = u64 element count | count x float32
//
// All integers and floats little-endian. The header is canonical JSON
// {"arch": ArchSpec, "meta": {...}}; tensors follow parameter declaration
// order (see parameter_tensors).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <zlib.h>

#include <json.hpp>

#include "docgrid/model.hpp"

namespace docgrid {

inline constexpr char kCheckpointMagic[4] = {'D', 'G', 'R', 'D'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::int64_t updates = 0;
  double val_accuracy = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();  // preprocessing and run details
  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

inline void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& b, std::size_t pos, std::size_t end) : b_(b), pos_(pos), end_(end) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::uint64_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::uint64_t n) const {
    if (n > end_ - pos_) throw CorruptCheckpoint("checkpoint truncated");
  }
  const std::string& b_;
  std::size_t pos_;
  std::size_t end_;
};

inline std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  nlohmann::json header = {{"arch", ck.model.spec},
                           {"meta",
                            {{"updates", ck.meta.updates},
                             {"val_accuracy", ck.meta.val_accuracy},
                             {"seed", ck.meta.seed},
                             {"extra", ck.meta.extra}}}};
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, 4);
  detail::put_u16(out, kCheckpointVersion);
  const std::size_t payload_begin = out.size();
  detail::put_u64(out, text.size());
  out += text;
  for (const Tensor* t : parameter_tensors(ck.model)) {
    detail::put_u64(out, t->size());
    for (float f : t->vec()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  detail::put_u32(out, detail::crc32_of(out.data() + payload_begin, out.size() - payload_begin));
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 6) throw CorruptCheckpoint("checkpoint truncated");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  const std::uint16_t version = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[4]) |
                                                           (static_cast<unsigned char>(bytes[5]) << 8));
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  if (bytes.size() < 6 + 8 + 4) throw CorruptCheckpoint("checkpoint truncated");
  const std::size_t end = bytes.size() - 4;
  detail::Reader trailer(bytes, end, bytes.size());
  if (trailer.u32() != detail::crc32_of(bytes.data() + 6, end - 6))
    throw CorruptCheckpoint("checkpoint checksum mismatch (truncated or corrupted)");

  detail::Reader r(bytes, 6, end);
  const std::uint64_t len = r.u64();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes(len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint header unreadable: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.model = zero_params(header.at("arch").get<ArchSpec>());
    const auto& meta = header.at("meta");
    ck.meta.updates = meta.at("updates").get<std::int64_t>();
    ck.meta.val_accuracy = meta.at("val_accuracy").get<double>();
    ck.meta.seed = meta.at("seed").get<std::uint64_t>();
    ck.meta.extra = meta.at("extra");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint header invalid: ") + e.what());
  }
  for (Tensor* t : parameter_tensors(ck.model)) {
    const std::uint64_t n = r.u64();
    if (n != t->size())
      throw CorruptCheckpoint("tensor of " + std::to_string(n) + " elements where the architecture needs " +
                              std::to_string(t->size()));
    for (float& f : t->vec()) f = std::bit_cast<float>(r.u32());
  }
  if (!r.done()) throw CorruptCheckpoint("trailing bytes after the last tensor");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace docgrid

#endif  // DOCGRID_CHECKPOINT_HPP
