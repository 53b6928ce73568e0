#include "reconnet/binary_io.hpp"

#include <fstream>
#include <iterator>

#include "reconnet/error.hpp"

namespace reconnet {

void ByteReader::need(std::size_t count, std::string_view field) {
  if (remaining() < count) fail(field, "truncated");
}

void ByteReader::fail(std::string_view field, std::string_view what) const {
  throw FormatError(format_ + ": " + std::string(what) + " at field '" + std::string(field) + "' (byte offset " +
                    std::to_string(offset_) + ")");
}

void ByteReader::expect_magic(std::string_view magic) {
  need(magic.size(), "magic");
  if (std::memcmp(data_.data() + offset_, magic.data(), magic.size()) != 0) fail("magic", "bad magic bytes");
  offset_ += magic.size();
}

std::uint8_t ByteReader::u8(std::string_view field) {
  need(1, field);
  return data_[offset_++];
}

std::uint32_t ByteReader::u32(std::string_view field) { return little<std::uint32_t>(field); }
std::uint64_t ByteReader::u64(std::string_view field) { return little<std::uint64_t>(field); }
float ByteReader::f32(std::string_view field) { return std::bit_cast<float>(little<std::uint32_t>(field)); }
double ByteReader::f64(std::string_view field) { return std::bit_cast<double>(little<std::uint64_t>(field)); }

void ByteReader::expect_end() {
  if (remaining() != 0) fail("end", std::to_string(remaining()) + " trailing bytes");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace reconnet
