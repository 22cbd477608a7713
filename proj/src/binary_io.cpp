#include "rankdehaze/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace rankdehaze::io {

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void ByteReader::expect_magic(std::string_view magic) {
  need(magic.size(), "magic bytes");
  if (std::memcmp(bytes_.data() + offset_, magic.data(), magic.size()) != 0) {
    fail("bad magic, expected '" + std::string(magic) + "'");
  }
  offset_ += magic.size();
}

std::string ByteReader::get_string(const char* what) {
  const auto n = get<std::uint32_t>(what);
  need(n, what);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + offset_), n);
  offset_ += n;
  return s;
}

void ByteReader::fail(const std::string& message) const {
  throw FormatError(source_ + ": " + message + " (at byte offset " + std::to_string(offset_) + ")");
}

void ByteReader::need(std::size_t n, const char* what) const {
  if (bytes_.size() - offset_ < n) {
    fail(std::string("truncated while reading ") + what + ": need " + std::to_string(n) +
         " bytes, " + std::to_string(bytes_.size() - offset_) + " left");
  }
}

}  // namespace rankdehaze::io
