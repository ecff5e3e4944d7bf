#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vscreen::codec {

class NonAsciiInput : public std::runtime_error {
 public:
  NonAsciiInput(std::size_t offset, std::uint8_t byte);
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownCode : public std::runtime_error {
 public:
  UnknownCode(std::uint8_t code, std::size_t offset);
  [[nodiscard]] std::uint8_t code() const { return code_; }
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::uint8_t code_;
  std::size_t offset_;
};

class BadFormat : public std::runtime_error {
 public:
  explicit BadFormat(const std::string& msg) : std::runtime_error(msg) {}
};

// Corpus-independent substitution dictionary: up to 128 printable-ASCII
// substrings of 2-8 bytes, mapped to code bytes 0x80.. in entry order.
struct Dictionary {
  static constexpr std::size_t kMaxEntries = 128;
  static constexpr std::size_t kMinEntryLen = 2;
  static constexpr std::size_t kMaxEntryLen = 8;

  std::vector<std::string> entries;  // entries[i] <-> code byte 0x80 + i
  std::uint32_t version = 1;

  [[nodiscard]] std::size_t size() const { return entries.size(); }
};

// Greedy n-gram selection: repeatedly add the 2-8 byte substring with the
// highest (non-overlapping frequency x (length-1)) saving over the corpus
// re-encoded with the entries chosen so far; ties go to the
// lexicographically smallest candidate; stops at max_entries or when no
// candidate saves anything.
Dictionary train_dictionary(const std::vector<std::string>& corpus, std::size_t max_entries);

// Left-to-right greedy longest-match encoding; unmatched bytes pass through.
std::vector<std::uint8_t> compress_line(std::string_view line, const Dictionary& d);

// Byte-exact inverse of compress_line.
std::string decompress_line(std::span<const std::uint8_t> data, const Dictionary& d);

// Dictionary file: magic "SMZ1", entry count (1 byte), then per entry a
// length byte + raw bytes, in code order.
void save_dictionary(const Dictionary& d, std::ostream& out);
void save_dictionary_file(const Dictionary& d, const std::string& path);
Dictionary load_dictionary(std::istream& in);
Dictionary load_dictionary_file(const std::string& path);

// SHA-256 of the serialized dictionary bytes; pins a compressed library to
// the dictionary that wrote it.
std::array<std::uint8_t, 32> dictionary_sha256(const Dictionary& d);

// Compressed library: magic "SMZC", dictionary SHA-256 (32 bytes), then per
// line a varint byte length + payload. Lines are independent records.
void compress_stream(std::istream& in, std::ostream& out, const Dictionary& d);
void decompress_stream(std::istream& in, std::ostream& out, const Dictionary& d);

}  // namespace vscreen::codec
