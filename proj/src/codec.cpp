#include "vscreen/codec.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <openssl/evp.h>

namespace vscreen::codec {

NonAsciiInput::NonAsciiInput(std::size_t offset, std::uint8_t byte)
    : std::runtime_error("non-ASCII byte 0x" + [&] {
        std::ostringstream os;
        os << std::hex << static_cast<int>(byte) << " at offset " << std::dec << offset;
        return os.str();
      }()),
      offset_(offset) {}

UnknownCode::UnknownCode(std::uint8_t code, std::size_t offset)
    : std::runtime_error("unknown code byte 0x" + [&] {
        std::ostringstream os;
        os << std::hex << static_cast<int>(code) << " at offset " << std::dec << offset;
        return os.str();
      }()),
      code_(code), offset_(offset) {}

namespace {

void check_ascii(std::string_view line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (static_cast<std::uint8_t>(line[i]) >= 0x80) {
      throw NonAsciiInput(i, static_cast<std::uint8_t>(line[i]));
    }
  }
}

bool printable(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= 0x20 && c <= 0x7e; });
}

// Greedy longest-match pass; emits either a code byte or a literal, and
// optionally collects the unmatched literal spans.
template <typename EmitCode, typename EmitLiteral>
void greedy_match(std::string_view line,
                  const std::unordered_map<std::string, std::uint8_t>& table,
                  std::size_t max_len, EmitCode&& emit_code, EmitLiteral&& emit_literal) {
  std::size_t i = 0;
  while (i < line.size()) {
    std::size_t longest = std::min(max_len, line.size() - i);
    bool matched = false;
    for (std::size_t n = longest; n >= Dictionary::kMinEntryLen && !matched; --n) {
      auto it = table.find(std::string(line.substr(i, n)));
      if (it != table.end()) {
        emit_code(it->second);
        i += n;
        matched = true;
      }
    }
    if (!matched) {
      emit_literal(line[i]);
      ++i;
    }
  }
}

std::unordered_map<std::string, std::uint8_t> build_table(const Dictionary& d) {
  std::unordered_map<std::string, std::uint8_t> table;
  table.reserve(d.entries.size());
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    table.emplace(d.entries[i], static_cast<std::uint8_t>(0x80 + i));
  }
  return table;
}

}  // namespace

Dictionary train_dictionary(const std::vector<std::string>& corpus, std::size_t max_entries) {
  for (const std::string& line : corpus) check_ascii(line);
  max_entries = std::min(max_entries, Dictionary::kMaxEntries);

  Dictionary d;
  while (d.entries.size() < max_entries) {
    auto table = build_table(d);
    // Literal spans of the corpus under the current dictionary.
    std::vector<std::string> runs;
    for (const std::string& line : corpus) {
      std::string run;
      greedy_match(
          line, table, Dictionary::kMaxEntryLen, [&](std::uint8_t) {
            if (!run.empty()) runs.push_back(std::move(run));
            run.clear();
          },
          [&](char c) { run.push_back(c); });
      if (!run.empty()) runs.push_back(std::move(run));
    }

    // Non-overlapping occurrence counts for every candidate n-gram.
    std::unordered_map<std::string, std::size_t> counts;
    std::unordered_map<std::string, std::size_t> next_free;
    for (std::size_t n = Dictionary::kMinEntryLen; n <= Dictionary::kMaxEntryLen; ++n) {
      for (const std::string& run : runs) {
        if (run.size() < n) continue;
        next_free.clear();
        for (std::size_t i = 0; i + n <= run.size(); ++i) {
          std::string gram = run.substr(i, n);
          if (!printable(gram)) continue;
          auto [it, fresh] = next_free.try_emplace(gram, 0);
          if (!fresh && it->second > i) continue;  // overlaps previous count
          ++counts[gram];
          it->second = i + n;
        }
      }
    }

    std::string best;
    std::size_t best_saving = 0;
    for (const auto& [gram, count] : counts) {
      std::size_t saving = count * (gram.size() - 1);
      if (saving > best_saving || (saving == best_saving && !best.empty() && gram < best)) {
        best = gram;
        best_saving = saving;
      }
    }
    if (best.empty()) break;
    d.entries.push_back(std::move(best));
  }
  return d;
}

std::vector<std::uint8_t> compress_line(std::string_view line, const Dictionary& d) {
  check_ascii(line);
  auto table = build_table(d);
  std::vector<std::uint8_t> out;
  out.reserve(line.size());
  greedy_match(
      line, table, Dictionary::kMaxEntryLen,
      [&](std::uint8_t code) { out.push_back(code); },
      [&](char c) { out.push_back(static_cast<std::uint8_t>(c)); });
  return out;
}

std::string decompress_line(std::span<const std::uint8_t> data, const Dictionary& d) {
  std::string out;
  out.reserve(data.size() * 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint8_t b = data[i];
    if (b < 0x80) {
      out.push_back(static_cast<char>(b));
    } else {
      std::size_t idx = b - 0x80;
      if (idx >= d.entries.size()) throw UnknownCode(b, i);
      out += d.entries[idx];
    }
  }
  return out;
}

void save_dictionary(const Dictionary& d, std::ostream& out) {
  if (d.entries.size() > Dictionary::kMaxEntries) {
    throw BadFormat("dictionary has too many entries");
  }
  out.write("SMZ1", 4);
  auto count = static_cast<std::uint8_t>(d.entries.size());
  out.put(static_cast<char>(count));
  for (const std::string& e : d.entries) {
    out.put(static_cast<char>(static_cast<std::uint8_t>(e.size())));
    out.write(e.data(), static_cast<std::streamsize>(e.size()));
  }
}

void save_dictionary_file(const Dictionary& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BadFormat("cannot open for writing: " + path);
  save_dictionary(d, out);
}

Dictionary load_dictionary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SMZ1", 4) != 0) {
    throw BadFormat("bad dictionary magic (want SMZ1)");
  }
  int count = in.get();
  if (count == EOF) throw BadFormat("truncated dictionary header");
  if (static_cast<std::size_t>(count) > Dictionary::kMaxEntries) {
    throw BadFormat("dictionary entry count exceeds 128");
  }
  Dictionary d;
  for (int i = 0; i < count; ++i) {
    int len = in.get();
    if (len == EOF) throw BadFormat("truncated dictionary entry");
    if (len < static_cast<int>(Dictionary::kMinEntryLen) ||
        len > static_cast<int>(Dictionary::kMaxEntryLen)) {
      throw BadFormat("dictionary entry length out of range");
    }
    std::string e(static_cast<std::size_t>(len), '\0');
    if (!in.read(e.data(), len)) throw BadFormat("truncated dictionary entry");
    if (!printable(e)) throw BadFormat("dictionary entry is not printable ASCII");
    for (int j = 0; j < i; ++j) {
      if (d.entries[static_cast<std::size_t>(j)] == e) {
        throw BadFormat("duplicate dictionary entry");
      }
    }
    d.entries.push_back(std::move(e));
  }
  return d;
}

Dictionary load_dictionary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadFormat("cannot open dictionary: " + path);
  return load_dictionary(in);
}

std::array<std::uint8_t, 32> dictionary_sha256(const Dictionary& d) {
  std::ostringstream buf;
  save_dictionary(d, buf);
  std::string bytes = buf.str();
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
  return digest;
}

namespace {

void write_varint(std::ostream& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.put(static_cast<char>(static_cast<std::uint8_t>(v) | 0x80));
    v >>= 7;
  }
  out.put(static_cast<char>(static_cast<std::uint8_t>(v)));
}

bool read_varint(std::istream& in, std::uint64_t& v) {
  v = 0;
  int shift = 0;
  for (;;) {
    int c = in.get();
    if (c == EOF) return shift == 0 ? false : throw BadFormat("truncated varint");
    v |= static_cast<std::uint64_t>(c & 0x7f) << shift;
    if ((c & 0x80) == 0) return true;
    shift += 7;
    if (shift > 63) throw BadFormat("varint overflow");
  }
}

}  // namespace

void compress_stream(std::istream& in, std::ostream& out, const Dictionary& d) {
  out.write("SMZC", 4);
  auto digest = dictionary_sha256(d);
  out.write(reinterpret_cast<const char*>(digest.data()),
            static_cast<std::streamsize>(digest.size()));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::uint8_t> payload = compress_line(line, d);
    write_varint(out, payload.size());
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
  }
}

void decompress_stream(std::istream& in, std::ostream& out, const Dictionary& d) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SMZC", 4) != 0) {
    throw BadFormat("bad compressed-library magic (want SMZC)");
  }
  std::array<std::uint8_t, 32> stored{};
  if (!in.read(reinterpret_cast<char*>(stored.data()), 32)) {
    throw BadFormat("truncated dictionary hash");
  }
  if (stored != dictionary_sha256(d)) {
    throw BadFormat("dictionary hash mismatch: file was written with a different dictionary");
  }
  std::uint64_t len = 0;
  while (read_varint(in, len)) {
    std::vector<std::uint8_t> payload(len);
    if (len > 0 &&
        !in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(len))) {
      throw BadFormat("truncated record payload");
    }
    out << decompress_line(payload, d) << '\n';
  }
}

}  // namespace vscreen::codec
