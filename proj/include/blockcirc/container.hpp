#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockcirc/linear.hpp"
#include "blockcirc/nn.hpp"

namespace blockcirc::io {

// Weight container layout (all integers little-endian):
//
//   magic        4 bytes  "FTRW"
//   version      u16      (currently 1)
//   count        u32      number of records
//   table        count x { name_len u16, name bytes, kind u8, offset u64, length u64 }
//   payloads     record bodies, contiguous and in table order
//
// Record bodies:
//   dense        m u32, n u32, m*n f32 row-major
//   bcm          m u32, n u32, b u32, mode u8, pad_rows u32, pad_cols u32,
//                f*g*b f32 (index vectors p_11, p_12, ..., p_fg)
//   quant-dense  m u32, n u32, frac_bits u8, m*n i16
//   quant-bcm    as bcm, then frac_bits u8, f*g*b i16
//
// Offsets are absolute. Readers only accept the canonical layout produced by
// the writer, so reading and rewriting a file is byte-identical.
inline constexpr char kMagic[4] = {'F', 'T', 'R', 'W'};
inline constexpr std::uint16_t kVersion = 1;

struct Record {
  std::string name;
  LinearWeight::Storage data;

  WeightKind kind() const noexcept { return static_cast<WeightKind>(data.index()); }
};

struct TableEntry {
  std::string name;
  WeightKind kind;
  std::uint64_t offset;
  std::uint64_t length;
};

class WeightContainer {
 public:
  std::vector<Record>& records() noexcept { return records_; }
  const std::vector<Record>& records() const noexcept { return records_; }

  const Record* find(const std::string& name) const;
  Record* find(const std::string& name);
  const Record& at(const std::string& name) const;

  // Adds a record, or replaces the payload of an existing one in place.
  void put(std::string name, LinearWeight::Storage data);

 private:
  std::vector<Record> records_;
};

std::vector<std::uint8_t> encode_record(const LinearWeight::Storage& data);
LinearWeight::Storage decode_record(WeightKind kind, std::span<const std::uint8_t> body);

std::vector<std::uint8_t> serialize(const WeightContainer& c);
WeightContainer parse(std::span<const std::uint8_t> bytes);

// Reads only the header and record table.
std::vector<TableEntry> read_table(const std::filesystem::path& path);

WeightContainer read_container(const std::filesystem::path& path);
// Writes to a temporary sibling and renames it into place.
void write_container(const std::filesystem::path& path, const WeightContainer& c);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// Embedding rows fetched from a dense record on demand, without loading the
// table into memory.
class FileEmbedding final : public nn::EmbeddingTable {
 public:
  FileEmbedding(std::filesystem::path path, const std::string& record);

  std::size_t vocab_size() const override { return rows_; }
  std::size_t dim() const override { return cols_; }
  void lookup(std::size_t token, std::span<double> out) const override;

 private:
  std::filesystem::path path_;
  std::uint64_t data_offset_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

}  // namespace blockcirc::io
