#include "blockcirc/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include "blockcirc/error.hpp"

namespace blockcirc::io {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint64_t v) {
    if (v > 0xffffffffULL) throw ValidationError("value " + std::to_string(v) + " exceeds u32");
    put_le(v, 4);
  }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(double v) { put_le(std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4); }
  void i16(std::int16_t v) { put_le(static_cast<std::uint16_t>(v), 2); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get_le(4))); }
  std::int16_t i16() { return static_cast<std::int16_t>(static_cast<std::uint16_t>(get_le(2))); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ValidationError("weight data truncated");
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void write_bcm_header(Writer& w, std::size_t m, std::size_t n, std::size_t b,
                      CompressionMode mode) {
  const std::size_t f = (m + b - 1) / b;
  const std::size_t g = (n + b - 1) / b;
  w.u32(m);
  w.u32(n);
  w.u32(b);
  w.u8(static_cast<std::uint8_t>(mode));
  w.u32(f * b - m);
  w.u32(g * b - n);
}

struct BcmHeader {
  std::size_t m, n, b;
  CompressionMode mode;
  std::size_t count;
};

BcmHeader read_bcm_header(Reader& r) {
  BcmHeader h{};
  h.m = r.u32();
  h.n = r.u32();
  h.b = r.u32();
  h.mode = compression_mode_from_code(r.u8());
  const std::size_t pad_rows = r.u32();
  const std::size_t pad_cols = r.u32();
  if (h.m == 0 || h.n == 0 || h.b == 0) throw ValidationError("bcm record has a zero dimension");
  const std::size_t f = (h.m + h.b - 1) / h.b;
  const std::size_t g = (h.n + h.b - 1) / h.b;
  if (pad_rows != f * h.b - h.m || pad_cols != g * h.b - h.n) {
    throw ValidationError("bcm record padding inconsistent with its shape");
  }
  h.count = f * g * h.b;
  return h;
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

const Record* WeightContainer::find(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

Record* WeightContainer::find(const std::string& name) {
  for (auto& r : records_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const Record& WeightContainer::at(const std::string& name) const {
  const Record* r = find(name);
  if (!r) throw ValidationError("weight record '" + name + "' is missing");
  return *r;
}

void WeightContainer::put(std::string name, LinearWeight::Storage data) {
  if (Record* r = find(name)) {
    r->data = std::move(data);
    return;
  }
  records_.push_back({std::move(name), std::move(data)});
}

std::vector<std::uint8_t> encode_record(const LinearWeight::Storage& data) {
  Writer w;
  std::visit(Overloaded{
                 [&](const Tensor& t) {
                   if (t.rank() != 2) throw ShapeError("dense record must be rank 2");
                   w.u32(t.rows());
                   w.u32(t.cols());
                   for (double v : t.values()) w.f32(v);
                 },
                 [&](const BlockCirculantMatrix& m) {
                   write_bcm_header(w, m.rows(), m.cols(), m.block_size(), m.mode());
                   for (double v : m.index_data()) w.f32(v);
                 },
                 [&](const QuantizedTensor& q) {
                   if (q.shape.size() != 2) throw ShapeError("quant-dense record must be rank 2");
                   w.u32(q.shape[0]);
                   w.u32(q.shape[1]);
                   w.u8(static_cast<std::uint8_t>(q.format.frac_bits));
                   for (std::int16_t v : q.raw) w.i16(v);
                 },
                 [&](const QuantizedBcm& q) {
                   write_bcm_header(w, q.rows, q.cols, q.block_size, q.mode);
                   w.u8(static_cast<std::uint8_t>(q.index.format.frac_bits));
                   for (std::int16_t v : q.index.raw) w.i16(v);
                 },
             },
             data);
  return std::move(w.buffer());
}

LinearWeight::Storage decode_record(WeightKind kind, std::span<const std::uint8_t> body) {
  Reader r(body);
  LinearWeight::Storage out;
  switch (kind) {
    case WeightKind::kDense: {
      const std::size_t m = r.u32();
      const std::size_t n = r.u32();
      if (r.remaining() != m * n * 4) throw ValidationError("dense record length mismatch");
      std::vector<double> v(m * n);
      for (double& x : v) x = r.f32();
      out = Tensor({m, n}, std::move(v));
      break;
    }
    case WeightKind::kBcm: {
      const BcmHeader h = read_bcm_header(r);
      if (r.remaining() != h.count * 4) throw ValidationError("bcm record length mismatch");
      std::vector<double> v(h.count);
      for (double& x : v) x = r.f32();
      out = BlockCirculantMatrix(h.m, h.n, h.b, std::move(v), h.mode);
      break;
    }
    case WeightKind::kQuantDense: {
      const std::size_t m = r.u32();
      const std::size_t n = r.u32();
      const FixedPointFormat fmt(r.u8());
      if (r.remaining() != m * n * 2) throw ValidationError("quant-dense record length mismatch");
      QuantizedTensor q{{m, n}, std::vector<std::int16_t>(m * n), fmt};
      for (auto& x : q.raw) x = r.i16();
      out = std::move(q);
      break;
    }
    case WeightKind::kQuantBcm: {
      const BcmHeader h = read_bcm_header(r);
      const FixedPointFormat fmt(r.u8());
      if (r.remaining() != h.count * 2) throw ValidationError("quant-bcm record length mismatch");
      QuantizedBcm q{h.m, h.n, h.b, h.mode, {{h.count}, std::vector<std::int16_t>(h.count), fmt}};
      for (auto& x : q.index.raw) x = r.i16();
      out = std::move(q);
      break;
    }
    default:
      throw ValidationError("unknown record kind");
  }
  return out;
}

namespace {

std::uint64_t table_size(const std::vector<std::string>& names) {
  std::uint64_t size = 4 + 2 + 4;
  for (const auto& n : names) size += 2 + n.size() + 1 + 8 + 8;
  return size;
}

std::vector<TableEntry> parse_table(Reader& r, std::uint64_t file_size) {
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ValidationError("not a weight container (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw ValidationError("unsupported container version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<TableEntry> table;
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    const auto name = r.take(len);
    TableEntry e;
    e.name.assign(name.begin(), name.end());
    const std::uint8_t kind = r.u8();
    if (kind > 3) throw ValidationError("record '" + e.name + "' has unknown kind " + std::to_string(kind));
    e.kind = static_cast<WeightKind>(kind);
    e.offset = r.u64();
    e.length = r.u64();
    names.push_back(e.name);
    table.push_back(std::move(e));
  }
  std::uint64_t expected = table_size(names);
  for (const auto& e : table) {
    if (e.offset != expected) {
      throw ValidationError("record '" + e.name + "' is not at its canonical offset " +
                            std::to_string(expected) + " (found " + std::to_string(e.offset) + ")");
    }
    expected += e.length;
  }
  if (expected != file_size) {
    throw ValidationError("container size " + std::to_string(file_size) + " != expected " +
                          std::to_string(expected));
  }
  return table;
}

}  // namespace

std::vector<std::uint8_t> serialize(const WeightContainer& c) {
  std::vector<std::string> names;
  std::vector<std::vector<std::uint8_t>> bodies;
  for (const auto& rec : c.records()) {
    if (rec.name.size() > 0xffff) throw ValidationError("record name too long");
    names.push_back(rec.name);
    bodies.push_back(encode_record(rec.data));
  }
  Writer w;
  for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u16(kVersion);
  w.u32(c.records().size());
  std::uint64_t offset = table_size(names);
  for (std::size_t i = 0; i < names.size(); ++i) {
    w.u16(static_cast<std::uint16_t>(names[i].size()));
    w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(names[i].data()), names[i].size()));
    w.u8(static_cast<std::uint8_t>(c.records()[i].kind()));
    w.u64(offset);
    w.u64(bodies[i].size());
    offset += bodies[i].size();
  }
  for (const auto& b : bodies) w.bytes(b);
  return std::move(w.buffer());
}

WeightContainer parse(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto table = parse_table(r, bytes.size());
  WeightContainer c;
  for (const auto& e : table) {
    if (c.find(e.name)) throw ValidationError("duplicate record name '" + e.name + "'");
    try {
      c.records().push_back({e.name, decode_record(e.kind, bytes.subspan(e.offset, e.length))});
    } catch (const Error& err) {
      throw ValidationError("record '" + e.name + "': " + err.what());
    }
  }
  return c;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return data;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp-" + std::to_string(std::random_device{}());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<TableEntry> read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  // The table is small; read it incrementally by growing the prefix.
  std::vector<std::uint8_t> prefix;
  std::size_t want = 4096;
  while (true) {
    prefix.resize(std::min<std::uint64_t>(want, file_size));
    in.clear();
    in.seekg(0);
    in.read(reinterpret_cast<char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
    try {
      Reader r(prefix);
      // Parse against the real size; the record bodies are not touched.
      return parse_table(r, file_size);
    } catch (const ValidationError&) {
      if (prefix.size() == file_size) throw;
      want *= 4;
    }
  }
}

WeightContainer read_container(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse(bytes);
}

void write_container(const std::filesystem::path& path, const WeightContainer& c) {
  const auto bytes = serialize(c);
  write_file_atomic(path, bytes);
}

FileEmbedding::FileEmbedding(std::filesystem::path path, const std::string& record)
    : path_(std::move(path)) {
  for (const auto& e : read_table(path_)) {
    if (e.name != record) continue;
    if (e.kind != WeightKind::kDense) {
      throw ValidationError("embedding record '" + record + "' must be dense");
    }
    std::ifstream in(path_, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(e.offset));
    std::uint8_t hdr[8];
    in.read(reinterpret_cast<char*>(hdr), 8);
    if (!in) throw IoError("cannot read embedding header from " + path_.string());
    Reader r(hdr);
    rows_ = r.u32();
    cols_ = r.u32();
    if (e.length != 8 + static_cast<std::uint64_t>(rows_) * cols_ * 4) {
      throw ValidationError("embedding record length mismatch");
    }
    data_offset_ = e.offset + 8;
    return;
  }
  throw ValidationError("weight file " + path_.string() + " has no '" + record + "' record");
}

void FileEmbedding::lookup(std::size_t token, std::span<double> out) const {
  if (token >= rows_) {
    throw DomainError("token id " + std::to_string(token) + " out of range for vocabulary of " +
                      std::to_string(rows_));
  }
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw IoError("cannot open " + path_.string());
  in.seekg(static_cast<std::streamoff>(data_offset_ + token * cols_ * 4));
  std::vector<std::uint8_t> row(cols_ * 4);
  in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
  if (!in) throw IoError("cannot read embedding row from " + path_.string());
  Reader r(row);
  for (std::size_t c = 0; c < cols_; ++c) out[c] = r.f32();
}

}  // namespace blockcirc::io
