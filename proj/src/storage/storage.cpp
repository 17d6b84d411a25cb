/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "cqlflow/storage/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "cqlflow/common/error.hpp"
#include "cqlflow/common/io.hpp"

namespace cqlflow::storage {

namespace {

constexpr char kRowMagic[8] = {'C', 'Q', 'L', 'F', 'R', 'O', 'W', '1'};
constexpr char kColMagic[8] = {'C', 'Q', 'L', 'F', 'C', 'O', 'L', '1'};
constexpr uint32_t kVersion = 1;

enum Encoding : uint8_t { kPlain = 0, kDict = 1 };

uint64_t stored_schema_hash(ResourceKind kind, const std::vector<int>& fields) {
  const auto& schema = table_schema(kind);
  std::string text(resource_name(kind));
  for (int f : fields) {
    text += ';';
    text += schema.field(f).name;
    text += ':';
    text += field_type_name(schema.field(f).type);
  }
  return fnv1a64(text);
}

void check_type(const Value& v, FieldType type, ResourceKind kind, int field) {
  static constexpr size_t kIndex[] = {0, 2, 3, 1};  // by FieldType
  if (v.index() != kIndex[static_cast<size_t>(type)]) {
    throw Error(ErrorCode::kInvalidArgument, std::string(resource_name(kind)),
                std::string(resource_name(kind)) + "." +
                    std::string(table_schema(kind).field(field).name) + ": value has the wrong type");
  }
}

void encode_value(ByteWriter& w, const Value& v, FieldType type) {
  switch (type) {
    case FieldType::kInteger: w.put<int64_t>(std::get<int64_t>(v)); break;
    case FieldType::kDate: w.put<int32_t>(std::get<Date>(v).days); break;
    case FieldType::kString: w.put_string(std::get<std::string>(v)); break;
    case FieldType::kCode: {
      const auto& c = std::get<CodeRef>(v);
      w.put_string(c.system);
      w.put_string(c.code);
      break;
    }
  }
}

Value decode_value(ByteReader& r, FieldType type) {
  switch (type) {
    case FieldType::kInteger: return r.get<int64_t>();
    case FieldType::kDate: return Date{r.get<int32_t>()};
    case FieldType::kString: return std::string(r.get_string());
    case FieldType::kCode: {
      std::string system(r.get_string());
      return CodeRef{std::move(system), std::string(r.get_string())};
    }
  }
  return int64_t{0};
}

void skip_value(ByteReader& r, FieldType type) {
  switch (type) {
    case FieldType::kInteger: r.get<int64_t>(); break;
    case FieldType::kDate: r.get<int32_t>(); break;
    case FieldType::kString: r.get_string(); break;
    case FieldType::kCode:
      r.get_string();
      r.get_string();
      break;
  }
}

int64_t scalar_of(const Value& v) {
  if (const auto* d = std::get_if<Date>(&v)) return d->days;
  return std::get<int64_t>(v);
}

bool is_scalar(FieldType t) { return t == FieldType::kInteger || t == FieldType::kDate; }

struct PartitionEntry {
  uint64_t offset = 0;
  uint64_t length = 0;
  uint64_t rows = 0;
  uint32_t crc = 0;
};

constexpr uint64_t kPartitionEntryBytes = 8 + 8 + 8 + 4;

std::vector<uint8_t> header_bytes(Format format, ResourceKind kind, const std::vector<int>& fields,
                                  uint64_t row_count, const std::vector<PartitionEntry>& parts) {
  ByteWriter w;
  const char* magic = format == Format::kRow ? kRowMagic : kColMagic;
  w.put_bytes({reinterpret_cast<const uint8_t*>(magic), 8});
  w.put<uint32_t>(kVersion);
  w.put<uint8_t>(static_cast<uint8_t>(kind));
  w.put<uint64_t>(stored_schema_hash(kind, fields));
  w.put<uint16_t>(static_cast<uint16_t>(fields.size()));
  const auto& schema = table_schema(kind);
  for (int f : fields) {
    w.put_string(schema.field(f).name);
    w.put<uint8_t>(static_cast<uint8_t>(schema.field(f).type));
  }
  w.put<uint32_t>(kChunkRows);
  w.put<uint64_t>(row_count);
  w.put<uint32_t>(static_cast<uint32_t>(parts.size()));
  for (const auto& p : parts) {
    w.put<uint64_t>(p.offset);
    w.put<uint64_t>(p.length);
    w.put<uint64_t>(p.rows);
    w.put<uint32_t>(p.crc);
  }
  return std::move(w.bytes());
}

struct ColumnMeta {
  uint8_t encoding = kPlain;
  uint64_t offset = 0;
  uint32_t length = 0;
  uint32_t crc = 0;
  ZoneMap zone;
};

void put_zone(ByteWriter& w, FieldType type, const ColumnMeta& m) {
  w.put<uint8_t>(m.encoding);
  w.put<uint64_t>(m.offset);
  w.put<uint32_t>(m.length);
  w.put<uint32_t>(m.crc);
  if (is_scalar(type)) {
    w.put<int64_t>(m.zone.min);
    w.put<int64_t>(m.zone.max);
  } else if (m.encoding == kDict) {
    if (type == FieldType::kString) {
      w.put<uint16_t>(static_cast<uint16_t>(m.zone.strings.size()));
      for (const auto& s : m.zone.strings) w.put_string(s);
    } else {
      w.put<uint16_t>(static_cast<uint16_t>(m.zone.codes.size()));
      for (const auto& c : m.zone.codes) {
        w.put_string(c.system);
        w.put_string(c.code);
      }
    }
  }
}

ColumnMeta get_zone(ByteReader& r, FieldType type) {
  ColumnMeta m;
  m.encoding = r.get<uint8_t>();
  m.offset = r.get<uint64_t>();
  m.length = r.get<uint32_t>();
  m.crc = r.get<uint32_t>();
  if (is_scalar(type)) {
    m.zone.has_range = true;
    m.zone.min = r.get<int64_t>();
    m.zone.max = r.get<int64_t>();
  } else if (m.encoding == kDict) {
    m.zone.has_dictionary = true;
    auto n = r.get<uint16_t>();
    for (uint16_t i = 0; i < n; ++i) {
      if (type == FieldType::kString) {
        m.zone.strings.emplace_back(r.get_string());
      } else {
        std::string system(r.get_string());
        m.zone.codes.push_back(CodeRef{std::move(system), std::string(r.get_string())});
      }
    }
  } else if (m.encoding != kPlain) {
    throw Error(ErrorCode::kCorruptData, "column", "unknown column encoding");
  }
  return m;
}

// Builds the encoded block and statistics of one column of one chunk.
ColumnMeta encode_column(const std::vector<const Record*>& rows, int field, FieldType type,
                         ByteWriter& block) {
  ColumnMeta m;
  if (is_scalar(type)) {
    m.zone.has_range = true;
    m.zone.min = std::numeric_limits<int64_t>::max();
    m.zone.max = std::numeric_limits<int64_t>::min();
    for (const Record* r : rows) {
      int64_t v = scalar_of((*r)[field]);
      m.zone.min = std::min(m.zone.min, v);
      m.zone.max = std::max(m.zone.max, v);
      if (type == FieldType::kDate) {
        block.put<int32_t>(static_cast<int32_t>(v));
      } else {
        block.put<int64_t>(v);
      }
    }
    return m;
  }
  if (type == FieldType::kString) {
    std::unordered_map<std::string_view, uint8_t> index;
    std::vector<uint8_t> ids;
    bool fits = true;
    for (const Record* r : rows) {
      const auto& s = std::get<std::string>((*r)[field]);
      auto [it, inserted] = index.try_emplace(s, static_cast<uint8_t>(index.size()));
      if (inserted && index.size() > kMaxDictionary) {
        fits = false;
        break;
      }
      if (inserted) m.zone.strings.push_back(s);
      ids.push_back(it->second);
    }
    if (fits) {
      m.encoding = kDict;
      m.zone.has_dictionary = true;
      block.put_bytes(ids);
    } else {
      m.zone.strings.clear();
      for (const Record* r : rows) block.put_string(std::get<std::string>((*r)[field]));
    }
    return m;
  }
  std::unordered_map<CodeRef, uint8_t, CodeRefHash> index;
  std::vector<uint8_t> ids;
  bool fits = true;
  for (const Record* r : rows) {
    const auto& c = std::get<CodeRef>((*r)[field]);
    auto [it, inserted] = index.try_emplace(c, static_cast<uint8_t>(index.size()));
    if (inserted && index.size() > kMaxDictionary) {
      fits = false;
      break;
    }
    if (inserted) m.zone.codes.push_back(c);
    ids.push_back(it->second);
  }
  if (fits) {
    m.encoding = kDict;
    m.zone.has_dictionary = true;
    block.put_bytes(ids);
  } else {
    m.zone.codes.clear();
    for (const Record* r : rows) {
      const auto& c = std::get<CodeRef>((*r)[field]);
      block.put_string(c.system);
      block.put_string(c.code);
    }
  }
  return m;
}

// Dictionary builder keyed by the raw encoded bytes of each value.
class Interner {
 public:
  explicit Interner(Column& col) : col_(col) {}
  uint32_t add(std::string_view raw) {
    auto [it, inserted] = index_.try_emplace(raw, static_cast<uint32_t>(index_.size()));
    if (inserted) {
      ByteReader r({reinterpret_cast<const uint8_t*>(raw.data()), raw.size()}, "value");
      if (col_.type == FieldType::kString) {
        col_.strings.emplace_back(r.get_string());
      } else {
        std::string system(r.get_string());
        col_.codes.push_back(CodeRef{std::move(system), std::string(r.get_string())});
      }
    }
    return it->second;
  }

 private:
  Column& col_;
  std::unordered_map<std::string_view, uint32_t> index_;
};

std::string_view raw_value(ByteReader& r, FieldType type, std::span<const uint8_t> base) {
  size_t start = r.position();
  skip_value(r, type);
  return {reinterpret_cast<const char*>(base.data() + start), r.position() - start};
}

}  // namespace

std::string_view format_name(Format format) { return format == Format::kRow ? "row" : "col"; }

Format parse_format(std::string_view text) {
  if (text == "row") return Format::kRow;
  if (text == "col" || text == "columnar") return Format::kColumnar;
  throw Error(ErrorCode::kInvalidArgument, std::string(text),
              "unknown format '" + std::string(text) + "' (expected row or col)");
}

std::string table_file_name(ResourceKind kind, Format format) {
  return resource_file_stem(kind) + "." + std::string(format_name(format));
}

uint32_t partition_of(int64_t patient_id, uint32_t partitions) {
  uint64_t z = static_cast<uint64_t>(patient_id) + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return static_cast<uint32_t>(z % partitions);
}

ScanStats& ScanStats::operator+=(const ScanStats& o) {
  rows_read += o.rows_read;
  values_read += o.values_read;
  chunks_read += o.chunks_read;
  chunks_skipped += o.chunks_skipped;
  bytes_read += o.bytes_read;
  return *this;
}

// ---------------------------------------------------------------------------
// Writer

struct TableWriter::Impl {
  std::filesystem::path path;
  std::filesystem::path tmp;
  ResourceKind kind;
  Format format;
  std::vector<int> fields;
  std::vector<PartitionEntry> parts;
  std::ofstream out;
  uint64_t offset = 0;
  uint64_t rows = 0;
  uint32_t next = 0;
  bool finished = false;

  void write(const std::vector<uint8_t>& bytes) {
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, path.string(), "write failed: " + path.string());
    offset += bytes.size();
  }
};

TableWriter::TableWriter(std::filesystem::path path, ResourceKind kind, Format format,
                         uint32_t partitions, std::vector<int> fields)
    : impl_(std::make_unique<Impl>()) {
  if (partitions == 0) throw Error(ErrorCode::kInvalidArgument, "partitions", "partition count must be >= 1");
  const auto& schema = table_schema(kind);
  if (fields.empty()) {
    fields.resize(static_cast<size_t>(schema.field_count()));
    std::iota(fields.begin(), fields.end(), 0);
  }
  std::sort(fields.begin(), fields.end());
  fields.erase(std::unique(fields.begin(), fields.end()), fields.end());
  if (fields.front() != kPatientIdField || fields.back() >= schema.field_count()) {
    throw Error(ErrorCode::kInvalidArgument, path.string(), "stored fields must include patient_id");
  }
  impl_->path = std::move(path);
  impl_->tmp = impl_->path;
  impl_->tmp += ".tmp";
  impl_->kind = kind;
  impl_->format = format;
  impl_->fields = std::move(fields);
  impl_->parts.resize(partitions);
  impl_->out.open(impl_->tmp, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw Error(ErrorCode::kIo, impl_->path.string(), "cannot create " + impl_->tmp.string());
  impl_->write(header_bytes(format, kind, impl_->fields, 0, impl_->parts));
}

TableWriter::~TableWriter() {
  if (impl_ && !impl_->finished) {
    impl_->out.close();
    std::error_code ec;
    std::filesystem::remove(impl_->tmp, ec);
  }
}

void TableWriter::write_partition(uint32_t partition, std::vector<Record> rows) {
  auto& s = *impl_;
  if (partition != s.next || partition >= s.parts.size()) {
    throw Error(ErrorCode::kInvalidArgument, s.path.string(), "partitions must be written in order");
  }
  ++s.next;
  const auto& schema = table_schema(s.kind);
  for (const auto& r : rows) {
    if (r.size() != schema.fields.size()) {
      throw Error(ErrorCode::kInvalidArgument, std::string(resource_name(s.kind)), "record has the wrong arity");
    }
    for (int f : s.fields) check_type(r[f], schema.field(f).type, s.kind, f);
  }

  PartitionEntry& entry = s.parts[partition];
  entry.rows = rows.size();
  s.rows += rows.size();

  if (s.format == Format::kRow) {
    ByteWriter seg;
    ByteWriter rec;
    for (const auto& r : rows) {
      rec.clear();
      for (int f : s.fields) encode_value(rec, r[f], schema.field(f).type);
      seg.put<uint32_t>(static_cast<uint32_t>(rec.size()));
      seg.put_bytes(rec.bytes());
    }
    entry.offset = s.offset;
    entry.length = seg.size();
    entry.crc = crc32_of(seg.bytes());
    s.write(seg.bytes());
    return;
  }

  // Columnar: cluster by the table's sort column so zone ranges stay narrow.
  std::vector<const Record*> order(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) order[i] = &rows[i];
  int cluster = schema.cluster_field;
  std::stable_sort(order.begin(), order.end(), [&](const Record* a, const Record* b) {
    int64_t va = scalar_of((*a)[cluster]);
    int64_t vb = scalar_of((*b)[cluster]);
    if (va != vb) return va < vb;
    return patient_id_of(*a) < patient_id_of(*b);
  });

  ByteWriter dir;
  uint32_t chunks = static_cast<uint32_t>((order.size() + kChunkRows - 1) / kChunkRows);
  dir.put<uint32_t>(chunks);
  ByteWriter block;
  for (uint32_t c = 0; c < chunks; ++c) {
    size_t begin = static_cast<size_t>(c) * kChunkRows;
    size_t end = std::min(order.size(), begin + kChunkRows);
    std::vector<const Record*> slice(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
    dir.put<uint32_t>(static_cast<uint32_t>(slice.size()));
    for (int f : s.fields) {
      block.clear();
      auto type = schema.field(f).type;
      ColumnMeta meta = encode_column(slice, f, type, block);
      meta.offset = s.offset;
      meta.length = static_cast<uint32_t>(block.size());
      meta.crc = crc32_of(block.bytes());
      s.write(block.bytes());
      put_zone(dir, type, meta);
    }
  }
  entry.offset = s.offset;
  entry.length = dir.size();
  entry.crc = crc32_of(dir.bytes());
  s.write(dir.bytes());
}

void TableWriter::finish() {
  auto& s = *impl_;
  while (s.next < s.parts.size()) write_partition(s.next, {});
  s.out.seekp(0);
  auto header = header_bytes(s.format, s.kind, s.fields, s.rows, s.parts);
  s.out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  s.out.close();
  if (!s.out) throw Error(ErrorCode::kIo, s.path.string(), "write failed: " + s.path.string());
  std::error_code ec;
  std::filesystem::rename(s.tmp, s.path, ec);
  if (ec) throw Error(ErrorCode::kIo, s.path.string(), "rename failed: " + ec.message());
  s.finished = true;
}

// ---------------------------------------------------------------------------
// Reader

struct TableReader::Impl {
  std::string path;
  int fd = -1;
  uint64_t file_size = 0;
  ResourceKind kind = ResourceKind::kPatient;
  Format format = Format::kRow;
  std::vector<int> fields;     // stored schema fields, in file order
  std::vector<int> position;   // schema field -> stored position or -1
  uint64_t rows = 0;
  std::vector<PartitionEntry> parts;

  // Uninitialized; pread fills every byte.
  struct Buffer {
    std::unique_ptr<uint8_t[]> bytes;
    size_t length = 0;
    size_t size() const { return length; }
    operator std::span<const uint8_t>() const { return {bytes.get(), length}; }
  };

  Buffer read_at(uint64_t offset, uint64_t length) const {
    if (offset + length > file_size) {
      throw Error(ErrorCode::kCorruptData, path, "segment beyond end of file in " + path);
    }
    Buffer buf{std::unique_ptr<uint8_t[]>(new uint8_t[length]), length};
    size_t done = 0;
    while (done < length) {
      ssize_t n = ::pread(fd, buf.bytes.get() + done, length - done, static_cast<off_t>(offset + done));
      if (n <= 0) throw Error(ErrorCode::kIo, path, "read failed: " + path);
      done += static_cast<size_t>(n);
    }
    return buf;
  }

  void verify(std::span<const uint8_t> bytes, uint32_t crc, const char* what) const {
    if (crc32_of(bytes) != crc) {
      throw Error(ErrorCode::kCorruptData, path, std::string("checksum mismatch in ") + what + " of " + path);
    }
  }

  [[noreturn]] void missing(int field) const {
    std::string name = std::string(resource_name(kind)) + "." +
                       std::string(table_schema(kind).field(field).name);
    throw Error(ErrorCode::kMissingColumn, name, "column " + name + " not stored in " + path);
  }

  struct Directory {
    std::vector<uint32_t> rows;
    std::vector<std::vector<ColumnMeta>> columns;  // [chunk][stored position]
  };

  Directory directory(uint32_t p) const {
    const auto& e = parts[p];
    auto bytes = read_at(e.offset, e.length);
    verify(bytes, e.crc, "partition directory");
    ByteReader r(bytes, path);
    Directory d;
    uint32_t chunks = r.get<uint32_t>();
    const auto& schema = table_schema(kind);
    for (uint32_t c = 0; c < chunks; ++c) {
      d.rows.push_back(r.get<uint32_t>());
      auto& cols = d.columns.emplace_back();
      for (int f : fields) cols.push_back(get_zone(r, schema.field(f).type));
    }
    return d;
  }

  void decode_block(const ColumnMeta& m, uint32_t rows_in_chunk, Column& col, ScanStats& stats) const {
    auto bytes = read_at(m.offset, m.length);
    stats.bytes_read += bytes.size();
    verify(bytes, m.crc, "column chunk");
    ByteReader r(bytes, path);
    switch (col.type) {
      case FieldType::kInteger:
        col.ints.reserve(rows_in_chunk);
        for (uint32_t i = 0; i < rows_in_chunk; ++i) col.ints.push_back(r.get<int64_t>());
        break;
      case FieldType::kDate:
        col.ints.reserve(rows_in_chunk);
        for (uint32_t i = 0; i < rows_in_chunk; ++i) col.ints.push_back(r.get<int32_t>());
        break;
      case FieldType::kString:
      case FieldType::kCode:
        col.ids.resize(rows_in_chunk);
        if (m.encoding == kDict) {
          col.strings = m.zone.strings;
          col.codes = m.zone.codes;
          size_t dict = col.type == FieldType::kString ? col.strings.size() : col.codes.size();
          for (auto& id : col.ids) {
            id = r.get<uint8_t>();
            if (id >= dict) throw Error(ErrorCode::kCorruptData, path, "dictionary index out of range");
          }
        } else {
          Interner interner(col);
          for (auto& id : col.ids) id = interner.add(raw_value(r, col.type, bytes));
        }
        break;
    }
    if (!r.at_end()) throw Error(ErrorCode::kCorruptData, path, "trailing bytes in column chunk");
  }
};

TableReader::TableReader(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
  auto& s = *impl_;
  s.path = path.string();
  s.fd = ::open(s.path.c_str(), O_RDONLY | O_CLOEXEC);
  if (s.fd < 0) throw Error(ErrorCode::kIo, s.path, "cannot open " + s.path);
  off_t end = ::lseek(s.fd, 0, SEEK_END);
  if (end < 0) throw Error(ErrorCode::kIo, s.path, "cannot stat " + s.path);
  s.file_size = static_cast<uint64_t>(end);

  // The header is small; read a prefix and extend once the partition count is known.
  auto head = s.read_at(0, std::min<uint64_t>(s.file_size, 4096));
  ByteReader r(head, s.path);
  auto magic = r.get_bytes(8);
  if (std::equal(magic.begin(), magic.end(), kRowMagic)) {
    s.format = Format::kRow;
  } else if (std::equal(magic.begin(), magic.end(), kColMagic)) {
    s.format = Format::kColumnar;
  } else {
    throw Error(ErrorCode::kCorruptData, s.path, "bad magic in " + s.path);
  }
  if (r.get<uint32_t>() != kVersion) throw Error(ErrorCode::kCorruptData, s.path, "unsupported version in " + s.path);
  uint8_t kind = r.get<uint8_t>();
  if (kind >= kAllResources.size()) throw Error(ErrorCode::kCorruptData, s.path, "bad table kind in " + s.path);
  s.kind = static_cast<ResourceKind>(kind);
  uint64_t hash = r.get<uint64_t>();
  const auto& schema = table_schema(s.kind);
  s.position.assign(static_cast<size_t>(schema.field_count()), -1);
  uint16_t n = r.get<uint16_t>();
  for (uint16_t i = 0; i < n; ++i) {
    std::string_view name = r.get_string();
    auto type = static_cast<FieldType>(r.get<uint8_t>());
    auto f = schema.field_index(name);
    if (!f || schema.field(*f).type != type) {
      throw Error(ErrorCode::kSchemaMismatch, s.path,
                  "column '" + std::string(name) + "' does not match the " +
                      std::string(resource_name(s.kind)) + " schema in " + s.path);
    }
    s.position[static_cast<size_t>(*f)] = static_cast<int>(s.fields.size());
    s.fields.push_back(*f);
  }
  if (hash != stored_schema_hash(s.kind, s.fields)) {
    throw Error(ErrorCode::kSchemaMismatch, s.path, "schema hash mismatch in " + s.path);
  }
  if (r.get<uint32_t>() != kChunkRows) throw Error(ErrorCode::kCorruptData, s.path, "unexpected chunk size");
  s.rows = r.get<uint64_t>();
  uint32_t partitions = r.get<uint32_t>();
  if (partitions == 0) throw Error(ErrorCode::kCorruptData, s.path, "zero partitions in " + s.path);
  uint64_t header_end = r.position() + uint64_t{partitions} * kPartitionEntryBytes;
  if (header_end > head.size()) {
    size_t at = r.position();
    head = s.read_at(0, header_end);
    r = ByteReader(head, s.path);
    r.get_bytes(at);
  }
  s.parts.resize(partitions);
  uint64_t total = 0;
  for (auto& p : s.parts) {
    p.offset = r.get<uint64_t>();
    p.length = r.get<uint64_t>();
    p.rows = r.get<uint64_t>();
    p.crc = r.get<uint32_t>();
    total += p.rows;
  }
  if (total != s.rows) throw Error(ErrorCode::kCorruptData, s.path, "row counts disagree in " + s.path);
}

TableReader::~TableReader() {
  if (impl_ && impl_->fd >= 0) ::close(impl_->fd);
}

ResourceKind TableReader::kind() const { return impl_->kind; }
Format TableReader::format() const { return impl_->format; }
uint32_t TableReader::partition_count() const { return static_cast<uint32_t>(impl_->parts.size()); }
uint64_t TableReader::row_count() const { return impl_->rows; }
uint64_t TableReader::partition_rows(uint32_t partition) const { return impl_->parts.at(partition).rows; }
bool TableReader::has_field(int field) const {
  return field >= 0 && static_cast<size_t>(field) < impl_->position.size() && impl_->position[field] >= 0;
}
int TableReader::stored_field_count() const { return static_cast<int>(impl_->fields.size()); }

void TableReader::scan(uint32_t partition, const std::vector<int>& fields, const ChunkFilter& keep,
                       const ChunkSink& sink, ScanStats& stats) const {
  const auto& s = *impl_;
  if (partition >= s.parts.size()) {
    throw Error(ErrorCode::kInvalidArgument, s.path, "partition out of range in " + s.path);
  }
  const auto& schema = table_schema(s.kind);
  for (int f : fields) {
    if (!has_field(f)) s.missing(f);
  }
  auto fresh_chunk = [&]() {
    Chunk chunk;
    chunk.columns.resize(static_cast<size_t>(schema.field_count()));
    chunk.loaded.assign(static_cast<size_t>(schema.field_count()), false);
    for (int f = 0; f < schema.field_count(); ++f) chunk.columns[f].type = schema.field(f).type;
    for (int f : fields) chunk.loaded[f] = true;
    return chunk;
  };

  if (s.format == Format::kColumnar) {
    auto dir = s.directory(partition);
    for (size_t c = 0; c < dir.rows.size(); ++c) {
      uint32_t rows = dir.rows[c];
      if (keep) {
        ChunkZones zones;
        zones.rows = rows;
        zones.fields.resize(static_cast<size_t>(schema.field_count()));
        for (size_t pos = 0; pos < s.fields.size(); ++pos) zones.fields[s.fields[pos]] = dir.columns[c][pos].zone;
        if (!keep(zones)) {
          ++stats.chunks_skipped;
          continue;
        }
      }
      Chunk chunk = fresh_chunk();
      chunk.rows = rows;
      for (int f : fields) {
        s.decode_block(dir.columns[c][s.position[f]], rows, chunk.columns[f], stats);
      }
      ++stats.chunks_read;
      stats.rows_read += rows;
      stats.values_read += static_cast<uint64_t>(rows) * fields.size();
      sink(chunk);
    }
    return;
  }

  const auto& e = s.parts[partition];
  auto bytes = s.read_at(e.offset, e.length);
  stats.bytes_read += bytes.size();
  s.verify(bytes, e.crc, "partition segment");
  ByteReader r(bytes, s.path);

  std::vector<int> want(s.fields.size(), -1);  // stored position -> schema field if requested
  for (int f : fields) want[s.position[f]] = f;

  Chunk chunk;
  std::vector<std::unique_ptr<Interner>> interners;
  auto start_chunk = [&]() {
    chunk = fresh_chunk();
    interners.clear();
    interners.resize(static_cast<size_t>(schema.field_count()));
    for (int f : fields) {
      if (!is_scalar(schema.field(f).type)) interners[f] = std::make_unique<Interner>(chunk.columns[f]);
    }
  };
  auto flush = [&]() {
    if (chunk.rows == 0) return;
    ++stats.chunks_read;
    sink(chunk);
  };
  start_chunk();
  for (uint64_t i = 0; i < e.rows; ++i) {
    uint32_t len = r.get<uint32_t>();
    size_t record_end = r.position() + len;
    for (size_t pos = 0; pos < s.fields.size(); ++pos) {
      auto type = schema.field(s.fields[pos]).type;
      int f = want[pos];
      if (f < 0) {
        skip_value(r, type);
        continue;
      }
      auto& col = chunk.columns[f];
      if (type == FieldType::kInteger) {
        col.ints.push_back(r.get<int64_t>());
      } else if (type == FieldType::kDate) {
        col.ints.push_back(r.get<int32_t>());
      } else {
        col.ids.push_back(interners[f]->add(raw_value(r, type, bytes)));
      }
    }
    if (r.position() != record_end) throw Error(ErrorCode::kCorruptData, s.path, "bad record length in " + s.path);
    ++chunk.rows;
    ++stats.rows_read;
    stats.values_read += s.fields.size();
    if (chunk.rows == kChunkRows) {
      flush();
      start_chunk();
    }
  }
  flush();
  if (!r.at_end()) throw Error(ErrorCode::kCorruptData, s.path, "trailing bytes in " + s.path);
}

std::vector<Record> TableReader::read_records(uint32_t partition) const {
  const auto& s = *impl_;
  const auto& schema = table_schema(s.kind);
  for (int f = 0; f < schema.field_count(); ++f) {
    if (!has_field(f)) s.missing(f);
  }
  std::vector<Record> out;
  out.reserve(s.parts.at(partition).rows);
  if (s.format == Format::kRow) {
    const auto& e = s.parts[partition];
    auto bytes = s.read_at(e.offset, e.length);
    s.verify(bytes, e.crc, "partition segment");
    ByteReader r(bytes, s.path);
    for (uint64_t i = 0; i < e.rows; ++i) {
      r.get<uint32_t>();
      Record rec;
      rec.reserve(s.fields.size());
      for (int f : s.fields) rec.push_back(decode_value(r, schema.field(f).type));
      out.push_back(std::move(rec));
    }
    return out;
  }
  std::vector<int> all(static_cast<size_t>(schema.field_count()));
  std::iota(all.begin(), all.end(), 0);
  ScanStats ignored;
  scan(partition, all, nullptr, [&](Chunk& chunk) {
    for (uint32_t i = 0; i < chunk.rows; ++i) {
      Record rec;
      rec.reserve(all.size());
      for (int f : all) {
        const auto& col = chunk.columns[f];
        switch (col.type) {
          case FieldType::kInteger: rec.emplace_back(col.ints[i]); break;
          case FieldType::kDate: rec.emplace_back(Date{static_cast<int32_t>(col.ints[i])}); break;
          case FieldType::kString: rec.emplace_back(col.strings[col.ids[i]]); break;
          case FieldType::kCode: rec.emplace_back(col.codes[col.ids[i]]); break;
        }
      }
      out.push_back(std::move(rec));
    }
  }, ignored);
  return out;
}

// ---------------------------------------------------------------------------

DatasetHandle DatasetHandle::open(const std::filesystem::path& dir) {
  DatasetHandle h;
  h.dir = dir;
  if (std::filesystem::exists(dir / table_file_name(ResourceKind::kPatient, Format::kColumnar))) {
    h.format = Format::kColumnar;
  } else if (std::filesystem::exists(dir / table_file_name(ResourceKind::kPatient, Format::kRow))) {
    h.format = Format::kRow;
  } else {
    throw Error(ErrorCode::kMissingTable, "Patient", "no Patient table in " + dir.string());
  }
  for (auto kind : kAllResources) {
    auto path = dir / table_file_name(kind, h.format);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kMissingTable, std::string(resource_name(kind)),
                  "missing table " + path.string());
    }
    h.files[kind] = path;
    TableReader reader(path);
    if (reader.kind() != kind) {
      throw Error(ErrorCode::kSchemaMismatch, path.string(), "table kind mismatch in " + path.string());
    }
    if (h.partitions == 0) h.partitions = reader.partition_count();
    if (reader.partition_count() != h.partitions) {
      throw Error(ErrorCode::kSchemaMismatch, path.string(), "partition count mismatch in " + path.string());
    }
  }
  return h;
}

std::unique_ptr<TableReader> DatasetHandle::reader(ResourceKind kind) const {
  auto it = files.find(kind);
  if (it == files.end()) throw Error(ErrorCode::kMissingTable, std::string(resource_name(kind)));
  return std::make_unique<TableReader>(it->second);
}

}  // namespace cqlflow::storage
