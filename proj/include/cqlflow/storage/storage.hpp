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
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cqlflow/model/resource.hpp"

namespace cqlflow::storage {

enum class Format : uint8_t { kRow, kColumnar };

std::string_view format_name(Format format);  // "row" / "col"
// Accepts row, col, columnar. Throws Error(kInvalidArgument).
Format parse_format(std::string_view text);
std::string table_file_name(ResourceKind kind, Format format);

inline constexpr uint32_t kChunkRows = 8192;
inline constexpr size_t kMaxDictionary = 256;

// Hash partitioner shared by every table of a dataset.
uint32_t partition_of(int64_t patient_id, uint32_t partitions);

// One decoded column of a chunk. Integer and date values live in `ints`;
// string and code values are indices into the chunk-local dictionary.
struct Column {
  FieldType type = FieldType::kInteger;
  std::vector<int64_t> ints;
  std::vector<uint32_t> ids;
  std::vector<std::string> strings;
  std::vector<CodeRef> codes;

  bool empty_dictionary() const { return strings.empty() && codes.empty(); }
};

// Up to kChunkRows rows; `columns` is indexed by schema field and only the
// requested fields are filled.
struct Chunk {
  uint32_t rows = 0;
  std::vector<Column> columns;
  std::vector<bool> loaded;

  const Column& column(int field) const { return columns[static_cast<size_t>(field)]; }
};

// Per-chunk statistics of one column.
struct ZoneMap {
  bool has_range = false;
  int64_t min = 0;
  int64_t max = 0;
  bool has_dictionary = false;
  std::vector<std::string> strings;
  std::vector<CodeRef> codes;
};

// Zone maps by schema field; absent fields have neither range nor dictionary.
struct ChunkZones {
  uint32_t rows = 0;
  std::vector<ZoneMap> fields;
};

struct ScanStats {
  uint64_t rows_read = 0;
  uint64_t values_read = 0;
  uint64_t chunks_read = 0;
  uint64_t chunks_skipped = 0;
  uint64_t bytes_read = 0;

  ScanStats& operator+=(const ScanStats& o);
};

class TableWriter {
 public:
  // `fields` selects which schema fields are stored (default: all).
  TableWriter(std::filesystem::path path, ResourceKind kind, Format format, uint32_t partitions,
              std::vector<int> fields = {});
  ~TableWriter();
  TableWriter(const TableWriter&) = delete;
  TableWriter& operator=(const TableWriter&) = delete;

  // Partitions must be written in ascending order, each exactly once.
  // Columnar files sort rows by the table's cluster field within a partition.
  void write_partition(uint32_t partition, std::vector<Record> rows);
  // Patches the header and moves the file into place.
  void finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class TableReader {
 public:
  explicit TableReader(const std::filesystem::path& path);
  ~TableReader();
  TableReader(const TableReader&) = delete;
  TableReader& operator=(const TableReader&) = delete;

  ResourceKind kind() const;
  Format format() const;
  uint32_t partition_count() const;
  uint64_t row_count() const;
  uint64_t partition_rows(uint32_t partition) const;
  bool has_field(int field) const;
  int stored_field_count() const;

  using ChunkFilter = std::function<bool(const ChunkZones&)>;
  using ChunkSink = std::function<void(Chunk&)>;

  // Decodes `fields` of every chunk of `partition` that `keep` accepts (row
  // files have no statistics and are never skipped). Throws
  // Error(kMissingColumn) for a field the file does not store and
  // Error(kCorruptData) on a checksum mismatch. Safe to call concurrently.
  void scan(uint32_t partition, const std::vector<int>& fields, const ChunkFilter& keep,
            const ChunkSink& sink, ScanStats& stats) const;

  // Full records of one partition in file order. Requires every schema field.
  std::vector<Record> read_records(uint32_t partition) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct DatasetHandle {
  std::filesystem::path dir;
  Format format = Format::kRow;
  uint32_t partitions = 0;
  std::map<ResourceKind, std::filesystem::path> files;

  // Detects the format from the Patient table. Throws Error(kMissingTable)
  // when any of the seven tables is absent and Error(kSchemaMismatch) when
  // partition counts disagree.
  static DatasetHandle open(const std::filesystem::path& dir);
  std::unique_ptr<TableReader> reader(ResourceKind kind) const;
};

}  // namespace cqlflow::storage
