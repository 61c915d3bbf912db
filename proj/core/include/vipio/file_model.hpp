#pragma once

// Executable form of the formal sequential file model. Record indices are
// 1-based inside this header; everything else in the library speaks 0-based
// byte offsets. This module is the reference oracle for the byte paths of the
// whole system, so it favours literal transcription over speed.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vipio/error.hpp"

namespace vipio::model {

using Record = std::vector<std::uint8_t>;

inline std::size_t size(const Record& rec) { return rec.size(); }

class ModelHandle;
struct DataBuffer;

class ModelFile {
 public:
  ModelFile() = default;
  // Throws RecordSizeMismatch unless all records share one non-zero size.
  explicit ModelFile(std::vector<Record> records);

  // Splits a byte string into records of `record_size` bytes.
  static ModelFile from_bytes(std::span<const std::uint8_t> bytes, std::size_t record_size);

  std::size_t flen() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  // 0 for the empty file.
  std::size_t record_size() const { return records_.empty() ? 0 : records_.front().size(); }

  // frec(f, i) for 1 <= i <= flen. Throws IndexBeyondFile otherwise (the
  // formal model yields nil there, which cannot round-trip through bytes).
  const Record& frec(std::size_t index) const;

  const std::vector<Record>& records() const { return records_; }
  std::vector<std::uint8_t> bytes() const;

  friend bool operator==(const ModelFile&, const ModelFile&) = default;

 private:
  friend void model_write(ModelHandle&, std::size_t, const DataBuffer&);
  friend void model_insert(ModelHandle&, std::size_t, const DataBuffer&);

  std::vector<Record> records_;
};

// psi_t. An identity mapping adapts to the file it is applied to.
class MappingFunction {
 public:
  MappingFunction() = default;  // psi_() : maps every file to <>
  explicit MappingFunction(std::vector<std::size_t> indices);

  static MappingFunction identity() {
    MappingFunction m;
    m.identity_ = true;
    return m;
  }

  bool is_identity() const { return identity_; }
  const std::vector<std::size_t>& indices() const { return indices_; }

  // flen(psi(f)) without materializing records.
  std::size_t view_length(const ModelFile& f) const { return identity_ ? f.flen() : indices_.size(); }

 private:
  std::vector<std::size_t> indices_;
  bool identity_ = false;
};

ModelFile apply_mapping(const MappingFunction& t, const ModelFile& f);

struct DataBuffer {
  std::vector<Record> records;

  std::size_t dlen() const { return records.size(); }
  std::size_t dsize() const;

  // A buffer of `count` zeroed records, used to express READ capacity.
  static DataBuffer with_capacity(std::size_t count, std::size_t record_size);
};

enum class Mode : std::uint8_t { read = 1, write = 2, read_write = 3 };

inline bool has(Mode set, Mode m) {
  return (static_cast<std::uint8_t>(set) & static_cast<std::uint8_t>(m)) != 0;
}

class ModelHandle {
 public:
  const ModelFile& file() const { return file_; }
  Mode modes() const { return modes_; }
  std::size_t position() const { return position_; }
  const MappingFunction& mapping() const { return mapping_; }
  std::size_t view_length() const { return mapping_.view_length(file_); }

 private:
  friend ModelHandle model_open(ModelFile, Mode, MappingFunction);
  friend void model_close(ModelHandle&);
  friend void model_seek(ModelHandle&, std::size_t);
  friend std::size_t model_read(ModelHandle&, std::size_t, DataBuffer&);
  friend void model_write(ModelHandle&, std::size_t, const DataBuffer&);
  friend void model_insert(ModelHandle&, std::size_t, const DataBuffer&);

  ModelFile file_;
  Mode modes_ = Mode::read;
  std::size_t position_ = 0;
  MappingFunction mapping_;
};

ModelHandle model_open(ModelFile file, Mode modes, MappingFunction mapping);
void model_close(ModelHandle& handle);
// OutOfView when n exceeds the view length; handle untouched on error.
void model_seek(ModelHandle& handle, std::size_t n);
// Returns i = min(n, floor(dsize(buf)/recsize), viewlen - p). `buf` only
// contributes its capacity and is overwritten with the records read.
std::size_t model_read(ModelHandle& handle, std::size_t n, DataBuffer& buf);
// Replaces/appends records p+1..p+n of the underlying file.
void model_write(ModelHandle& handle, std::size_t n, const DataBuffer& buf);
// Inserts n records after position p; flen grows by exactly n.
void model_insert(ModelHandle& handle, std::size_t n, const DataBuffer& buf);

}  // namespace vipio::model
