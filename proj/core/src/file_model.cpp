#include "vipio/file_model.hpp"

#include <algorithm>

namespace vipio::model {

namespace {

void require_homogeneous(const std::vector<Record>& records, std::size_t n, std::size_t want) {
  if (n == 0) return;
  std::size_t sz = want == 0 ? records.front().size() : want;
  if (sz == 0) throw Error(Errc::record_size_mismatch, "nil record");
  for (std::size_t j = 0; j < n; ++j) {
    if (records[j].size() != sz) throw Error(Errc::record_size_mismatch, "mixed record sizes");
  }
}

}  // namespace

ModelFile::ModelFile(std::vector<Record> records) : records_(std::move(records)) {
  require_homogeneous(records_, records_.size(), 0);
}

ModelFile ModelFile::from_bytes(std::span<const std::uint8_t> bytes, std::size_t record_size) {
  if (record_size == 0 || bytes.size() % record_size != 0) {
    throw Error(Errc::record_size_mismatch, "byte string is not a whole number of records");
  }
  std::vector<Record> recs;
  recs.reserve(bytes.size() / record_size);
  for (std::size_t off = 0; off < bytes.size(); off += record_size) {
    recs.emplace_back(bytes.begin() + off, bytes.begin() + off + record_size);
  }
  return ModelFile(std::move(recs));
}

const Record& ModelFile::frec(std::size_t index) const {
  if (index == 0 || index > records_.size()) throw Error(Errc::index_beyond_file);
  return records_[index - 1];
}

std::vector<std::uint8_t> ModelFile::bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(records_.size() * record_size());
  for (const auto& r : records_) out.insert(out.end(), r.begin(), r.end());
  return out;
}

MappingFunction::MappingFunction(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  for (auto i : indices_) {
    if (i == 0) throw Error(Errc::invalid_arguments, "mapping indices are 1-based");
  }
}

ModelFile apply_mapping(const MappingFunction& t, const ModelFile& f) {
  if (t.is_identity()) return f;
  std::vector<Record> out;
  out.reserve(t.indices().size());
  for (auto i : t.indices()) out.push_back(f.frec(i));
  ModelFile mapped;
  if (!out.empty()) mapped = ModelFile(std::move(out));
  return mapped;
}

std::size_t DataBuffer::dsize() const {
  std::size_t total = 0;
  for (const auto& r : records) total += r.size();
  return total;
}

DataBuffer DataBuffer::with_capacity(std::size_t count, std::size_t record_size) {
  DataBuffer d;
  d.records.assign(count, Record(record_size, 0));
  return d;
}

ModelHandle model_open(ModelFile file, Mode modes, MappingFunction mapping) {
  ModelHandle fh;
  fh.file_ = std::move(file);
  fh.modes_ = modes;
  fh.position_ = 0;
  fh.mapping_ = std::move(mapping);
  return fh;
}

void model_close(ModelHandle& handle) {
  handle.file_ = ModelFile();
  handle.modes_ = Mode::read;
  handle.position_ = 0;
  handle.mapping_ = MappingFunction();
}

void model_seek(ModelHandle& handle, std::size_t n) {
  if (handle.view_length() < n) throw Error(Errc::out_of_view);
  handle.position_ = n;
}

std::size_t model_read(ModelHandle& handle, std::size_t n, DataBuffer& buf) {
  if (n == 0) throw Error(Errc::invalid_arguments, "READ needs n >= 1");
  if (!has(handle.modes_, Mode::read)) throw Error(Errc::not_readable);
  const std::size_t p = handle.position_;
  const std::size_t view_len = handle.view_length();
  if (view_len <= p) throw Error(Errc::exhausted);
  const std::size_t recsize = handle.file_.record_size();
  const std::size_t fits = buf.dsize() / recsize;
  const std::size_t i = std::min({n, fits, view_len - p});
  if (i == 0) throw Error(Errc::exhausted);

  DataBuffer out;
  out.records.reserve(i);
  if (handle.mapping_.is_identity()) {
    for (std::size_t k = 1; k <= i; ++k) out.records.push_back(handle.file_.frec(p + k));
  } else {
    for (std::size_t k = 1; k <= i; ++k) {
      out.records.push_back(handle.file_.frec(handle.mapping_.indices()[p + k - 1]));
    }
  }
  buf = std::move(out);
  handle.position_ = p + i;
  return i;
}

namespace {

void check_write(Mode modes, std::size_t n, const DataBuffer& buf,
                 std::size_t p, const ModelFile& f) {
  if (n == 0) throw Error(Errc::invalid_arguments, "WRITE needs n >= 1");
  if (!has(modes, Mode::write)) throw Error(Errc::not_writable);
  if (n > buf.dlen()) throw Error(Errc::buffer_too_short);
  require_homogeneous(buf.records, buf.dlen(), f.record_size());
  if (p > f.flen()) throw Error(Errc::position_beyond_file);
}

}  // namespace

void model_write(ModelHandle& handle, std::size_t n, const DataBuffer& buf) {
  const std::size_t p = handle.position_;
  check_write(handle.modes_, n, buf, p, handle.file_);
  auto& recs = handle.file_.records_;
  if (recs.size() < p + n) recs.resize(p + n);
  std::copy_n(buf.records.begin(), n, recs.begin() + static_cast<std::ptrdiff_t>(p));
  handle.position_ = std::min(p + n, handle.view_length());
}

void model_insert(ModelHandle& handle, std::size_t n, const DataBuffer& buf) {
  const std::size_t p = handle.position_;
  check_write(handle.modes_, n, buf, p, handle.file_);
  auto& recs = handle.file_.records_;
  recs.insert(recs.begin() + static_cast<std::ptrdiff_t>(p), buf.records.begin(),
              buf.records.begin() + static_cast<std::ptrdiff_t>(n));
  handle.position_ = std::min(p + n, handle.view_length());
}

}  // namespace vipio::model
