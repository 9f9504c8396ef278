#pragma once

// Records, ground truth and embedding matrices: loading, saving, and the
// client for an external encoder service.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aler/types.hpp"

namespace aler {

/// An entity description. Attribute values are stored positionally; the
/// names live in the owning collection's schema.
struct Record {
  std::string id;
  std::vector<std::string> values;
};

class RecordCollection {
 public:
  RecordCollection() = default;
  explicit RecordCollection(std::vector<std::string> schema);

  /// Appends a record. Throws ValidationError on an empty or duplicate id or
  /// when the value count does not match the schema.
  void add(Record record);

  const std::vector<std::string>& schema() const { return schema_; }
  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const Record* find(const std::string& id) const;
  const Record& at(const std::string& id) const;
  std::optional<std::size_t> attribute_index(const std::string& name) const;

  /// Value of `name` for `record`; the empty string when the schema lacks it.
  const std::string& value(const Record& record, const std::string& name) const;

  std::vector<std::pair<std::string, std::string>> attributes(const Record& record) const;
  std::vector<std::string> ids() const;

 private:
  std::vector<std::string> schema_;
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads a delimited-text record file whose header names `id_column`.
/// Attribute order follows the header with the id column removed.
RecordCollection load_records(const std::filesystem::path& path, const std::string& id_column,
                              char delimiter = ',');

void save_records(const RecordCollection& records, const std::filesystem::path& path,
                  const std::string& id_column = "id", char delimiter = ',');

/// Text handed to the encoder for one record: "name: value" per attribute,
/// joined by single spaces.
std::string record_text(const RecordCollection& records, const Record& record);

/// Dense fixed-dimension float vectors keyed by record id, in insertion order.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::size_t dim);

  /// Appends a row. Throws ValidationError on a dimension mismatch, a
  /// non-finite component, or a duplicate id.
  void add(std::string id, std::span<const float> values);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const float> row(const std::string& id) const;
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<std::size_t> find(const std::string& id) const;
  const std::vector<float>& data() const { return data_; }

  /// Rescales every row to unit L2 norm. Rows already within 1e-6 of unit
  /// norm are left untouched so that normalized data round-trips bit-exactly.
  /// Throws ValidationError naming the id of a zero row.
  void normalize();

  /// Sub-matrix over `ids`, in the given order. Throws on an unknown id.
  EmbeddingMatrix subset(std::span<const std::string> ids) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class EmbeddingFormat { text, binary };

/// Loads a text or binary embedding file (detected by the "ALEREMB1" magic)
/// and L2-normalizes every row.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path,
                     EmbeddingFormat format = EmbeddingFormat::binary);

/// Throws ValidationError naming the first record without a vector.
void check_coverage(const EmbeddingMatrix& matrix, const RecordCollection& records);

/// Ground-truth pairs 𝒟.
class MatchSet {
 public:
  /// Throws ValidationError on a duplicate pair.
  void add(CandidatePair pair);
  bool contains(const CandidatePair& pair) const { return set_.contains(pair); }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const std::vector<CandidatePair>& pairs() const { return pairs_; }

 private:
  std::vector<CandidatePair> pairs_;
  PairSet set_;
};

/// Reads a two-column `r_id,s_id` file (first row is a header). When record
/// collections are given, every id must resolve.
MatchSet load_match_set(const std::filesystem::path& path, const RecordCollection* records_r,
                        const RecordCollection* records_s, char delimiter = ',');

void save_match_set(const MatchSet& truth, const std::filesystem::path& path);

struct FetchOptions {
  std::size_t batch_size = 32;
  std::size_t max_retries = 3;
  int timeout_seconds = 30;
};

/// POSTs batches of `{"texts": [...]}` to `endpoint` and expects
/// `{"vectors": [[...]]}` back. Batches are issued in record order. Network
/// failures are retried `max_retries` times before surfacing as Error.
EmbeddingMatrix fetch_embeddings(const std::string& endpoint, const RecordCollection& records,
                                 const FetchOptions& options = {});

}  // namespace aler
