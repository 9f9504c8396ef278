#include "aler/ingest.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "aler/delimited.hpp"
#include "binary_io.hpp"

namespace aler {

namespace {

constexpr char kEmbeddingMagic[8] = {'A', 'L', 'E', 'R', 'E', 'M', 'B', '1'};

}  // namespace

RecordCollection::RecordCollection(std::vector<std::string> schema) : schema_(std::move(schema)) {}

void RecordCollection::add(Record record) {
  if (record.id.empty()) throw ValidationError("record with empty id");
  if (record.values.size() != schema_.size()) {
    throw ValidationError("record \"" + record.id + "\" has " +
                          std::to_string(record.values.size()) + " values, schema has " +
                          std::to_string(schema_.size()));
  }
  auto [it, inserted] = index_.emplace(record.id, records_.size());
  if (!inserted) throw ValidationError("duplicate record id \"" + record.id + "\"");
  records_.push_back(std::move(record));
}

const Record* RecordCollection::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

const Record& RecordCollection::at(const std::string& id) const {
  if (const Record* r = find(id)) return *r;
  throw ValidationError("unknown record id \"" + id + "\"");
}

std::optional<std::size_t> RecordCollection::attribute_index(const std::string& name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i] == name) return i;
  }
  return std::nullopt;
}

const std::string& RecordCollection::value(const Record& record, const std::string& name) const {
  static const std::string kEmpty;
  auto idx = attribute_index(name);
  return idx ? record.values[*idx] : kEmpty;
}

std::vector<std::pair<std::string, std::string>> RecordCollection::attributes(
    const Record& record) const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(schema_.size());
  for (std::size_t i = 0; i < schema_.size(); ++i) out.emplace_back(schema_[i], record.values[i]);
  return out;
}

std::vector<std::string> RecordCollection::ids() const {
  std::vector<std::string> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.id);
  return out;
}

RecordCollection load_records(const std::filesystem::path& path, const std::string& id_column,
                              char delimiter) {
  auto rows = read_delimited(path, delimiter);
  if (rows.empty()) throw ValidationError(path.string() + ": missing header row");
  const auto& header = rows.front().fields;
  std::optional<std::size_t> id_pos;
  std::vector<std::string> schema;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == id_column && !id_pos) {
      id_pos = i;
    } else {
      schema.push_back(header[i]);
    }
  }
  if (!id_pos) {
    throw ValidationError(path.string() + ": header (row 1) has no id column \"" + id_column +
                          "\"");
  }

  RecordCollection out(schema);
  std::unordered_map<std::string, std::size_t> first_row;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size()) {
      throw ValidationError(path.string() + ": row " + std::to_string(row.line) + " has " +
                            std::to_string(row.fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
    }
    Record rec;
    rec.id = row.fields[*id_pos];
    if (rec.id.empty()) {
      throw ValidationError(path.string() + ": row " + std::to_string(row.line) + " has an empty id");
    }
    auto [it, inserted] = first_row.emplace(rec.id, row.line);
    if (!inserted) {
      throw ValidationError(path.string() + ": duplicate id \"" + rec.id + "\" on rows " +
                            std::to_string(it->second) + " and " + std::to_string(row.line));
    }
    rec.values.reserve(schema.size());
    for (std::size_t i = 0; i < row.fields.size(); ++i) {
      if (i != *id_pos) rec.values.push_back(row.fields[i]);
    }
    out.add(std::move(rec));
  }
  return out;
}

void save_records(const RecordCollection& records, const std::filesystem::path& path,
                  const std::string& id_column, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  std::vector<std::string> header{id_column};
  header.insert(header.end(), records.schema().begin(), records.schema().end());
  write_delimited_row(out, header, delimiter);
  for (const auto& rec : records.records()) {
    std::vector<std::string> fields{rec.id};
    fields.insert(fields.end(), rec.values.begin(), rec.values.end());
    write_delimited_row(out, fields, delimiter);
  }
}

std::string record_text(const RecordCollection& records, const Record& record) {
  std::string text;
  for (std::size_t i = 0; i < records.schema().size(); ++i) {
    if (i) text.push_back(' ');
    text += records.schema()[i];
    text += ": ";
    text += record.values[i];
  }
  return text;
}

// ---------------------------------------------------------------------------

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingMatrix::add(std::string id, std::span<const float> values) {
  if (values.size() != dim_) {
    throw ValidationError("embedding for \"" + id + "\" has " + std::to_string(values.size()) +
                          " components, expected dim " + std::to_string(dim_));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw ValidationError("non-finite component in embedding for \"" + id + "\"");
  }
  auto [it, inserted] = index_.emplace(id, ids_.size());
  if (!inserted) throw ValidationError("duplicate embedding id \"" + id + "\"");
  ids_.push_back(std::move(id));
  data_.insert(data_.end(), values.begin(), values.end());
}

std::span<const float> EmbeddingMatrix::row(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("no embedding for record \"" + id + "\"");
  return row(it->second);
}

std::optional<std::size_t> EmbeddingMatrix::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingMatrix::normalize() {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    float* v = data_.data() + i * dim_;
    double sq = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) sq += static_cast<double>(v[j]) * v[j];
    const double norm = std::sqrt(sq);
    if (norm == 0.0) throw ValidationError("zero embedding for \"" + ids_[i] + "\" cannot be normalized");
    if (std::abs(norm - 1.0) <= 1e-6) continue;
    for (std::size_t j = 0; j < dim_; ++j) v[j] = static_cast<float>(v[j] / norm);
  }
}

EmbeddingMatrix EmbeddingMatrix::subset(std::span<const std::string> ids) const {
  EmbeddingMatrix out(dim_);
  for (const auto& id : ids) out.add(id, row(id));
  return out;
}

namespace {

EmbeddingMatrix load_binary_embeddings(std::istream& in, const std::string& name) {
  using detail::read_le;
  const auto dim = read_le<std::uint32_t>(in, "dim");
  const auto count = read_le<std::uint64_t>(in, "count");
  if (dim == 0) throw ValidationError(name + ": dim must be positive");
  EmbeddingMatrix m(dim);
  std::vector<float> row(dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    std::string id = detail::read_short_string(in);
    for (auto& x : row) x = read_le<float>(in, "vector component");
    m.add(std::move(id), row);
  }
  return m;
}

EmbeddingMatrix load_text_embeddings(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (std::sscanf(line.c_str(), "dim=%zu count=%zu", &dim, &count) != 2) {
      throw ValidationError(name + ": line " + std::to_string(line_no) +
                            ": expected header \"dim=<d> count=<n>\"");
    }
    break;
  }
  if (dim == 0) throw ValidationError(name + ": missing or zero dim in header");
  EmbeddingMatrix m(dim);
  std::vector<float> row;
  row.reserve(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    const char* id_end = static_cast<const char*>(std::memchr(p, ' ', line.size()));
    if (!id_end) id_end = end;
    std::string id(p, id_end);
    p = id_end;
    row.clear();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      float value = 0.0f;
      // from_chars rejects "nan"/"inf" spellings with a sign prefix, so
      // parse those through strtof to report them as non-finite instead.
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc()) {
        char* strtof_end = nullptr;
        std::string token(p, std::find(p, end, ' '));
        value = std::strtof(token.c_str(), &strtof_end);
        if (strtof_end == token.c_str()) {
          throw ValidationError(name + ": line " + std::to_string(line_no) +
                                ": unparsable component for \"" + id + "\"");
        }
        next = p + (strtof_end - token.c_str());
      }
      row.push_back(value);
      p = next;
    }
    if (row.size() != dim) {
      throw ValidationError(name + ": line " + std::to_string(line_no) + ": \"" + id + "\" has " +
                            std::to_string(row.size()) + " components, header declares dim=" +
                            std::to_string(dim));
    }
    m.add(std::move(id), row);
  }
  if (m.size() != count) {
    throw ValidationError(name + ": header declares count=" + std::to_string(count) + " but " +
                          std::to_string(m.size()) + " rows were read");
  }
  return m;
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open embedding file " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  const bool binary = in.gcount() == 8 && std::memcmp(magic, kEmbeddingMagic, 8) == 0;
  EmbeddingMatrix m;
  if (binary) {
    m = load_binary_embeddings(in, path.string());
  } else {
    in.clear();
    in.seekg(0);
    m = load_text_embeddings(in, path.string());
  }
  m.normalize();
  return m;
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path,
                     EmbeddingFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  if (format == EmbeddingFormat::binary) {
    out.write(kEmbeddingMagic, sizeof kEmbeddingMagic);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.dim()));
    detail::write_le<std::uint64_t>(out, matrix.size());
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      detail::write_short_string(out, matrix.id(i));
      for (float x : matrix.row(i)) detail::write_le<float>(out, x);
    }
  } else {
    out << "dim=" << matrix.dim() << " count=" << matrix.size() << '\n';
    char buf[64];
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      out << matrix.id(i);
      for (float x : matrix.row(i)) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
        out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
      }
      out << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

void check_coverage(const EmbeddingMatrix& matrix, const RecordCollection& records) {
  for (const auto& rec : records.records()) {
    if (!matrix.find(rec.id)) throw ValidationError("record \"" + rec.id + "\" has no embedding");
  }
}

// ---------------------------------------------------------------------------

void MatchSet::add(CandidatePair pair) {
  if (!set_.insert(pair).second) throw ValidationError("duplicate ground-truth pair " + to_string(pair));
  pairs_.push_back(std::move(pair));
}

MatchSet load_match_set(const std::filesystem::path& path, const RecordCollection* records_r,
                        const RecordCollection* records_s, char delimiter) {
  auto rows = read_delimited(path, delimiter);
  MatchSet truth;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != 2) {
      throw ValidationError(path.string() + ": row " + std::to_string(row.line) +
                            " must have exactly two fields");
    }
    CandidatePair pair{row.fields[0], row.fields[1]};
    if (records_r && !records_r->find(pair.r_id)) {
      throw ValidationError(path.string() + ": row " + std::to_string(row.line) +
                            ": unknown r id \"" + pair.r_id + "\"");
    }
    if (records_s && !records_s->find(pair.s_id)) {
      throw ValidationError(path.string() + ": row " + std::to_string(row.line) +
                            ": unknown s id \"" + pair.s_id + "\"");
    }
    truth.add(std::move(pair));
  }
  return truth;
}

void save_match_set(const MatchSet& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_delimited_row(out, {"r_id", "s_id"});
  for (const auto& p : truth.pairs()) write_delimited_row(out, {p.r_id, p.s_id});
}

// ---------------------------------------------------------------------------

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("encoder endpoint must be a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

EmbeddingMatrix fetch_embeddings(const std::string& endpoint, const RecordCollection& records,
                                 const FetchOptions& options) {
  if (records.empty()) throw ValidationError("fetch_embeddings: no records");
  if (options.batch_size == 0) throw ValidationError("fetch_embeddings: batch_size must be positive");
  const Endpoint ep = split_endpoint(endpoint);
  httplib::Client client(ep.base);
  client.set_connection_timeout(options.timeout_seconds, 0);
  client.set_read_timeout(options.timeout_seconds, 0);

  EmbeddingMatrix out;
  std::size_t dim = 0;
  const auto& recs = records.records();
  for (std::size_t start = 0; start < recs.size(); start += options.batch_size) {
    const std::size_t stop = std::min(recs.size(), start + options.batch_size);
    nlohmann::json body;
    body["texts"] = nlohmann::json::array();
    for (std::size_t i = start; i < stop; ++i) {
      std::string text = record_text(records, recs[i]);
      bool blank = true;
      for (const auto& v : recs[i].values) blank = blank && v.empty();
      if (blank) std::cerr << "warning: record \"" << recs[i].id << "\" has no attribute text\n";
      body["texts"].push_back(std::move(text));
    }
    const std::string payload = body.dump();

    httplib::Result res{nullptr, httplib::Error::Unknown};
    std::string failure;
    for (std::size_t attempt = 0; attempt <= options.max_retries; ++attempt) {
      res = client.Post(ep.path, payload, "application/json");
      if (res && res->status == 200) break;
      failure = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    }
    if (!res || res->status != 200) {
      throw Error("encoder request for records " + std::to_string(start) + ".." +
                  std::to_string(stop - 1) + " failed after " +
                  std::to_string(options.max_retries + 1) + " attempts: " + failure);
    }

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("encoder returned malformed JSON: ") + e.what());
    }
    if (!reply.contains("vectors") || !reply["vectors"].is_array() ||
        reply["vectors"].size() != stop - start) {
      throw Error("encoder reply must contain one vector per text");
    }
    for (std::size_t i = start; i < stop; ++i) {
      const auto& jv = reply["vectors"][i - start];
      std::vector<float> v;
      v.reserve(jv.size());
      for (const auto& x : jv) {
        if (!x.is_number()) throw Error("encoder returned a non-numeric component");
        v.push_back(x.get<float>());
      }
      if (dim == 0) {
        if (v.empty()) throw Error("encoder returned an empty vector");
        dim = v.size();
        out = EmbeddingMatrix(dim);
      } else if (v.size() != dim) {
        throw Error("encoder dimension changed from " + std::to_string(dim) + " to " +
                    std::to_string(v.size()) + " at record \"" + recs[i].id + "\"");
      }
      out.add(recs[i].id, v);
    }
  }
  out.normalize();
  return out;
}

}  // namespace aler
