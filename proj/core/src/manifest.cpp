#include "aler/manifest.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <type_traits>

namespace aler {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest:
      return "ingest";
    case Stage::index:
      return "index";
    case Stage::partition:
      return "partition";
    case Stage::train:
      return "train";
    case Stage::resolve:
      return "resolve";
    case Stage::eval:
      return "eval";
  }
  return "unknown";
}

namespace {

struct Field {
  const char* key;
  std::function<void(RunManifest&, const std::string&)> set;
  /// nullopt leaves the key out of the formatted manifest.
  std::function<std::optional<std::string>(const RunManifest&)> get;
};

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(start, end - start);
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? std::string() : item.substr(b, e - b + 1);
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

char parse_delimiter(const std::string& v) {
  if (v == "tab" || v == "\\t") return '\t';
  if (v.size() == 1 && v != "\"" && v != "\n" && v != "\r") return v[0];
  throw ValidationError("delimiter: expected one character or \"tab\", got \"" + v + "\"");
}

double parse_probability(const std::string& v, const char* key) {
  const double x = parse_double(v, key);
  if (x < 0.0 || x > 1.0) throw ValidationError(std::string(key) + ": must lie in [0, 1]");
  return x;
}

template <typename T>
std::optional<std::string> show(const std::optional<T>& v) {
  if (!v) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

const std::vector<Field>& fields() {
  using M = RunManifest;
  auto text = [](std::string M::*member, const char* key) {
    return Field{key, [member](M& m, const std::string& v) { m.*member = v; },
                 [member](const M& m) { return std::optional<std::string>(m.*member); }};
  };
  auto size = [](auto getter, const char* key) {
    return Field{key,
                 [getter, key](M& m, const std::string& v) { getter(m) = parse_size(v, key); },
                 [getter](const M& m) {
                   return std::optional<std::string>(std::to_string(getter(const_cast<M&>(m))));
                 }};
  };
  auto real = [](auto getter, const char* key) {
    return Field{key,
                 [getter, key](M& m, const std::string& v) { getter(m) = parse_double(v, key); },
                 [getter](const M& m) {
                   return std::optional<std::string>(format_double(getter(const_cast<M&>(m))));
                 }};
  };
  static const std::vector<Field> table = {
      text(&M::records_r, "records_r"),
      text(&M::records_s, "records_s"),
      text(&M::id_column, "id_column"),
      Field{"delimiter", [](M& m, const std::string& v) { m.delimiter = parse_delimiter(v); },
            [](const M& m) {
              return std::optional<std::string>(m.delimiter == '\t' ? "tab"
                                                                    : std::string(1, m.delimiter));
            }},
      text(&M::embeddings_r, "embeddings_r"),
      text(&M::embeddings_s, "embeddings_s"),
      text(&M::encoder_endpoint, "encoder_endpoint"),
      size([](M& m) -> std::size_t& { return m.encoder_batch_size; }, "encoder_batch_size"),
      text(&M::truth, "truth"),
      Field{"key_attrs", [](M& m, const std::string& v) { m.key_attrs = split_list(v); },
            [](const M& m) { return std::optional<std::string>(join(m.key_attrs)); }},
      text(&M::output_dir, "output_dir"),
      Field{"seed",
            [](M& m, const std::string& v) {
              std::uint64_t s = 0;
              auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
              if (v.empty() || ec != std::errc() || end != v.data() + v.size()) {
                throw ValidationError("seed: expected a non-negative integer, got \"" + v + "\"");
              }
              m.seed = s;
            },
            [](const M& m) { return show(m.seed); }},
      Field{"g_s", [](M& m, const std::string& v) { m.g_s = parse_probability(v, "g_s"); },
            [](const M& m) { return std::optional<std::string>(format_double(m.g_s)); }},
      size([](M& m) -> std::size_t& { return m.chunks; }, "chunks"),
      size([](M& m) -> std::size_t& { return m.kmeans_max_iters; }, "kmeans_max_iters"),
      size([](M& m) -> std::size_t& { return m.hnsw.m; }, "hnsw_m"),
      size([](M& m) -> std::size_t& { return m.hnsw.ef_construction; }, "ef_construction"),
      size([](M& m) -> std::size_t& { return m.hnsw.ef_search; }, "ef_search"),
      size([](M& m) -> std::size_t& { return m.loop.k; }, "k"),
      size([](M& m) -> std::size_t& { return m.loop.b_seed; }, "b_seed"),
      size([](M& m) -> std::size_t& { return m.loop.b; }, "b"),
      size([](M& m) -> std::size_t& { return m.loop.i_max; }, "i_max"),
      size([](M& m) -> std::size_t& { return m.loop.patience; }, "patience"),
      real([](M& m) -> double& { return m.loop.min_delta; }, "min_delta"),
      Field{"g_v", [](M& m, const std::string& v) { m.loop.g_v = parse_probability(v, "g_v"); },
            [](const M& m) { return std::optional<std::string>(format_double(m.loop.g_v)); }},
      size([](M& m) -> std::size_t& { return m.loop.validation_cap; }, "validation_cap"),
      Field{"confident_fraction",
            [](M& m, const std::string& v) {
              m.loop.confident_fraction = parse_probability(v, "confident_fraction");
            },
            [](const M& m) {
              return std::optional<std::string>(format_double(m.loop.confident_fraction));
            }},
      Field{"strategy", [](M& m, const std::string& v) { m.loop.strategy = parse_strategy(v); },
            [](const M& m) { return std::optional<std::string>(to_string(m.loop.strategy)); }},
      Field{"budget_cap",
            [](M& m, const std::string& v) {
              const auto cap = parse_size(v, "budget_cap");
              if (cap == 0) throw ValidationError("budget_cap: must be positive");
              m.budget_cap = cap;
            },
            [](const M& m) { return show(m.budget_cap); }},
      size([](M& m) -> std::size_t& { return m.loop.train.batch_size; }, "batch_size"),
      size([](M& m) -> std::size_t& { return m.loop.train.max_epochs; }, "epochs"),
      real([](M& m) -> double& { return m.loop.train.learning_rate; }, "learning_rate"),
      real([](M& m) -> double& { return m.loop.train.dropout_rate; }, "dropout"),
      Field{"recall_threshold",
            [](M& m, const std::string& v) {
              m.recall_threshold = parse_probability(v, "recall_threshold");
            },
            [](const M& m) { return show(m.recall_threshold); }},
      Field{"precision_threshold",
            [](M& m, const std::string& v) {
              m.precision_threshold = parse_probability(v, "precision_threshold");
            },
            [](const M& m) { return show(m.precision_threshold); }},
      text(&M::http_host, "http_host"),
      Field{"http_port",
            [](M& m, const std::string& v) {
              const auto p = parse_size(v, "http_port");
              if (p > 65535) throw ValidationError("http_port: must be at most 65535");
              m.http_port = static_cast<int>(p);
            },
            [](const M& m) { return std::optional<std::string>(std::to_string(m.http_port)); }},
      text(&M::http_token, "http_token"),
      text(&M::static_dir, "static_dir"),
      size([](M& m) -> std::size_t& { return m.label_timeout_s; }, "label_timeout_s"),
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

RunManifest RunManifest::parse(const KeyValues& values, std::filesystem::path base_dir) {
  RunManifest m;
  m.base_dir = std::move(base_dir);
  for (const auto& [key, value] : values) m.set(key, value);
  return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  return parse(read_key_values(path), path.parent_path());
}

void RunManifest::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ValidationError(key + ": unknown manifest key");
  f->set(*this, value);
}

KeyValues RunManifest::to_key_values() const {
  KeyValues out;
  for (const auto& f : fields()) {
    if (auto v = f.get(*this)) out.emplace_back(f.key, *v);
  }
  return out;
}

std::string RunManifest::format() const { return format_key_values(to_key_values()); }

std::filesystem::path RunManifest::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::filesystem::path RunManifest::artifact_dir() const {
  if (!output_dir.empty()) return resolve(output_dir);
  if (const char* env = std::getenv("ALER_ARTIFACT_DIR"); env && *env) return env;
  throw ValidationError("output_dir: not set and ALER_ARTIFACT_DIR is empty");
}

std::string RunManifest::config_hash() const {
  std::string text;
  for (const auto& [k, v] : to_key_values()) {
    if (k == "output_dir") continue;
    text += k + "=" + v + "\n";
  }
  return hex64(fnv1a(text));
}

void RunManifest::validate(Stage stage) const {
  auto require_file = [&](const std::string& value, const char* key) {
    if (value.empty()) throw ValidationError(std::string(key) + ": required");
    if (!std::filesystem::is_regular_file(resolve(value))) {
      throw ValidationError(std::string(key) + ": file not found: " + resolve(value).string());
    }
  };

  if (!seed) throw ValidationError("seed: required");
  if (!(g_s > 0.0)) throw ValidationError("g_s: must lie in (0, 1]");
  if (hnsw.m < 2) throw ValidationError("hnsw_m: must be at least 2");
  if (hnsw.ef_construction < hnsw.m) throw ValidationError("ef_construction: must be at least hnsw_m");
  if (hnsw.ef_search == 0) throw ValidationError("ef_search: must be positive");
  if (kmeans_max_iters == 0) throw ValidationError("kmeans_max_iters: must be positive");
  if (encoder_batch_size == 0) throw ValidationError("encoder_batch_size: must be positive");
  loop.validate();
  artifact_dir();

  switch (stage) {
    case Stage::ingest:
      require_file(records_r, "records_r");
      require_file(records_s, "records_s");
      if (encoder_endpoint.empty()) {
        if (embeddings_r.empty()) throw ValidationError("embeddings_r: required (or set encoder_endpoint)");
        if (embeddings_s.empty()) throw ValidationError("embeddings_s: required (or set encoder_endpoint)");
        require_file(embeddings_r, "embeddings_r");
        require_file(embeddings_s, "embeddings_s");
      }
      break;
    case Stage::index:
    case Stage::partition:
      break;
    case Stage::train:
    case Stage::resolve:
      require_file(records_r, "records_r");
      require_file(records_s, "records_s");
      break;
    case Stage::eval:
      require_file(truth, "truth");
      break;
  }
  if (!static_dir.empty() && !std::filesystem::is_directory(resolve(static_dir))) {
    throw ValidationError("static_dir: not a directory: " + resolve(static_dir).string());
  }
}

}  // namespace aler
