#pragma once

// Run manifest: a `key = value` file naming inputs, outputs and every
// tunable of a run.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aler/al_loop.hpp"
#include "aler/ann_index.hpp"
#include "aler/kv_text.hpp"

namespace aler {

enum class Stage { ingest, index, partition, train, resolve, eval };

std::string to_string(Stage stage);

struct RunManifest {
  // Inputs. Relative paths resolve against base_dir.
  std::string records_r;
  std::string records_s;
  std::string id_column = "id";
  char delimiter = ',';
  std::string embeddings_r;
  std::string embeddings_s;
  std::string encoder_endpoint;
  std::size_t encoder_batch_size = 32;
  std::string truth;
  std::vector<std::string> key_attrs;
  std::string output_dir;

  std::optional<std::uint64_t> seed;
  double g_s = 0.2;
  std::size_t chunks = 0;  ///< 0 derives the count from the sample size
  std::size_t kmeans_max_iters = 100;
  HnswParams hnsw;
  LoopConfig loop;
  std::optional<std::size_t> budget_cap;

  std::optional<double> recall_threshold;     ///< overrides the trained value
  std::optional<double> precision_threshold;  ///< overrides the trained value

  std::string http_host = "127.0.0.1";
  int http_port = 8765;
  std::string http_token;
  std::string static_dir;
  std::size_t label_timeout_s = 0;  ///< 0 waits indefinitely

  std::filesystem::path base_dir;

  /// Parses manifest text. Unknown keys and malformed values raise
  /// ValidationError naming the key.
  static RunManifest parse(const KeyValues& values, std::filesystem::path base_dir = {});
  /// Reads a manifest; base_dir becomes the file's directory.
  static RunManifest load(const std::filesystem::path& path);

  /// Applies one `key=value` override.
  void set(const std::string& key, const std::string& value);

  /// Every field in a fixed order; parse(to_key_values()) is the identity.
  KeyValues to_key_values() const;
  std::string format() const;

  /// Checks the fields and referenced files needed by `stage`. The error
  /// message starts with the field name.
  void validate(Stage stage) const;

  /// Output directory: output_dir, else $ALER_ARTIFACT_DIR. Throws when
  /// neither is set.
  std::filesystem::path artifact_dir() const;
  std::filesystem::path resolve(const std::string& path) const;

  /// FNV-1a of every field except output_dir, as 16 hex digits.
  std::string config_hash() const;
};

}  // namespace aler
