#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "paste/model.hpp"
#include "paste/training.hpp"

namespace paste {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment. Throws Error with the
/// line number on malformed lines.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& file);

/// Fully resolved settings for one CLI invocation.
struct RunSettings {
  std::filesystem::path data_dir;
  std::string dataset = "14lap";
  std::string split = "test";
  ModelConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::string> annotator;
  std::optional<std::filesystem::path> checkpoint;
  std::filesystem::path out_dir = "runs";
  /// Unset means: derive from the training split.
  bool max_steps_explicit = false;
  /// Model keys given explicitly (by file or flag), for checkpoint checks.
  nlohmann::json explicit_model_keys = nlohmann::json::object();

  /// Key=value snapshot that reproduces this run when fed back via --config.
  std::string to_key_values() const;
  nlohmann::json to_json() const;
};

inline const std::vector<std::uint64_t>& default_seeds() {
  static const std::vector<std::uint64_t> s{13, 42, 2021, 7, 99};
  return s;
}

/// Applies `values` over the defaults (later layers win: pass the config file
/// first, then command-line overrides). Unknown keys and unparsable values
/// throw Error. Validates the result.
RunSettings resolve_settings(const std::vector<KeyValues>& layers);

/// Element-wise statistical median (mean of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace paste
