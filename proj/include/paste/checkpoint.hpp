#pragma once

#include <filesystem>

#include <json.hpp>

#include "paste/corpus.hpp"
#include "paste/model.hpp"

namespace paste {

/// Checkpoint container:
///   "PASTECKPT1\n"
///   uint64 little-endian header length
///   header JSON {"config", "vocab", "meta", "tensors": [{"name", "rows", "cols", "offset"}]}
///   float32 tensor data, column-major, offsets in floats from the data start.
struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  ParamStore<float> params;
  nlohmann::json meta;

  PasteModel<float> model() const { return PasteModel<float>(config, params); }
};

void save_checkpoint(const std::filesystem::path& path, const PasteModel<float>& model, const Vocabulary& vocab,
                     const nlohmann::json& meta = nlohmann::json::object());

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws Error naming every field of `expected` (a partial config in JSON
/// form) that disagrees with the checkpoint's config.
void check_config_matches(const ModelConfig& stored, const nlohmann::json& expected);

}  // namespace paste
