#include "paste/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace paste {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "PASTECKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PasteModel<float>& model, const Vocabulary& vocab,
                     const json& meta) {
  json header;
  header["format"] = "paste-checkpoint";
  header["version"] = 1;
  header["config"] = model.config().to_json();
  header["vocab"] = vocab.to_json();
  header["meta"] = meta;
  header["tensors"] = json::array();
  std::uint64_t offset = 0;
  const auto& params = model.params();
  for (const auto& name : params.names()) {
    const auto& v = params.at(name).value;
    header["tensors"].push_back({{"name", name}, {"rows", v.rows()}, {"cols", v.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(v.size());
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out.write(kMagic, kMagicLen);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& name : params.names()) {
      const auto& v = params.at(name).value;
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    }
    if (!out) throw Error("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::string magic(kMagicLen, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(kMagicLen));
  if (!in || magic != kMagic) throw Error(path.string() + " is not a checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(path.string() + ": truncated header");

  const json header = json::parse(text);
  Checkpoint ck{ModelConfig::from_json(header.at("config")), Vocabulary::from_json(header.at("vocab")), {},
                header.value("meta", json::object())};
  const auto data_start = in.tellg();
  for (const auto& t : header.at("tensors")) {
    ad::Matrix<float> v(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
    in.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>() * sizeof(float)));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!in) throw Error(path.string() + ": truncated tensor " + t.at("name").get<std::string>());
    ck.params.add(t.at("name").get<std::string>(), std::move(v));
  }
  // Validates names and shapes against the stored config.
  (void)ck.model();
  return ck;
}

void check_config_matches(const ModelConfig& stored, const json& expected) {
  const json have = stored.to_json();
  std::string problems;
  for (const auto& [key, value] : expected.items()) {
    if (!have.contains(key)) {
      problems += " unknown key '" + key + "';";
    } else if (have[key] != value) {
      problems += " " + key + ": checkpoint has " + have[key].dump() + ", requested " + value.dump() + ";";
    }
  }
  if (!problems.empty()) throw Error("checkpoint config mismatch:" + problems);
}

}  // namespace paste
