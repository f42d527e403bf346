#include "paste/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace paste {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw Error("invalid value for " + key + ": '" + text + "'");
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw Error("");
    return v;
  } catch (const std::exception&) {
    throw Error("invalid value for " + key + ": '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error("invalid value for " + key + ": '" + text + "'");
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open config file " + file.string());
  try {
    return parse_key_values(in);
  } catch (const Error& e) {
    throw Error(file.string() + ": " + e.what());
  }
}

RunSettings resolve_settings(const std::vector<KeyValues>& layers) {
  KeyValues merged;
  for (const auto& layer : layers) {
    for (const auto& [k, v] : layer) merged[k] = v;
  }

  RunSettings s;
  std::optional<std::uint64_t> seed;
  for (const auto& [key, value] : merged) {
    if (key == "data_dir") s.data_dir = value;
    else if (key == "dataset") { dataset_components(value); s.dataset = value; }
    else if (key == "split") s.split = value;
    else if (key == "direction") { s.model.direction = parse_direction(value); s.explicit_model_keys["direction"] = std::string(to_string(s.model.direction)); }
    else if (key == "d_w") { s.model.d_w = parse_number<int>(key, value); s.explicit_model_keys[key] = s.model.d_w; }
    else if (key == "d_pos") { s.model.d_pos = parse_number<int>(key, value); s.explicit_model_keys[key] = s.model.d_pos; }
    else if (key == "d_dep") { s.model.d_dep = parse_number<int>(key, value); s.explicit_model_keys[key] = s.model.d_dep; }
    else if (key == "d_h") { s.model.d_h = parse_number<int>(key, value); s.explicit_model_keys[key] = s.model.d_h; }
    else if (key == "d_p") { s.model.d_p = parse_number<int>(key, value); s.explicit_model_keys[key] = s.model.d_p; }
    else if (key == "dropout") { s.model.dropout = parse_double(key, value); s.explicit_model_keys[key] = s.model.dropout; }
    else if (key == "max_steps") { s.model.max_steps = parse_number<int>(key, value); s.max_steps_explicit = true; s.explicit_model_keys[key] = s.model.max_steps; }
    else if (key == "epochs") s.train.epochs = parse_number<int>(key, value);
    else if (key == "batch_size") s.train.batch_size = parse_number<int>(key, value);
    else if (key == "lr") s.train.learning_rate = parse_double(key, value);
    else if (key == "weight_decay") s.train.weight_decay = parse_double(key, value);
    else if (key == "runs") s.train.runs = parse_number<int>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "seeds") {
      s.seeds.clear();
      std::stringstream in(value);
      for (std::string item; std::getline(in, item, ',');) s.seeds.push_back(parse_number<std::uint64_t>(key, trim(item)));
    }
    else if (key == "random_target_order") s.train.random_target_order = parse_bool(key, value);
    else if (key == "embeddings") s.embeddings = value;
    else if (key == "annotator") s.annotator = value;
    else if (key == "checkpoint") s.checkpoint = value;
    else if (key == "out_dir") s.out_dir = value;
    else throw Error("unknown config key '" + key + "'");
  }

  s.model.validate();
  s.train.validate();
  if (s.seeds.empty()) {
    for (int k = 0; k < s.train.runs; ++k) {
      if (seed) s.seeds.push_back(*seed + static_cast<std::uint64_t>(k));
      else if (k < static_cast<int>(default_seeds().size())) s.seeds.push_back(default_seeds()[k]);
      else s.seeds.push_back(1000 + static_cast<std::uint64_t>(k));
    }
  } else if (merged.count("runs") == 0) {
    s.train.runs = static_cast<int>(s.seeds.size());
  } else if (static_cast<int>(s.seeds.size()) != s.train.runs) {
    throw Error("seed list has " + std::to_string(s.seeds.size()) + " entries but runs = " +
                std::to_string(s.train.runs));
  }
  s.train.seed = s.seeds.front();
  return s;
}

std::string RunSettings::to_key_values() const {
  std::ostringstream o;
  o.precision(17);
  if (!data_dir.empty()) o << "data_dir = " << data_dir.string() << '\n';
  o << "dataset = " << dataset << '\n'
    << "split = " << split << '\n'
    << "direction = " << to_string(model.direction) << '\n'
    << "d_w = " << model.d_w << '\n'
    << "d_pos = " << model.d_pos << '\n'
    << "d_dep = " << model.d_dep << '\n'
    << "d_h = " << model.d_h << '\n'
    << "d_p = " << model.d_p << '\n'
    << "dropout = " << model.dropout << '\n';
  if (max_steps_explicit) o << "max_steps = " << model.max_steps << '\n';
  o << "epochs = " << train.epochs << '\n'
    << "batch_size = " << train.batch_size << '\n'
    << "lr = " << train.learning_rate << '\n'
    << "weight_decay = " << train.weight_decay << '\n'
    << "runs = " << train.runs << '\n'
    << "random_target_order = " << (train.random_target_order ? "true" : "false") << '\n'
    << "seeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) o << (i ? "," : "") << seeds[i];
  o << '\n';
  if (embeddings) o << "embeddings = " << embeddings->string() << '\n';
  if (annotator) o << "annotator = " << *annotator << '\n';
  if (checkpoint) o << "checkpoint = " << checkpoint->string() << '\n';
  o << "out_dir = " << out_dir.string() << '\n';
  return o.str();
}

json RunSettings::to_json() const {
  json j;
  j["data_dir"] = data_dir.string();
  j["dataset"] = dataset;
  j["split"] = split;
  j["model"] = model.to_json();
  j["model"]["max_steps_explicit"] = max_steps_explicit;
  j["train"] = train.to_json();
  j["seeds"] = seeds;
  j["embeddings"] = embeddings ? json(embeddings->string()) : json(nullptr);
  j["annotator"] = annotator ? json(*annotator) : json(nullptr);
  j["checkpoint"] = checkpoint ? json(checkpoint->string()) : json(nullptr);
  j["out_dir"] = out_dir.string();
  return j;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace paste
