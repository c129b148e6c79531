#include "bichunter/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "bichunter/embedding.hpp"
#include "bichunter/error.hpp"

namespace bichunter {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw ConfigError("invalid value '" + value + "' for '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ConfigError("invalid boolean '" + value + "' for '" + key + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

const char* to_string(DenoiseScope scope) { return scope == DenoiseScope::global ? "global" : "fold"; }
const char* to_string(ClassifierFeatures f) {
  return f == ClassifierFeatures::bag_of_words ? "bag_of_words" : "embedding";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (cl_folds < 2) throw ConfigError("cl_folds must be >= 2");
  if (bow_dim < 1 || embedding_dim < 1) throw ConfigError("feature dimensions must be >= 1");
  if (!(edge_weight > 0.0)) throw ConfigError("edge_weight must be > 0");
  if (layers < 1 || layers > 4) throw ConfigError("layers must be in [1, 4]");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  classifier.validate();
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "beta1") beta1 = parse_number<double>(key, value);
  else if (key == "beta2") beta2 = parse_number<double>(key, value);
  else if (key == "adam_eps") adam_eps = parse_number<double>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "denoise") denoise = parse_bool(key, value);
  else if (key == "denoise_scope") {
    if (value == "fold") denoise_scope = DenoiseScope::fold;
    else if (value == "global") denoise_scope = DenoiseScope::global;
    else throw ConfigError("invalid denoise_scope '" + value + "' (expected fold or global)");
  } else if (key == "cl_folds") cl_folds = parse_number<int>(key, value);
  else if (key == "threshold_mode") threshold_mode = parse_threshold_mode(value);
  else if (key == "classifier") classifier.kind = parse_classifier_kind(value);
  else if (key == "lr_l2") classifier.l2 = parse_number<double>(key, value);
  else if (key == "lr_iterations") classifier.iterations = parse_number<int>(key, value);
  else if (key == "lr_learning_rate") classifier.learning_rate = parse_number<double>(key, value);
  else if (key == "knn_k") classifier.k = parse_number<int>(key, value);
  else if (key == "classifier_features") {
    if (value == "embedding") classifier_features = ClassifierFeatures::embedding;
    else if (value == "bag_of_words") classifier_features = ClassifierFeatures::bag_of_words;
    else throw ConfigError("invalid classifier_features '" + value + "'");
  } else if (key == "bow_dim") bow_dim = parse_number<int>(key, value);
  else if (key == "embedding_dim") embedding_dim = parse_number<int>(key, value);
  else if (key == "edge_weight") edge_weight = parse_number<double>(key, value);
  else if (key == "layers") layers = parse_number<int>(key, value);
  else if (key == "hidden_dim") hidden_dim = parse_number<int>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string TrainConfig::canonical() const {
  std::map<std::string, std::string> kv = {
      {"learning_rate", format_double(learning_rate)},
      {"epochs", std::to_string(epochs)},
      {"beta1", format_double(beta1)},
      {"beta2", format_double(beta2)},
      {"adam_eps", format_double(adam_eps)},
      {"seed", std::to_string(seed)},
      {"denoise", denoise ? "on" : "off"},
      {"denoise_scope", to_string(denoise_scope)},
      {"cl_folds", std::to_string(cl_folds)},
      {"threshold_mode", to_string(threshold_mode)},
      {"classifier", to_string(classifier.kind)},
      {"lr_l2", format_double(classifier.l2)},
      {"lr_iterations", std::to_string(classifier.iterations)},
      {"lr_learning_rate", format_double(classifier.learning_rate)},
      {"knn_k", std::to_string(classifier.k)},
      {"classifier_features", to_string(classifier_features)},
      {"bow_dim", std::to_string(bow_dim)},
      {"embedding_dim", std::to_string(embedding_dim)},
      {"edge_weight", format_double(edge_weight)},
      {"layers", std::to_string(layers)},
      {"hidden_dim", std::to_string(hidden_dim)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(canonical(), 0xcbf29ce484222325ULL); }

TrainConfig parse_config(std::istream& in, const std::string& source_name, std::set<std::string>* keys_seen) {
  TrainConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      const std::string key = trim(line.substr(0, eq));
      config.set(key, trim(line.substr(eq + 1)));
      if (keys_seen) keys_seen->insert(key);
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& path, std::set<std::string>* keys_seen) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string(), keys_seen);
}

}  // namespace bichunter
