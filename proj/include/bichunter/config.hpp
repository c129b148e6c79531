#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>

#include "bichunter/baseclf.hpp"
#include "bichunter/denoise.hpp"

namespace bichunter {

enum class DenoiseScope { fold, global };
/// Feature source for the denoiser's inner classifier.
enum class ClassifierFeatures { embedding, bag_of_words };

/// Every knob of a training run. Config files use `key = value` lines with
/// `#` comments; keys are the names printed by `canonical()`.
struct TrainConfig {
  double learning_rate = 5e-6;
  int epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  bool denoise = true;
  DenoiseScope denoise_scope = DenoiseScope::fold;
  int cl_folds = 5;
  ThresholdMode threshold_mode = ThresholdMode::class_conditional;
  ClassifierSpec classifier;
  ClassifierFeatures classifier_features = ClassifierFeatures::embedding;
  int bow_dim = 10000;

  int embedding_dim = 768;  // built-in hash embedder only
  double edge_weight = 1.0;
  int layers = 2;
  int hidden_dim = 256;

  void validate() const;
  /// Applies one `key = value` setting; throws ConfigError on unknown keys
  /// or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Sorted `key = value` lines; round-trips through parse_config.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// `keys_seen`, when given, receives every key the file sets.
TrainConfig parse_config(std::istream& in, const std::string& source_name = "<config>",
                         std::set<std::string>* keys_seen = nullptr);
TrainConfig load_config(const std::filesystem::path& path, std::set<std::string>* keys_seen = nullptr);

const char* to_string(DenoiseScope scope);
const char* to_string(ClassifierFeatures features);

}  // namespace bichunter
