// Copyright 2026 The snd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef SND_HARNESS_CONFIG_HPP_
#define SND_HARNESS_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "snd/denoiser.hpp"

namespace snd {

// Bad config files, keys or values; the CLI maps these to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string scenario;  // empty: the subcommand name

  // Synthetic corpus and vocabulary.
  std::size_t vocab_size = 1000;
  std::size_t dim = 32;
  std::size_t seq_length = 16;
  std::size_t corpus_size = 2000;
  std::size_t validation_size = 300;
  std::size_t task_train_size = 1000;
  std::size_t task_test_size = 500;
  double zipf_exponent = 1.1;
  std::size_t marker_count = 50;
  double attribute_strength = 8.0;
  double table_std = 1.0;

  // Frozen server encoder.
  std::size_t encoder_layers = 2;
  std::size_t encoder_d_ff = 64;
  std::size_t encoder_d_kv = 8;
  std::size_t encoder_n_head = 4;

  // Denoiser.
  std::size_t denoiser_layers = 2;
  std::size_t denoiser_d_ff = 64;
  std::size_t denoiser_d_kv = 8;
  std::size_t denoiser_n_head = 4;
  std::size_t epochs = 2;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::size_t samples_per_sequence = 1;
  bool clip = true;
  bool wire_rounding = true;

  // Sweep axes.
  std::vector<double> etas = {1.0, 3.0, 10.0, 30.0, kInfiniteEta};
  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> methods = {"snd", "tok_emb_priv", "text2text", "no_noise"};

  // Downstream classifier.
  std::size_t classifier_epochs = 300;
  double classifier_lr = 1e-2;

  // Privacy measurements.
  std::size_t mi_samples = 2000;
  std::size_t mi_k = 3;
  std::size_t attack_samples = 2000;
  std::size_t geometry_k = 1;
  std::size_t geometry_samples = 1000;
  std::size_t geometry_draws = 10000;

  // Ablations; 0 picks the default level from the partition plan.
  double ablation_eta = 0.0;

  // Model-update drill.
  double drift = 0.15;
  double finetune_fraction = 0.1;
  std::size_t finetune_epochs = 1;
  double finetune_lr = 1e-3;
  std::size_t finetune_batch_size = 4;

  // Corpus similarity: second corpus differs in exponent and seed.
  double similarity_zipf_b = 1.1;
  std::size_t similarity_features = 5000;

  // Files and endpoints.
  std::string output = "report.csv";
  std::string summary;  // defaults to output + ".json"
  std::string model_path;
  std::string registry_dir;
  std::string endpoint;

  std::string SummaryPath() const { return summary.empty() ? output + ".json" : summary; }
};

namespace config_detail {

inline std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::size_t ParseSize(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || v[0] == '-')
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

inline double ParseDouble(const std::string& key, const std::string& v) {
  try {
    return ParseEta(v);
  } catch (const Error&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

struct KeyInfo {
  Setter set;
  std::string help;
};

#define SND_SIZE_KEY(name, help) \
  {#name, {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.name = ParseSize(k, v); }, help}}
#define SND_DOUBLE_KEY(name, help) \
  {#name, {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.name = ParseDouble(k, v); }, help}}
#define SND_BOOL_KEY(name, help) \
  {#name, {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.name = ParseBool(k, v); }, help}}
#define SND_STRING_KEY(name, help) \
  {#name, {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.name = v; }, help}}

inline const std::map<std::string, KeyInfo>& Keys() {
  static const std::map<std::string, KeyInfo> keys = {
      SND_STRING_KEY(scenario, "label for the scenario column (default: the subcommand)"),
      SND_SIZE_KEY(vocab_size, "vocabulary size |V|"),
      SND_SIZE_KEY(dim, "token / embedding width d"),
      SND_SIZE_KEY(seq_length, "tokens per synthetic sequence"),
      SND_SIZE_KEY(corpus_size, "public sequences used to train a denoiser"),
      SND_SIZE_KEY(validation_size, "public sequences held out per eta for validation"),
      SND_SIZE_KEY(task_train_size, "downstream training sequences"),
      SND_SIZE_KEY(task_test_size, "downstream test sequences"),
      SND_DOUBLE_KEY(zipf_exponent, "Zipf exponent of token frequencies"),
      SND_SIZE_KEY(marker_count, "size of the label-defining token set"),
      SND_DOUBLE_KEY(attribute_strength, "marker offset along the planted direction"),
      SND_DOUBLE_KEY(table_std, "stddev of vocabulary table entries"),
      SND_SIZE_KEY(encoder_layers, "server encoder blocks"),
      SND_SIZE_KEY(encoder_d_ff, "server encoder feed-forward width"),
      SND_SIZE_KEY(encoder_d_kv, "server encoder per-head width"),
      SND_SIZE_KEY(encoder_n_head, "server encoder heads"),
      SND_SIZE_KEY(denoiser_layers, "denoiser blocks L"),
      SND_SIZE_KEY(denoiser_d_ff, "denoiser feed-forward width"),
      SND_SIZE_KEY(denoiser_d_kv, "denoiser per-head width"),
      SND_SIZE_KEY(denoiser_n_head, "denoiser heads"),
      SND_SIZE_KEY(epochs, "denoiser training epochs"),
      SND_SIZE_KEY(batch_size, "denoiser minibatch size"),
      SND_DOUBLE_KEY(learning_rate, "denoiser Adam learning rate"),
      SND_SIZE_KEY(samples_per_sequence, "noise draws per public sequence"),
      SND_BOOL_KEY(clip, "clip privatized tokens to the vocabulary norm bound"),
      SND_BOOL_KEY(wire_rounding, "round uploads and responses to 32-bit floats in training pairs"),
      {"etas", {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                  c.etas.clear();
                  for (const auto& item : SplitList(v)) {
                    const double eta = ParseDouble(k, item);
                    if (!(eta > 0)) throw ConfigError("etas: values must be positive");
                    c.etas.push_back(eta);
                  }
                },
                "comma-separated privacy levels; 'inf' is the no-noise control"}},
      {"seeds", {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   c.seeds.clear();
                   for (const auto& item : SplitList(v)) c.seeds.push_back(ParseSize(k, item));
                 },
                 "comma-separated seeds"}},
      {"methods", {[](ExperimentConfig& c, const std::string&, const std::string& v) {
                     c.methods = SplitList(v);
                     for (const auto& m : c.methods)
                       if (m != "snd" && m != "tok_emb_priv" && m != "text2text" && m != "no_noise")
                         throw ConfigError("methods: unknown method '" + m + "'");
                   },
                   "subset of snd,tok_emb_priv,text2text,no_noise"}},
      SND_SIZE_KEY(classifier_epochs, "full-batch steps of the downstream MLP"),
      SND_DOUBLE_KEY(classifier_lr, "downstream MLP learning rate"),
      SND_SIZE_KEY(mi_samples, "sample count N for MI estimates"),
      SND_SIZE_KEY(mi_k, "neighbour order k for entropy / MI"),
      SND_SIZE_KEY(attack_samples, "tokens attacked per (eta, seed)"),
      SND_SIZE_KEY(geometry_k, "neighbour order for geometry metrics"),
      SND_SIZE_KEY(geometry_samples, "vocabulary rows sampled for geometry metrics"),
      SND_SIZE_KEY(geometry_draws, "noise draws for the perturbation distance"),
      SND_DOUBLE_KEY(ablation_eta, "privacy level for ablations and the drill; 0 = from the partition plan"),
      SND_DOUBLE_KEY(drift, "relative weight perturbation of the updated encoder"),
      SND_DOUBLE_KEY(finetune_fraction, "fresh data for denoiser finetuning, as a fraction of corpus_size"),
      SND_SIZE_KEY(finetune_epochs, "denoiser finetuning epochs"),
      SND_DOUBLE_KEY(finetune_lr, "denoiser finetuning learning rate"),
      SND_SIZE_KEY(finetune_batch_size, "denoiser finetuning minibatch size"),
      SND_DOUBLE_KEY(similarity_zipf_b, "Zipf exponent of the second corpus in the similarity scenario"),
      SND_SIZE_KEY(similarity_features, "feature cap F for corpus similarity"),
      SND_STRING_KEY(output, "CSV output path"),
      SND_STRING_KEY(summary, "JSON summary path (default: output + .json)"),
      SND_STRING_KEY(model_path, "toy model checkpoint (serve / infer / train-denoiser)"),
      SND_STRING_KEY(registry_dir, "denoiser registry directory"),
      SND_STRING_KEY(endpoint, "host:port of the embedding server"),
  };
  return keys;
}

#undef SND_SIZE_KEY
#undef SND_DOUBLE_KEY
#undef SND_BOOL_KEY
#undef SND_STRING_KEY

}  // namespace config_detail

inline void SetConfigValue(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& keys = config_detail::Keys();
  const auto it = keys.find(key);
  if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(config, key, config_detail::Trim(value));
}

// "key=value" override, as given to --set.
inline void ApplyOverride(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value, got '" + assignment + "'");
  SetConfigValue(config, config_detail::Trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline void Validate(const ExperimentConfig& c) {
  if (c.etas.empty()) throw ConfigError("etas must not be empty");
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (c.methods.empty()) throw ConfigError("methods must not be empty");
  if (c.vocab_size == 0 || c.dim == 0 || c.seq_length == 0)
    throw ConfigError("vocab_size, dim and seq_length must be positive");
  if (c.seq_length > kMaxSequenceLength) throw ConfigError("seq_length exceeds 512");
  if (c.marker_count == 0 || c.marker_count > c.vocab_size)
    throw ConfigError("marker_count must be within the vocabulary");
  if (c.encoder_n_head == 0 || c.denoiser_n_head == 0 || c.batch_size == 0 || c.finetune_batch_size == 0)
    throw ConfigError("head counts and batch_size must be positive");
}

// Plain text, one key=value per line; '#' starts a comment.
inline ExperimentConfig ParseConfig(const std::string& text, ExperimentConfig config = {}) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = config_detail::Trim(line);
    if (line.empty()) continue;
    try {
      ApplyOverride(config, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

inline ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return ParseConfig(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Key reference, one "key  help" line each, sorted.
inline std::string ConfigKeyReference() {
  std::string out;
  for (const auto& [key, info] : config_detail::Keys()) out += key + "  " + info.help + "\n";
  return out;
}

}  // namespace snd

#endif  // SND_HARNESS_CONFIG_HPP_
