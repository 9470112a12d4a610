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

#ifndef SND_HARNESS_EXPERIMENTS_HPP_
#define SND_HARNESS_EXPERIMENTS_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "snd/classifier.hpp"
#include "snd/denoiser.hpp"
#include "snd/dx_privacy.hpp"
#include "snd/harness/config.hpp"
#include "snd/harness/corpus.hpp"
#include "snd/harness/report.hpp"
#include "snd/privacy_eval.hpp"
#include "snd/protocol/client.hpp"
#include "snd/protocol/server.hpp"
#include "snd/split_model.hpp"

namespace snd {

// Stable 64-bit hash, used to derive random streams from names.
inline std::uint64_t Fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t EtaStream(double eta) { return Rng::SplitMix(std::bit_cast<std::uint64_t>(eta)); }

inline std::string EtaListKey(const std::vector<double>& etas) {
  std::string key;
  for (double e : etas) key += FormatEta(e) + ";";
  return key;
}

// Stream ids under a world's root generator.
namespace stream {
inline constexpr std::uint64_t kModel = 1;
inline constexpr std::uint64_t kPlant = 2;
inline constexpr std::uint64_t kPublic = 3;
inline constexpr std::uint64_t kValidation = 4;
inline constexpr std::uint64_t kTaskTrain = 5;
inline constexpr std::uint64_t kTaskTest = 6;
inline constexpr std::uint64_t kPlan = 7;
inline constexpr std::uint64_t kTrainPairs = 8;
inline constexpr std::uint64_t kValidationPairs = 9;
inline constexpr std::uint64_t kTaskNoise = 10;
inline constexpr std::uint64_t kDenoiserInit = 11;
inline constexpr std::uint64_t kClassifier = 12;
inline constexpr std::uint64_t kDrift = 13;
inline constexpr std::uint64_t kFresh = 14;
inline constexpr std::uint64_t kAttack = 15;
inline constexpr std::uint64_t kMutualInformation = 16;
inline constexpr std::uint64_t kGeometry = 17;
}  // namespace stream

inline CorpusSpec MakeCorpusSpec(const ExperimentConfig& c, std::size_t size) {
  CorpusSpec s;
  s.vocab_size = c.vocab_size;
  s.length = c.seq_length;
  s.size = size;
  s.zipf_exponent = c.zipf_exponent;
  s.marker_count = c.marker_count;
  return s;
}

inline ToyModelConfig MakeModelConfig(const ExperimentConfig& c, std::uint64_t seed) {
  ToyModelConfig m;
  m.vocab_size = c.vocab_size;
  m.table_std = c.table_std;
  m.encoder = ToyServerEncoderConfig(c.dim);
  m.encoder.layers = c.encoder_layers;
  m.encoder.d_ff = c.encoder_d_ff;
  m.encoder.d_kv = c.encoder_d_kv;
  m.encoder.n_head = c.encoder_n_head;
  m.seed = seed;
  return m;
}

inline DenoiserConfig MakeDenoiserConfig(const ExperimentConfig& c, std::uint64_t seed) {
  DenoiserConfig d;
  d.d_model = c.dim;
  d.d_ff = c.denoiser_d_ff;
  d.d_kv = c.denoiser_d_kv;
  d.n_head = c.denoiser_n_head;
  d.layers = c.denoiser_layers;
  d.learning_rate = c.learning_rate;
  d.batch_size = c.batch_size;
  d.epochs = c.epochs;
  d.seed = seed;
  return d;
}

inline ClassifierConfig MakeClassifierConfig(const ExperimentConfig& c, std::uint64_t seed) {
  ClassifierConfig k;
  k.epochs = c.classifier_epochs;
  k.learning_rate = c.classifier_lr;
  k.seed = seed;
  return k;
}

// Everything one seed of an experiment shares: the toy model with its planted
// label direction, the corpora and the eta partition plan.
struct World {
  std::uint64_t seed = 0;
  ToyModel model;
  ClipBound bound;
  std::vector<TokenId> markers;
  LabeledCorpus public_corpus;
  LabeledCorpus validation_corpus;
  LabeledCorpus task_train;
  LabeledCorpus task_test;
  std::vector<PartitionPlanEntry> plan;
};

inline World BuildWorld(const ExperimentConfig& c, std::uint64_t seed) {
  Validate(c);
  const Rng root(seed);
  World w;
  w.seed = seed;
  Rng model_rng = root.Fork(stream::kModel);
  w.model = InitToyModel(MakeModelConfig(c, model_rng.NextU64()));
  w.markers = ChooseMarkers(MakeCorpusSpec(c, 1));
  Rng plant = root.Fork(stream::kPlant);
  PlantAttribute(w.model.table, w.markers, c.attribute_strength, plant);
  w.bound = ClipBound::FromVocabulary(w.model.table);
  auto corpus = [&](std::size_t size, std::uint64_t id) {
    Rng r = root.Fork(id);
    return GenerateCorpus(MakeCorpusSpec(c, size), r);
  };
  w.public_corpus = corpus(c.corpus_size, stream::kPublic);
  w.validation_corpus = corpus(c.validation_size, stream::kValidation);
  w.task_train = corpus(c.task_train_size, stream::kTaskTrain);
  w.task_test = corpus(c.task_test_size, stream::kTaskTest);
  Rng plan_rng = root.Fork(stream::kPlan);
  w.plan = PlanEtaPartitions(w.model.table, c.clip, plan_rng.NextU64());
  return w;
}

// Geometric centre of the middle partition.
inline double MidEta(const World& w) {
  const auto& r = w.plan.at(1).representatives;
  return std::sqrt(r[0] * r[1]);
}

// Lowest representative of the lowest partition.
inline double LowEta(const World& w) { return w.plan.at(0).representatives[0]; }

inline std::size_t PartitionIndex(const World& w, double eta) {
  for (std::size_t p = 0; p < w.plan.size(); ++p)
    if (eta > w.plan[p].low && eta <= w.plan[p].high) return p;
  throw Error(ErrorCode::kNoModel, "no partition covers eta " + FormatEta(eta));
}

// What the server returns for an upload: the encoder applied to the
// f32-rounded tokens, rounded again for the response.
inline Tensor WireEncode(const Tensor& x_tilde, const EncoderWeights& encoder) {
  return RoundToFloat32(Encode(RoundToFloat32(x_tilde), encoder).values);
}

// One seed's experiment state. Training pairs, validation pairs and trained
// denoisers are cached by their inputs, so scenarios that need the same
// model train it once.
class Lab {
 public:
  Lab(const ExperimentConfig& config, std::uint64_t seed)
      : config_(config), world_(BuildWorld(config, seed)), root_(seed) {}

  const ExperimentConfig& config() const { return config_; }
  const World& world() const { return world_; }
  const EncoderWeights& encoder() const { return world_.model.encoder; }

  // Noise draws depend on the eta list and the stream only, so clipped and
  // unclipped pairs, or pairs under two encoders, see identical noise.
  std::vector<DenoiseExample> MakePairs(const Corpus& corpus, const std::vector<double>& etas,
                                        bool clip, const EncoderWeights& encoder,
                                        std::uint64_t stream_id) const {
    PairOptions o;
    o.etas = etas;
    o.clip = clip;
    o.samples_per_sequence = config_.samples_per_sequence;
    o.wire_rounding = config_.wire_rounding;
    Rng rng = root_.Fork(stream_id).Fork(Fnv1a(EtaListKey(etas)));
    return GenerateTrainingPairs(corpus, world_.model.table, encoder, o, rng);
  }

  const std::vector<DenoiseExample>& TrainPairs(const std::vector<double>& etas, bool clip) {
    const std::string key = EtaListKey(etas) + (clip ? "c" : "u");
    auto it = train_pairs_.find(key);
    if (it == train_pairs_.end())
      it = train_pairs_
               .emplace(key, MakePairs(world_.public_corpus.sequences, etas, clip, encoder(),
                                       stream::kTrainPairs))
               .first;
    return it->second;
  }

  const std::vector<DenoiseExample>& ValidationPairs(const std::vector<double>& etas, bool clip) {
    const std::string key = EtaListKey(etas) + (clip ? "c" : "u");
    auto it = validation_pairs_.find(key);
    if (it == validation_pairs_.end())
      it = validation_pairs_
               .emplace(key, MakePairs(world_.validation_corpus.sequences, etas, clip, encoder(),
                                       stream::kValidationPairs))
               .first;
    return it->second;
  }

  DenoiserConfig DenoiserSettings(bool noise_aware) const {
    Rng r = root_.Fork(stream::kDenoiserInit);
    DenoiserConfig d = MakeDenoiserConfig(config_, r.NextU64());
    d.noise_aware = noise_aware;
    return d;
  }

  // Denoiser trained on pairs drawn at `etas`.
  const TrainingResult& Train(const std::vector<double>& etas, bool clip, bool noise_aware) {
    // Without noise, clipping never triggers: both arms share one model.
    bool any_noise = false;
    for (double e : etas) any_noise = any_noise || !IsInfiniteEta(e);
    if (!any_noise) clip = false;
    const std::string key = EtaListKey(etas) + (clip ? "c" : "u") + (noise_aware ? "a" : "s");
    auto it = models_.find(key);
    if (it == models_.end()) {
      auto result = std::make_unique<TrainingResult>(
          TrainDenoiser(TrainPairs(etas, clip), ValidationPairs(etas, clip), DenoiserSettings(noise_aware)));
      it = models_.emplace(key, std::move(result)).first;
    }
    return *it->second;
  }

  // The client denoiser serving `eta`, trained on its partition's
  // representatives.
  const DenoiserWeights& PartitionDenoiser(double eta) {
    const auto& reps = world_.plan[PartitionIndex(world_, eta)].representatives;
    return Train({reps[0], reps[1]}, config_.clip, true).weights;
  }

  EtaPartitionRegistry BuildRegistry() {
    EtaPartitionRegistry registry;
    for (const auto& p : world_.plan) {
      EtaPartition part;
      part.low = p.low;
      part.high = p.high;
      part.representatives = p.representatives;
      part.weights = Train({p.representatives[0], p.representatives[1]}, config_.clip, true).weights;
      registry.Add(std::move(part));
    }
    return registry;
  }

  const std::vector<Tensor>& CleanEmbeddings(bool test_split) {
    auto& cache = clean_[test_split ? 1 : 0];
    if (cache.empty()) {
      for (const auto& ids : Split(test_split).sequences)
        cache.push_back(Encode(EmbedTokens(ids, world_.model.table), encoder()).values);
    }
    return cache;
  }

  const LabeledCorpus& Split(bool test_split) const {
    return test_split ? world_.task_test : world_.task_train;
  }

  // Noise stream for task sequence i at one eta; shared by every method so
  // comparisons are paired.
  Rng TaskNoise(double eta, bool test_split, std::size_t i) const {
    return root_.Fork(stream::kTaskNoise).Fork(EtaStream(eta)).Fork((test_split ? 1ULL << 32 : 0) + i);
  }

  ClassifierConfig ClassifierSettings() const {
    Rng r = root_.Fork(stream::kClassifier);
    return MakeClassifierConfig(config_, r.NextU64());
  }

  const Rng& root() const { return root_; }

 private:
  ExperimentConfig config_;
  World world_;
  Rng root_;
  std::map<std::string, std::vector<DenoiseExample>> train_pairs_;
  std::map<std::string, std::vector<DenoiseExample>> validation_pairs_;
  std::map<std::string, std::unique_ptr<TrainingResult>> models_;
  std::vector<Tensor> clean_[2];
};

// ---------------------------------------------------------------------------
// Downstream evaluation on the synthetic task.

// Maps (tokens, test_split, index) to the sentence embedding a method hands
// to the downstream classifier.
using EmbeddingMethod = std::function<Tensor(const std::vector<TokenId>&, bool, std::size_t)>;

struct MethodScores {
  double accuracy = 0.0;
  double auc = 0.0;
  double mse = 0.0;  // test split, against the clean embedding
  double cos = 0.0;
};

inline MethodScores ScoreMethod(Lab& lab, const EmbeddingMethod& method) {
  std::vector<Tensor> split[2];
  for (int t = 0; t < 2; ++t) {
    const Corpus& seqs = lab.Split(t == 1).sequences;
    split[t].reserve(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) split[t].push_back(method(seqs[i], t == 1, i));
  }
  MethodScores s;
  const DownstreamScores d = EvalDownstream(StackRows(split[0]), lab.Split(false).labels,
                                            StackRows(split[1]), lab.Split(true).labels,
                                            lab.ClassifierSettings());
  s.accuracy = d.accuracy;
  s.auc = d.auc;
  const auto& clean = lab.CleanEmbeddings(true);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    s.mse += MeanSquaredError(split[1][i].data(), clean[i].data());
    s.cos += CosineSimilarity(split[1][i].data(), clean[i].data());
  }
  s.mse /= static_cast<double>(clean.size());
  s.cos /= static_cast<double>(clean.size());
  return s;
}

inline void AddScores(Report& report, const std::string& scenario, const std::string& method,
                      double eta, std::uint64_t seed, const MethodScores& s) {
  report.Add(scenario, method, eta, seed, "acc", s.accuracy);
  report.Add(scenario, method, eta, seed, "auc", s.auc);
  report.Add(scenario, method, eta, seed, "mse", s.mse);
  report.Add(scenario, method, eta, seed, "cos", s.cos);
}

// Clipped privatization, local encode as the server would (wire rounding
// per config), optional denoising with `denoiser`.
inline EmbeddingMethod LocalPipeline(Lab& lab, double eta, bool clip, const DenoiserWeights* denoiser) {
  return [&lab, eta, clip, denoiser](const std::vector<TokenId>& ids, bool test, std::size_t i) {
    const World& w = lab.world();
    const Tensor x = EmbedTokens(ids, w.model.table);
    Rng rng = lab.TaskNoise(eta, test, i);
    const PrivatizedTokens p = PrivatizeTokens(x, PrivacyParams{eta, clip}, w.bound, rng);
    const Tensor e_n = lab.config().wire_rounding ? WireEncode(p.x_tilde, lab.encoder())
                                                  : Encode(p.x_tilde, lab.encoder()).values;
    if (denoiser == nullptr) return e_n;
    return Denoise(*denoiser, e_n, p.x_tilde, p.noise).values;
  };
}

inline EmbeddingMethod CleanPipeline(Lab& lab) {
  return [&lab](const std::vector<TokenId>&, bool test, std::size_t i) {
    return lab.CleanEmbeddings(test)[i];
  };
}

// ---------------------------------------------------------------------------
// Eta sweep: every method goes through the wire protocol.

inline const std::vector<std::string>& SweepMethods() {
  static const std::vector<std::string> m = {"snd", "tok_emb_priv", "text2text", "no_noise"};
  return m;
}

inline std::string ScenarioName(const ExperimentConfig& c, const std::string& fallback) {
  return c.scenario.empty() ? fallback : c.scenario;
}

inline void SweepSeed(Lab& lab, Report& report, const std::string& scenario) {
  const ExperimentConfig& c = lab.config();
  const World& w = lab.world();
  const EmbeddingServer server(lab.encoder());
  for (double eta : c.etas) {
    for (const std::string& method : c.methods) {
      InProcessTransport transport([&server](std::span<const std::uint8_t> b) { return server.Handle(b); });
      Session session(transport, w.seed);
      std::uint64_t requests = 0;
      const DenoiserWeights* denoiser = method == "snd" ? &lab.PartitionDenoiser(eta) : nullptr;
      EmbeddingMethod embed = [&](const std::vector<TokenId>& ids, bool test, std::size_t i) -> Tensor {
        const Tensor x = EmbedTokens(ids, w.model.table);
        Rng rng = lab.TaskNoise(eta, test, i);
        ++requests;
        if (method == "snd") {
          const PrivatizedTokens p = PrivatizeTokens(x, PrivacyParams{eta, c.clip}, w.bound, rng);
          const Tensor e_n = ClientRequest(p.x_tilde, session).values;
          return Denoise(*denoiser, e_n, p.x_tilde, p.noise).values;
        }
        if (method == "tok_emb_priv") return ClientRequest(TokEmbPrivBaseline(x, eta, rng), session).values;
        if (method == "text2text") {
          const std::vector<TokenId> snapped = Text2TextPrivatize(x, w.model.table, eta, rng);
          return ClientRequest(EmbedTokens(snapped, w.model.table), session).values;
        }
        return ClientRequest(x, session).values;  // no_noise
      };
      const MethodScores s = ScoreMethod(lab, embed);
      AddScores(report, scenario, method, eta, w.seed, s);
      const double overhead = static_cast<double>(kFrameHeaderBytes + kFrameCrcBytes);
      const double n = static_cast<double>(requests);
      report.Add(scenario, method, eta, w.seed, "bytes_up",
                 static_cast<double>(transport.bytes_sent()) / n - overhead);
      report.Add(scenario, method, eta, w.seed, "bytes_down",
                 static_cast<double>(transport.bytes_received()) / n - overhead);
    }
  }
}

inline Report EtaSweep(const ExperimentConfig& c) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "sweep");
  for (std::uint64_t seed : c.seeds) {
    Lab lab(c, seed);
    SweepSeed(lab, report, scenario);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ablations.

inline double ServerAblationEta(const ExperimentConfig& c, const World& w) {
  return c.ablation_eta > 0 ? c.ablation_eta : MidEta(w);
}

inline double ClippingAblationEta(const ExperimentConfig& c, const World& w) {
  return c.ablation_eta > 0 ? c.ablation_eta : LowEta(w);
}

// Client denoiser versus a capacity-matched model that never sees the noise
// block, versus no denoising. Validation MSE/COS on held-out public pairs;
// accuracy/AUC on the task. The clean row is the no-noise reference.
inline void ServerAblationSeed(Lab& lab, Report& report, const std::string& scenario, bool downstream = true) {
  const ExperimentConfig& c = lab.config();
  const World& w = lab.world();
  const double eta = ServerAblationEta(c, w);
  const auto& reps = w.plan[PartitionIndex(w, eta)].representatives;
  const DenoiserWeights& client = lab.Train({reps[0], reps[1]}, c.clip, true).weights;
  const DenoiserWeights& server = lab.Train({reps[0], reps[1]}, c.clip, false).weights;
  const auto& val = lab.ValidationPairs({eta}, c.clip);
  const DenoiseMetrics mc = EvaluateDenoiser(client, val);
  const DenoiseMetrics ms = EvaluateDenoiser(server, val);
  struct Arm {
    const char* name;
    double mse, cos;
    const DenoiserWeights* model;
  };
  const Arm arms[] = {{"snd", mc.mse_denoised, mc.cos_denoised, &client},
                      {"server_denoise", ms.mse_denoised, ms.cos_denoised, &server},
                      {"no_denoise", mc.mse_noisy, mc.cos_noisy, nullptr}};
  for (const Arm& a : arms) {
    report.Add(scenario, a.name, eta, w.seed, "mse", a.mse);
    report.Add(scenario, a.name, eta, w.seed, "cos", a.cos);
    if (downstream) {
      const MethodScores s = ScoreMethod(lab, LocalPipeline(lab, eta, c.clip, a.model));
      report.Add(scenario, a.name, eta, w.seed, "acc", s.accuracy);
      report.Add(scenario, a.name, eta, w.seed, "auc", s.auc);
    }
  }
  if (downstream) {
    const MethodScores s = ScoreMethod(lab, CleanPipeline(lab));
    report.Add(scenario, "clean", eta, w.seed, "acc", s.accuracy);
    report.Add(scenario, "clean", eta, w.seed, "auc", s.auc);
  }
}

inline Report AblationServerDenoise(const ExperimentConfig& c) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "ablate_server_denoise");
  for (std::uint64_t seed : c.seeds) {
    Lab lab(c, seed);
    ServerAblationSeed(lab, report, scenario);
  }
  return report;
}

// Clipped and unclipped arms, each with a denoiser trained on pairs drawn at
// exactly the evaluated eta under that arm's clipping. Evaluated at the low
// eta and at the infinite-eta control.
inline void ClippingAblationSeed(Lab& lab, Report& report, const std::string& scenario,
                                 const std::vector<double>& etas, bool downstream = true) {
  const World& w = lab.world();
  for (double eta : etas) {
    for (bool clip : {true, false}) {
      const char* name = clip ? "clipped" : "unclipped";
      const DenoiserWeights& model = lab.Train({eta}, clip, true).weights;
      const DenoiseMetrics m = EvaluateDenoiser(model, lab.ValidationPairs({eta}, clip));
      report.Add(scenario, name, eta, w.seed, "mse", m.mse_denoised);
      report.Add(scenario, name, eta, w.seed, "cos", m.cos_denoised);
      if (downstream) {
        const MethodScores s = ScoreMethod(lab, LocalPipeline(lab, eta, clip, &model));
        report.Add(scenario, name, eta, w.seed, "acc", s.accuracy);
        report.Add(scenario, name, eta, w.seed, "auc", s.auc);
      }
    }
  }
}

inline Report AblationClipping(const ExperimentConfig& c) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "ablate_clipping");
  for (std::uint64_t seed : c.seeds) {
    Lab lab(c, seed);
    ClippingAblationSeed(lab, report, scenario, {ClippingAblationEta(c, lab.world()), kInfiniteEta});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Model-update drill.

struct DrillResult {
  double eta = 0.0;
  DenoiseMetrics pre_update;
  DenoiseMetrics post_update;
  DenoiseMetrics finetuned;
  DenoiseMetrics control;
};

// The server swaps in a perturbed encoder. The client's denoiser is scored
// on validation pairs from the old and new encoders (identical noise), then
// fine-tuned on a small fresh corpus embedded by the new encoder.
inline DrillResult RunDrill(Lab& lab) {
  const ExperimentConfig& c = lab.config();
  const World& w = lab.world();
  DrillResult r;
  r.eta = ServerAblationEta(c, w);
  const auto& reps = w.plan[PartitionIndex(w, r.eta)].representatives;
  const std::vector<double> train_etas = {reps[0], reps[1]};
  const DenoiserWeights& base = lab.Train(train_etas, c.clip, true).weights;

  Rng drift_rng = lab.root().Fork(stream::kDrift);
  const EncoderWeights updated = PerturbEncoder(lab.encoder(), c.drift, drift_rng);
  const auto& val_before = lab.ValidationPairs({r.eta}, c.clip);
  const auto val_after =
      lab.MakePairs(w.validation_corpus.sequences, {r.eta}, c.clip, updated, stream::kValidationPairs);
  r.pre_update = EvaluateDenoiser(base, val_before);
  r.post_update = EvaluateDenoiser(base, val_after);
  r.control = EvaluateDenoiser(base, lab.ValidationPairs({r.eta}, c.clip));

  const auto fresh_size = static_cast<std::size_t>(std::llround(c.finetune_fraction * c.corpus_size));
  Require(fresh_size >= 1, ErrorCode::kInvalidArgument, "finetune_fraction leaves no fresh data");
  Rng fresh_rng = lab.root().Fork(stream::kFresh);
  const LabeledCorpus fresh = GenerateCorpus(MakeCorpusSpec(c, fresh_size), fresh_rng);
  const auto fresh_pairs = lab.MakePairs(fresh.sequences, train_etas, c.clip, updated, stream::kFresh);
  DenoiserConfig tune = base.config;
  tune.epochs = c.finetune_epochs;
  tune.learning_rate = c.finetune_lr;
  tune.batch_size = c.finetune_batch_size;
  r.finetuned = EvaluateDenoiser(TrainDenoiser(fresh_pairs, {}, tune, &base).weights, val_after);
  return r;
}

inline Report ModelUpdateDrill(const ExperimentConfig& c) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "update_drill");
  for (std::uint64_t seed : c.seeds) {
    Lab lab(c, seed);
    const DrillResult r = RunDrill(lab);
    const std::pair<const char*, const DenoiseMetrics*> arms[] = {{"pre_update", &r.pre_update},
                                                                  {"post_update", &r.post_update},
                                                                  {"finetuned", &r.finetuned},
                                                                  {"no_update_control", &r.control}};
    for (const auto& [name, m] : arms) {
      report.Add(scenario, name, r.eta, seed, "mse", m->mse_denoised);
      report.Add(scenario, name, r.eta, seed, "cos", m->cos_denoised);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Privacy measurements.

inline Report MutualInformationScenario(const ExperimentConfig& c) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "mi");
  for (std::uint64_t seed : c.seeds) {
    const World w = BuildWorld(c, seed);
    for (double eta : c.etas) {
      // Noise-free tokens carry unbounded information about the input.
      if (IsInfiniteEta(eta)) {
        report.Add(scenario, "dx_privacy", eta, seed, "mi", kInfiniteEta);
        continue;
      }
      Rng rng = Rng(seed).Fork(stream::kMutualInformation).Fork(EtaStream(eta));
      const MIEstimate mi = VocabularyMutualInformation(w.model.table, eta, c.mi_samples, c.mi_k, rng);
      report.Add(scenario, "dx_privacy", eta, seed, "mi", mi.value);
    }
  }
  return report;
}

inline Report InversionScenario(const ExperimentConfig& c) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "attack_inversion");
  for (std::uint64_t seed : c.seeds) {
    const World w = BuildWorld(c, seed);
    for (double eta : c.etas) {
      Rng rng = Rng(seed).Fork(stream::kAttack).Fork(EtaStream(eta));
      std::vector<TokenId> truth(c.attack_samples);
      for (auto& t : truth) t = static_cast<TokenId>(rng.Index(c.vocab_size));
      const Tensor x = EmbedTokens(truth, w.model.table);
      const Tensor xt = PrivatizeTokens(x, PrivacyParams{eta, c.clip}, w.bound, rng).x_tilde;
      report.Add(scenario, "inversion", eta, seed, "attack_acc", InversionAttack(xt, w.model.table, truth).accuracy);
    }
  }
  return report;
}

// Classifier on mean-pooled privatized tokens predicting the task label.
inline Report AttributeScenario(const ExperimentConfig& c) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "attack_attribute");
  for (std::uint64_t seed : c.seeds) {
    Lab lab(c, seed);
    const World& w = lab.world();
    for (double eta : c.etas) {
      LabeledRepresentations split[2];
      for (int t = 0; t < 2; ++t) {
        const LabeledCorpus& corpus = lab.Split(t == 1);
        split[t].labels = corpus.labels;
        for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
          Rng rng = lab.TaskNoise(eta, t == 1, i);
          const Tensor x = EmbedTokens(corpus.sequences[i], w.model.table);
          split[t].token_matrices.push_back(PrivatizeTokens(x, PrivacyParams{eta, c.clip}, w.bound, rng).x_tilde);
        }
      }
      const AttackReport a = AttributeInference(split[0], split[1], lab.ClassifierSettings());
      report.Add(scenario, "attribute", eta, seed, "attack_acc", a.accuracy);
      report.Add(scenario, "attribute", eta, seed, "auc", a.auc);
    }
  }
  return report;
}

// Vocabulary geometry per eta. Distances have no column in the row schema
// and go to the summary extras; the inversion rate is reported as a row.
inline Report GeometryScenario(const ExperimentConfig& c) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "geometry");
  nlohmann::json entries = nlohmann::json::array();
  for (std::uint64_t seed : c.seeds) {
    const World w = BuildWorld(c, seed);
    for (double eta : c.etas) {
      Rng rng = Rng(seed).Fork(stream::kGeometry).Fork(EtaStream(eta));
      GeometryOptions o;
      o.k = c.geometry_k;
      o.sample_count = std::min(c.geometry_samples, c.vocab_size);
      o.noise_draws = c.geometry_draws;
      const GeometryReport g = GeometryMetrics(w.model.table, eta, o, rng);
      entries.push_back({{"eta", FormatEta(eta)},
                         {"seed", seed},
                         {"k", g.k},
                         {"mean_knn_distance", g.mean_knn_distance},
                         {"mean_perturbation_distance",
                          IsInfiniteEta(eta) ? nlohmann::json(0.0) : nlohmann::json(g.mean_perturbation_distance)}});
    }
  }
  ExperimentConfig inv = c;
  inv.scenario = scenario;
  report.Append(InversionScenario(inv));
  report.SetExtra(scenario, "geometry", entries);
  return report;
}

// ---------------------------------------------------------------------------
// Corpus similarity.

// Spearman's rho between the two corpora's token frequencies over the F
// most frequent shared tokens (pooled counts, ties to the lower id).
inline double CorpusSimilarity(const Corpus& a, const Corpus& b, std::size_t max_features = 5000) {
  Require(!a.empty() && !b.empty(), ErrorCode::kEmptyInput, "both corpora must be nonempty");
  std::map<TokenId, std::pair<double, double>> counts;
  for (const auto& s : a)
    for (TokenId t : s) counts[t].first += 1;
  for (const auto& s : b)
    for (TokenId t : s) counts[t].second += 1;
  std::vector<std::pair<TokenId, std::pair<double, double>>> shared;
  for (const auto& kv : counts)
    if (kv.second.first > 0 && kv.second.second > 0) shared.push_back(kv);
  Require(shared.size() >= 2, ErrorCode::kInvalidArgument, "fewer than two shared features");
  std::stable_sort(shared.begin(), shared.end(), [](const auto& x, const auto& y) {
    return x.second.first + x.second.second > y.second.first + y.second.second;
  });
  shared.resize(std::min(shared.size(), max_features));
  std::vector<double> fa, fb;
  for (const auto& [id, c] : shared) {
    fa.push_back(c.first);
    fb.push_back(c.second);
  }
  const std::vector<double> ra = AverageRanks(fa), rb = AverageRanks(fb);
  const double n = static_cast<double>(ra.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i] / n;
    mb += rb[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  Require(saa > 0 && sbb > 0, ErrorCode::kInvalidArgument, "constant frequencies; rank correlation undefined");
  return sab / std::sqrt(saa * sbb);
}

// Two synthetic corpora (exponents zipf_exponent and similarity_zipf_b),
// unless the caller supplies its own.
inline Report SimilarityScenario(const ExperimentConfig& c, const Corpus* a = nullptr,
                                 const Corpus* b = nullptr) {
  Validate(c);
  Report report;
  const std::string scenario = ScenarioName(c, "similarity");
  nlohmann::json entries = nlohmann::json::array();
  for (std::uint64_t seed : c.seeds) {
    Corpus ca, cb;
    if (a != nullptr && b != nullptr) {
      ca = *a;
      cb = *b;
    } else {
      Rng ra = Rng(seed).Fork(stream::kPublic);
      Rng rb = Rng(seed).Fork(stream::kValidation);
      ca = GenerateCorpus(MakeCorpusSpec(c, c.corpus_size), ra).sequences;
      CorpusSpec sb = MakeCorpusSpec(c, c.corpus_size);
      sb.zipf_exponent = c.similarity_zipf_b;
      cb = GenerateCorpus(sb, rb).sequences;
    }
    entries.push_back({{"seed", seed}, {"spearman_rho", CorpusSimilarity(ca, cb, c.similarity_features)}});
  }
  report.SetExtra(scenario, "similarity", entries);
  return report;
}

}  // namespace snd

#endif  // SND_HARNESS_EXPERIMENTS_HPP_
