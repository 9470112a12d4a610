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

#ifndef SND_HARNESS_CLI_HPP_
#define SND_HARNESS_CLI_HPP_

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "snd/harness/config.hpp"
#include "snd/harness/experiments.hpp"
#include "snd/harness/report.hpp"
#include "snd/protocol/tcp.hpp"

namespace snd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

namespace cli_detail {

// Options every scenario subcommand accepts.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::string output;
  std::string summary;
  std::vector<std::string> seeds;
  std::vector<std::string> etas;
};

inline void AddCommon(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config_path, "config file (key=value lines)");
  app->add_option("--set", o.sets, "override one config key, key=value (repeatable)");
  app->add_option("-o,--output", o.output, "CSV output path");
  app->add_option("--summary", o.summary, "JSON summary path");
  app->add_option("--seed", o.seeds, "seed(s), overriding the config list")->delimiter(',');
  app->add_option("--eta", o.etas, "privacy level(s), overriding the config list")->delimiter(',');
}

inline std::string Join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

inline ExperimentConfig Resolve(const CommonOptions& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : LoadConfig(o.config_path);
  for (const auto& s : o.sets) ApplyOverride(c, s);
  if (!o.output.empty()) c.output = o.output;
  if (!o.summary.empty()) c.summary = o.summary;
  if (!o.seeds.empty()) SetConfigValue(c, "seeds", Join(o.seeds));
  if (!o.etas.empty()) SetConfigValue(c, "etas", Join(o.etas));
  Validate(c);
  return c;
}

inline void WriteReport(const Report& report, const ExperimentConfig& c, std::ostream& out) {
  report.WriteCsv(c.output);
  report.WriteJson(c.SummaryPath());
  out << "wrote " << report.rows().size() << " rows to " << c.output << " and summary to "
      << c.SummaryPath() << "\n";
}

inline Corpus ReadCorpusFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file '" + path + "'");
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::vector<TokenId> seq;
    long long id = 0;
    while (fields >> id) {
      if (id < 0) throw ConfigError(path + ": token ids must be non-negative");
      seq.push_back(static_cast<TokenId>(id));
    }
    if (!fields.eof()) throw ConfigError(path + ": expected whitespace-separated token ids");
    if (!seq.empty()) corpus.push_back(std::move(seq));
  }
  return corpus;
}

inline std::atomic<bool>& StopRequested() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void OnSignal(int) { StopRequested() = true; }

inline std::string ManifestPath(const std::string& registry) {
  return std::filesystem::is_directory(registry) ? registry + "/manifest.txt" : registry;
}

// Trains one denoiser per eta partition for the first seed and saves the
// registry (and optionally the toy model the client and server share).
inline Report TrainDenoiserCommand(const ExperimentConfig& c, std::ostream& out) {
  if (c.registry_dir.empty()) throw ConfigError("train-denoiser needs --registry or registry_dir");
  Lab lab(c, c.seeds.front());
  const EtaPartitionRegistry registry = lab.BuildRegistry();
  std::filesystem::create_directories(c.registry_dir);
  SaveRegistry(registry, c.registry_dir);
  if (!c.model_path.empty()) SaveToyModel(lab.world().model, c.model_path);
  Report report;
  const std::string scenario = ScenarioName(c, "train_denoiser");
  for (const EtaPartition& p : registry.partitions()) {
    for (double eta : p.representatives) {
      const DenoiseMetrics m = EvaluateDenoiser(p.weights, lab.ValidationPairs({eta}, c.clip));
      report.Add(scenario, "snd", eta, c.seeds.front(), "mse", m.mse_denoised);
      report.Add(scenario, "snd", eta, c.seeds.front(), "cos", m.cos_denoised);
      report.Add(scenario, "no_denoise", eta, c.seeds.front(), "mse", m.mse_noisy);
      report.Add(scenario, "no_denoise", eta, c.seeds.front(), "cos", m.cos_noisy);
    }
    out << "partition (" << FormatEta(p.low) << ", " << FormatEta(p.high) << "] trained\n";
  }
  out << "registry saved to " << c.registry_dir << "/manifest.txt\n";
  return report;
}

inline int ServeCommand(const ExperimentConfig& c, const std::string& endpoint_flag, long duration_ms,
                        std::ostream& out) {
  if (c.model_path.empty()) throw ConfigError("serve needs --model or model_path");
  const ToyModel model = LoadToyModel(c.model_path);
  const EmbeddingServer server(model.encoder);
  const std::string spec = !endpoint_flag.empty() ? endpoint_flag : (!c.endpoint.empty() ? c.endpoint : "127.0.0.1:0");
  Endpoint bind_to;
  try {
    bind_to = ParseEndpoint(spec);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  TcpServer tcp([&server](std::span<const std::uint8_t> b) { return server.Handle(b); }, bind_to);
  out << "listening on " << tcp.endpoint().ToString() << std::endl;
  StopRequested() = false;
  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  const auto start = std::chrono::steady_clock::now();
  while (!StopRequested()) {
    if (duration_ms > 0 && std::chrono::steady_clock::now() - start >= std::chrono::milliseconds(duration_ms)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  tcp.Stop();
  std::signal(SIGINT, SIG_DFL);
  std::signal(SIGTERM, SIG_DFL);
  return kExitOk;
}

// Client side over TCP: privatize, upload, denoise with the registry model.
// With explicit tokens prints e_d; otherwise scores `count` synthetic
// sequences against locally computed clean embeddings.
inline Report InferCommand(ExperimentConfig c, const std::string& endpoint_flag, const std::string& registry,
                           const std::string& tokens, std::size_t count, std::ostream& out) {
  if (c.model_path.empty()) throw ConfigError("infer needs --model or model_path");
  const std::string reg = !registry.empty() ? registry : c.registry_dir;
  if (reg.empty()) throw ConfigError("infer needs --registry or registry_dir");
  const std::optional<Endpoint> endpoint = [&]() -> std::optional<Endpoint> {
    try {
      return ResolveEndpoint(!endpoint_flag.empty() ? endpoint_flag : c.endpoint);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }();
  if (!endpoint) throw ConfigError(std::string("infer needs --endpoint or ") + kEndpointEnv);
  const ToyModel model = LoadToyModel(c.model_path);
  const EtaPartitionRegistry denoisers = LoadRegistry(ManifestPath(reg));
  const ClipBound bound = ClipBound::FromVocabulary(model.table);
  c.vocab_size = model.table.vocab_size();
  c.dim = model.table.dim();
  const std::uint64_t seed = c.seeds.front();

  Corpus sequences;
  if (!tokens.empty()) {
    std::vector<TokenId> ids;
    for (const auto& t : config_detail::SplitList(tokens)) {
      const std::size_t id = config_detail::ParseSize("tokens", t);
      if (id >= c.vocab_size) throw ConfigError("token id " + t + " is outside the vocabulary");
      ids.push_back(static_cast<TokenId>(id));
    }
    if (ids.empty()) throw ConfigError("--tokens is empty");
    sequences.push_back(std::move(ids));
  } else {
    Rng r = Rng(seed).Fork(stream::kTaskTest);
    sequences = GenerateCorpus(MakeCorpusSpec(c, count), r).sequences;
  }

  TcpTransport transport(*endpoint);
  Session session(transport, seed);
  Report report;
  const std::string scenario = ScenarioName(c, "infer");
  for (double eta : c.etas) {
    const DenoiserWeights& denoiser = SelectDenoiser(eta, denoisers);
    const std::uint64_t sent0 = transport.bytes_sent(), recv0 = transport.bytes_received();
    double mse_d = 0, mse_n = 0, cos_d = 0, cos_n = 0;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      const Tensor x = EmbedTokens(sequences[i], model.table);
      Rng rng = Rng(seed).Fork(stream::kTaskNoise).Fork(EtaStream(eta)).Fork(i);
      const PrivatizedTokens p = PrivatizeTokens(x, PrivacyParams{eta, c.clip}, bound, rng);
      const Tensor e_n = ClientRequest(p.x_tilde, session).values;
      const Tensor e_d = Denoise(denoiser, e_n, p.x_tilde, p.noise).values;
      const Tensor e_c = Encode(x, model.encoder).values;
      mse_d += MeanSquaredError(e_d.data(), e_c.data());
      mse_n += MeanSquaredError(e_n.data(), e_c.data());
      cos_d += CosineSimilarity(e_d.data(), e_c.data());
      cos_n += CosineSimilarity(e_n.data(), e_c.data());
      if (!tokens.empty()) {
        out << "eta " << FormatEta(eta) << " e_d";
        for (double v : e_d.data()) out << ' ' << FormatNumber(v);
        out << "\n";
      }
    }
    const double n = static_cast<double>(sequences.size());
    const double overhead = static_cast<double>(kFrameHeaderBytes + kFrameCrcBytes);
    report.Add(scenario, "snd", eta, seed, "mse", mse_d / n);
    report.Add(scenario, "snd", eta, seed, "cos", cos_d / n);
    report.Add(scenario, "snd", eta, seed, "bytes_up", static_cast<double>(transport.bytes_sent() - sent0) / n - overhead);
    report.Add(scenario, "snd", eta, seed, "bytes_down",
               static_cast<double>(transport.bytes_received() - recv0) / n - overhead);
    report.Add(scenario, "no_denoise", eta, seed, "mse", mse_n / n);
    report.Add(scenario, "no_denoise", eta, seed, "cos", cos_n / n);
  }
  return report;
}

}  // namespace cli_detail

// Entry point; args excludes the program name. Returns the exit code.
inline int RunCli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                  std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Split-and-denoise private inference toolkit", "snd"};
  app.require_subcommand(1, 1);
  app.footer("Config keys (key=value):\n" + ConfigKeyReference());

  CommonOptions common;
  std::string registry, endpoint, model, tokens;
  std::size_t mi_n = 0, mi_k = 0, count = 100;
  long duration_ms = 0;
  std::string corpus_a, corpus_b;

  auto* train = app.add_subcommand("train-denoiser", "train one denoiser per eta partition and save the registry");
  AddCommon(train, common);
  train->add_option("--registry", registry, "output directory for the registry");
  train->add_option("--model", model, "also save the toy model checkpoint here");

  auto* serve = app.add_subcommand("serve", "run the embedding server over TCP");
  AddCommon(serve, common);
  serve->add_option("--model", model, "toy model checkpoint");
  serve->add_option("--endpoint", endpoint, "bind address host:port (port 0 = any)");
  serve->add_option("--duration-ms", duration_ms, "stop after this long (0 = until SIGINT/SIGTERM)");

  auto* infer = app.add_subcommand("infer", "privatize, query a server, and denoise");
  AddCommon(infer, common);
  infer->add_option("--model", model, "toy model checkpoint (vocabulary table)");
  infer->add_option("--registry", registry, "registry directory or manifest file");
  infer->add_option("--endpoint", endpoint, std::string("server host:port (default: $") + kEndpointEnv + ")");
  infer->add_option("--tokens", tokens, "comma-separated token ids to embed");
  infer->add_option("--count", count, "synthetic sequences to score when --tokens is absent");

  auto* attack = app.add_subcommand("attack", "privacy attacks");
  attack->require_subcommand(1, 1);
  auto* inversion = attack->add_subcommand("inversion", "nearest-neighbour token inversion");
  AddCommon(inversion, common);
  auto* attribute = attack->add_subcommand("attribute", "label inference from privatized tokens");
  AddCommon(attribute, common);

  auto* mi = app.add_subcommand("mi", "k-NN mutual information between privatized tokens and noise");
  AddCommon(mi, common);
  mi->add_option("--n", mi_n, "sample count");
  mi->add_option("--k", mi_k, "neighbour order");

  auto* geometry = app.add_subcommand("geometry", "vocabulary neighbour and perturbation distances");
  AddCommon(geometry, common);

  auto* sweep = app.add_subcommand("sweep", "all methods across the eta list");
  AddCommon(sweep, common);

  auto* ablate = app.add_subcommand("ablate", "ablations");
  ablate->require_subcommand(1, 1);
  auto* server_denoise = ablate->add_subcommand("server-denoise", "client denoiser vs a noise-blind server variant");
  AddCommon(server_denoise, common);
  auto* clipping = ablate->add_subcommand("clipping", "with and without norm clipping");
  AddCommon(clipping, common);

  auto* drill = app.add_subcommand("update-drill", "server encoder update and denoiser finetune");
  AddCommon(drill, common);

  auto* similarity = app.add_subcommand("similarity", "Spearman rank correlation of two corpora's token frequencies");
  AddCommon(similarity, common);
  similarity->add_option("--corpus-a", corpus_a, "token-id file, one sequence per line");
  similarity->add_option("--corpus-b", corpus_b, "token-id file, one sequence per line");

  std::vector<const char*> argv = {"snd"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    ExperimentConfig c = Resolve(common);
    if (!registry.empty()) c.registry_dir = registry;
    if (!model.empty()) c.model_path = model;
    if (mi_n > 0) c.mi_samples = mi_n;
    if (mi_k > 0) c.mi_k = mi_k;
    const auto start = std::chrono::steady_clock::now();
    Report report;
    if (*serve) return ServeCommand(c, endpoint, duration_ms, out);
    if (*train) {
      report = TrainDenoiserCommand(c, out);
    } else if (*infer) {
      report = InferCommand(c, endpoint, registry, tokens, count, out);
    } else if (*inversion) {
      report = InversionScenario(c);
    } else if (*attribute) {
      report = AttributeScenario(c);
    } else if (*mi) {
      report = MutualInformationScenario(c);
    } else if (*geometry) {
      report = GeometryScenario(c);
    } else if (*sweep) {
      report = EtaSweep(c);
    } else if (*server_denoise) {
      report = AblationServerDenoise(c);
    } else if (*clipping) {
      report = AblationClipping(c);
    } else if (*drill) {
      report = ModelUpdateDrill(c);
    } else if (*similarity) {
      if (corpus_a.empty() != corpus_b.empty()) throw ConfigError("give both --corpus-a and --corpus-b, or neither");
      if (!corpus_a.empty()) {
        const Corpus a = ReadCorpusFile(corpus_a), b = ReadCorpusFile(corpus_b);
        report = SimilarityScenario(c, &a, &b);
      } else {
        report = SimilarityScenario(c);
      }
      for (const auto& e : report.extras().begin().value()["similarity"])
        out << "seed " << e["seed"] << " spearman_rho " << FormatNumber(e["spearman_rho"].get<double>()) << "\n";
    }
    WriteReport(report, c, out);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    err << "wall_ms " << FormatNumber(std::round(ms)) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error (" << ErrorCodeName(e.code()) << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace snd

#endif  // SND_HARNESS_CLI_HPP_
