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

// Acceptance suite: one PASS/FAIL line per criterion; exit status is the
// number of failures (capped at 1). Thresholds are the fixed constants below.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "snd/denoiser.hpp"
#include "snd/dx_privacy.hpp"
#include "snd/grad_check.hpp"
#include "snd/harness/cli.hpp"
#include "snd/harness/experiments.hpp"
#include "snd/privacy_eval.hpp"
#include "snd/protocol/client.hpp"
#include "snd/protocol/frame.hpp"
#include "snd/protocol/server.hpp"
#include "snd/protocol/tcp.hpp"

namespace snd {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) { return std::chrono::duration<double>(Clock::now() - since).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Detail {
 public:
  template <typename T>
  Detail& operator<<(const T& v) {
    out_ << v;
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_ = [] {
    std::ostringstream o;
    o << std::setprecision(5);
    return o;
  }();
};

int failures = 0;

void Run(int id, const char* name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << id << "  " << name << ": " << o.detail
            << std::endl;
}

// Shared per-seed state for the denoiser criteria.
ExperimentConfig AcceptanceConfig() {
  ExperimentConfig c;
  c.epochs = 4;
  c.learning_rate = 3e-3;
  c.seeds = {1, 2, 3};
  return c;
}

std::vector<std::unique_ptr<Lab>>& Labs() {
  static std::vector<std::unique_ptr<Lab>> labs = [] {
    std::vector<std::unique_ptr<Lab>> v;
    const ExperimentConfig c = AcceptanceConfig();
    for (std::uint64_t s : c.seeds) v.push_back(std::make_unique<Lab>(c, s));
    return v;
  }();
  return labs;
}

std::map<std::string, double> Rows(const Report& r) {
  std::map<std::string, double> m;
  for (const auto& row : r.rows()) m[row.method + "|" + row.metric] = row.value;
  return m;
}

// ---------------------------------------------------------------------------

Outcome NoiseLaw() {
  constexpr std::size_t kDim = 16, kSamples = 200000;
  constexpr double kEta = 2.0, kMeanTol = 0.01, kVarTol = 0.03, kMaxSeconds = 10.0;
  const auto t0 = Clock::now();
  Rng rng(11);
  double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < kSamples; ++i) {
    const double r = Norm(SampleNoise(kDim, kEta, rng).z);
    sum += r;
    sum_sq += r * r;
  }
  const double mean = sum / kSamples;
  const double var = (sum_sq - kSamples * mean * mean) / (kSamples - 1);
  const double secs = Seconds(t0);
  const double want_mean = kDim / kEta, want_var = kDim / (kEta * kEta);
  const bool ok = std::abs(mean - want_mean) <= kMeanTol * want_mean &&
                  std::abs(var - want_var) <= kVarTol * want_var && secs < kMaxSeconds;
  return {ok, (Detail() << "mean |z| " << mean << " (want 8 +-1%), var " << var << " (want 4 +-3%), " << secs
                        << " s").str()};
}

Outcome LaplaceTail() {
  constexpr std::size_t kSamples = 100000;
  constexpr double kTol = 0.01;
  Rng rng(12);
  std::vector<double> z(kSamples);
  for (double& v : z) v = SampleNoise(1, 1.0, rng).z[0];
  double worst = 0;
  Detail d;
  for (double t : {0.5, 1.0, 2.0}) {
    const double p = std::count_if(z.begin(), z.end(), [t](double v) { return std::abs(v) > t; }) /
                     static_cast<double>(kSamples);
    worst = std::max(worst, std::abs(p - std::exp(-t)));
    d << "P(|z|>" << t << ")=" << p << " ";
  }
  return {worst < kTol, (d << "max gap " << worst << " (< 0.01)").str()};
}

Outcome RatioBound() {
  constexpr std::size_t kTriples = 10000, kDim = 8;
  constexpr double kEta = 3.0, kSlack = 1e-9;
  Rng rng(13);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < kTriples; ++i) {
    const Tensor x = Tensor::Normal({kDim}, 1.0, rng);
    const Tensor xp = Tensor::Normal({kDim}, 1.0, rng);
    const Tensor y = Add(x, Tensor::Vector(SampleNoise(kDim, kEta, rng).z));
    if (LogDensityRatio(x.data(), xp.data(), y.data(), kEta) > kEta * Distance(x.data(), xp.data()) + kSlack)
      ++violations;
  }
  return {violations == 0, (Detail() << violations << " violations in " << kTriples << " triples").str()};
}

Outcome Clipping() {
  constexpr double kDirectionTol = 1e-12;
  Rng rng(14);
  VocabEmbeddingTable table;
  table.rows = Tensor::Normal({1000, 32}, 1.0, rng);
  const ClipBound bound = ClipBound::FromVocabulary(table);
  Tensor m = Tensor::Normal({2000, 32}, 1.0, rng);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double& v : m.row(r)) v *= std::exp(rng.Normal() * 2.0);
  const Tensor once = ClipPrivatized(m, bound);
  const Tensor twice = ClipPrivatized(once, bound);
  bool idempotent = once == twice, bounded = true;
  double worst_dir = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    bounded = bounded && Norm(once.row(r)) <= bound.c;
    const double nm = Norm(m.row(r)), no = Norm(once.row(r));
    for (std::size_t j = 0; j < m.cols(); ++j)
      worst_dir = std::max(worst_dir, std::abs(once(r, j) / no - m(r, j) / nm));
  }
  return {idempotent && bounded && worst_dir <= kDirectionTol,
          (Detail() << "idempotent " << idempotent << ", norm<=C " << bounded << ", direction err " << worst_dir)
              .str()};
}

Outcome EntropyOracle() {
  constexpr double kTol = 0.05;
  Rng rng(15);
  const Tensor g = Tensor::Normal({20000, 1}, 1.0, rng);
  const double h = KnnEntropy(g, 3);
  const Tensor x = Tensor::Normal({20000, 1}, 1.0, rng);
  const Tensor z = Tensor::Normal({20000, 1}, 1.0, rng);
  const double mi = EstimateMutualInformation(Add(x, z), z, 3).value;
  const Tensor a = Tensor::Normal({2000, 4}, 1.0, rng);
  const double self = EstimateMutualInformation(a, a, 3).value;
  const bool ok = std::abs(h - 1.41894) < kTol && std::abs(mi - 0.34657) < kTol && self == 0.0;
  return {ok, (Detail() << "H " << h << " (1.41894), I " << mi << " (0.34657), I(A,A) " << self).str()};
}

Outcome MiMonotone() {
  const double etas[] = {0.1, 1, 10, 100};
  int good = 0;
  Detail d;
  for (auto& lab : Labs()) {
    std::vector<double> mi;
    for (double eta : etas) {
      Rng rng = Rng(lab->world().seed).Fork(stream::kMutualInformation).Fork(EtaStream(eta));
      mi.push_back(VocabularyMutualInformation(lab->world().model.table, eta, 2000, 3, rng).value);
    }
    const bool inc = std::is_sorted(mi.begin(), mi.end(), std::less_equal<double>()) &&
                     std::adjacent_find(mi.begin(), mi.end()) == mi.end();
    good += inc;
    d << "seed " << lab->world().seed << " [" << mi[0] << " " << mi[1] << " " << mi[2] << " " << mi[3] << "] ";
  }
  return {good == 3, (d << good << "/3 strictly increasing").str()};
}

Outcome Inversion() {
  constexpr double kMaxHeavyAccuracy = 0.05, kNoiseToSpacing = 5.0;
  const ExperimentConfig c = AcceptanceConfig();
  double total = 0;
  bool clean_exact = true;
  Detail d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const World w = seed <= 3 ? Labs()[seed - 1]->world() : BuildWorld(c, seed);
    Rng rng(seed * 101);
    GeometryOptions o;
    o.sample_count = w.model.table.vocab_size();
    o.noise_draws = 1;
    const double spacing = GeometryMetrics(w.model.table, kInfiniteEta, o, rng).mean_knn_distance;
    // E||z|| = d / eta.
    const double eta = static_cast<double>(c.dim) / (kNoiseToSpacing * spacing);
    std::vector<TokenId> truth(2000);
    for (auto& t : truth) t = static_cast<TokenId>(rng.Index(c.vocab_size));
    const Tensor x = EmbedTokens(truth, w.model.table);
    clean_exact = clean_exact && InversionAttack(x, w.model.table, truth).accuracy == 1.0;
    const Tensor xt = PrivatizeTokens(x, PrivacyParams{eta, true}, w.bound, rng).x_tilde;
    const double acc = InversionAttack(xt, w.model.table, truth).accuracy;
    total += acc;
    d << "eta " << eta << " acc " << acc << "; ";
  }
  const double mean = total / 5;
  return {clean_exact && mean <= kMaxHeavyAccuracy,
          (d << "inf-eta exact " << clean_exact << ", heavy mean " << mean << " (<= 0.05)").str()};
}

Outcome GradientCheck() {
  constexpr double kMaxRelative = 1e-5;
  DenoiserConfig c;
  c.d_model = 8;
  c.d_ff = 16;
  c.d_kv = 4;
  c.n_head = 2;
  c.layers = 2;
  c.max_tokens = 6;
  c.init_std = 0.4;
  DenoiserWeights w = InitDenoiser(c);
  Rng rng(18);
  // Nonzero embeddings, norms and biases so every gradient path is live.
  for (auto& [name, e] : w.params.entries())
    if (name == "segment" || name == "position" || name.find(".ln.") != std::string::npos || name.ends_with(".b"))
      e.value = Tensor::Normal(e.value.shape(), 0.3, rng);
  DenoiseExample ex;
  ex.e_n = Tensor::Normal({8}, 1.0, rng);
  ex.x_tilde = Tensor::Normal({3, 8}, 1.0, rng);
  ex.noise = Tensor::Normal({3, 8}, 1.0, rng);
  ex.e_c = Tensor::Normal({8}, 1.0, rng);
  auto loss = [&](ad::Graph& g, const ParameterStore&) { return ExampleLoss(g, w, ex); };
  GradCheckOptions o;
  o.step = 1e-5;
  const GradCheckResult r = GradCheck(loss, w.params, o);
  return {r.checked >= 100 && r.max_relative_error < kMaxRelative,
          (Detail() << r.checked << " entries over " << w.params.Names().size() << " tensors, max rel err "
                    << r.max_relative_error << " at " << r.worst_parameter)
              .str()};
}

Outcome DenoiserUtility() {
  constexpr double kMaxRatio = 0.5, kMinImproved = 0.9, kMaxSeconds = 300;
  const auto t0 = Clock::now();
  int good = 0;
  Detail d;
  for (auto& lab : Labs()) {
    const double eta = MidEta(lab->world());
    const DenoiseMetrics m = EvaluateDenoiser(lab->PartitionDenoiser(eta), lab->ValidationPairs({eta}, true));
    const double ratio = m.mse_denoised / m.mse_noisy;
    good += ratio <= kMaxRatio && m.fraction_cos_improved >= kMinImproved;
    d << "seed " << lab->world().seed << " eta " << eta << " mse " << m.mse_denoised << "/" << m.mse_noisy << "="
      << ratio << " cos-improved " << m.fraction_cos_improved << "; ";
  }
  const double secs = Seconds(t0);
  return {good == 3 && secs < kMaxSeconds, (d << good << "/3, " << secs << " s").str()};
}

std::vector<Report>& ServerAblations() {
  static std::vector<Report> reports = [] {
    std::vector<Report> v;
    for (auto& lab : Labs()) {
      Report r;
      ServerAblationSeed(*lab, r, "ablate_server_denoise");
      v.push_back(r);
    }
    return v;
  }();
  return reports;
}

Outcome DownstreamGain() {
  constexpr double kMinGain = 0.05;
  int good = 0;
  Detail d;
  for (const Report& r : ServerAblations()) {
    const auto m = Rows(r);
    const double den = m.at("snd|acc"), raw = m.at("no_denoise|acc"), clean = m.at("clean|acc");
    good += den >= raw + kMinGain && clean >= den;
    d << "clean " << clean << " denoised " << den << " noisy " << raw << "; ";
  }
  return {good == 3, (d << good << "/3").str()};
}

Outcome ServerAblation() {
  constexpr double kBoundTol = 1e-12;
  int good = 0;
  Detail d;
  for (const Report& r : ServerAblations()) {
    const auto m = Rows(r);
    good += m.at("snd|mse") <= m.at("server_denoise|mse");
    d << m.at("snd|mse") << " vs " << m.at("server_denoise|mse") << "; ";
  }
  // (eta, B_x, sum of squared diameters, k); bound = sum/(4k) / (e^{eta B} - 1).
  const double sets[5][4] = {{1, 1, 4, 1}, {0.5, 2, 10, 4}, {3, 0.1, 1, 2}, {10, 0.3, 7.5, 32}, {0.01, 5, 100, 768}};
  double worst = 0;
  for (const auto& s : sets) {
    const double hand = (s[2] / (4.0 * s[3])) / (std::exp(s[0] * s[1]) - 1.0);
    worst = std::max(worst, std::abs(ServerMseLowerBound(s[0], s[1], s[2], static_cast<std::size_t>(s[3])) - hand) /
                                std::abs(hand));
  }
  return {good == 3 && worst <= kBoundTol,
          (d << "client<=server " << good << "/3, bound rel err " << worst).str()};
}

Outcome ClippingAblation() {
  int good = 0;
  Detail d;
  for (auto& lab : Labs()) {
    Report r;
    ClippingAblationSeed(*lab, r, "ablate_clipping", {LowEta(lab->world())}, /*downstream=*/false);
    const auto m = Rows(r);
    good += m.at("clipped|mse") <= m.at("unclipped|mse");
    d << "eta " << LowEta(lab->world()) << " " << m.at("clipped|mse") << " vs " << m.at("unclipped|mse") << "; ";
  }
  return {good == 3, (d << good << "/3").str()};
}

Outcome Protocol() {
  Detail d;
  // Round trip.
  Rng rng(20);
  bool round_trip = true;
  for (int i = 0; i < 1000; ++i) {
    Frame f;
    f.type = static_cast<MessageType>(1 + rng.Index(3));
    f.n = static_cast<std::uint32_t>(rng.Index(20));
    f.d = static_cast<std::uint32_t>(1 + rng.Index(40));
    f.payload.resize(std::size_t{f.n} * f.d);
    for (float& v : f.payload) do
        v = std::bit_cast<float>(static_cast<std::uint32_t>(rng.NextU64()));
      while (!std::isfinite(v));
    const auto bytes = EncodeFrame(f);
    round_trip = round_trip && DecodeFrame(bytes) == f && EncodeFrame(DecodeFrame(bytes)) == bytes;
  }
  // Instrumented payload bytes.
  const EncoderWeights& enc = Labs()[0]->encoder();
  const EmbeddingServer server(enc);
  InProcessTransport local([&server](std::span<const std::uint8_t> b) { return server.Handle(b); });
  Session session(local);
  bool bytes_ok = true, encode_ok = true;
  const std::uint64_t overhead = kFrameHeaderBytes + kFrameCrcBytes;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng.Index(64);
    const Tensor x = Tensor::Normal({n, enc.config.d_model}, 1.0, rng);
    const std::uint64_t s0 = local.bytes_sent(), r0 = local.bytes_received();
    const Tensor got = ClientRequest(x, session).values;
    bytes_ok = bytes_ok && local.bytes_sent() - s0 - overhead == 4 * n * enc.config.d_model &&
               local.bytes_received() - r0 - overhead == 4 * enc.config.d_model;
    // Server computes on the f32 upload and rounds its answer once.
    const Tensor direct = Encode(RoundToFloat32(x), enc).values;
    for (std::size_t j = 0; j < direct.size(); ++j)
      encode_ok = encode_ok && std::abs(got[j] - direct[j]) <= std::abs(direct[j]) * std::ldexp(1.0, -24);
  }
  // Concurrent TCP clients versus serial handling.
  TcpServer tcp([&server](std::span<const std::uint8_t> b) { return server.Handle(b); }, Endpoint{"127.0.0.1", 0});
  constexpr int kClients = 8, kRequests = 50;
  std::vector<std::vector<std::vector<std::uint8_t>>> requests(kClients), expected(kClients), got(kClients);
  for (int c = 0; c < kClients; ++c) {
    Rng r(300 + c);
    for (int i = 0; i < kRequests; ++i) {
      requests[c].push_back(EncodeFrame(MakeRequestFrame(Tensor::Normal({1 + r.Index(16), 32}, 1.0, r))));
      expected[c].push_back(server.Handle(requests[c].back()));
    }
  }
  std::vector<std::thread> threads;
  for (int c = 0; c < kClients; ++c)
    threads.emplace_back([&, c] {
      TcpTransport t(tcp.endpoint());
      for (const auto& req : requests[c]) got[c].push_back(t.Exchange(req));
    });
  for (auto& t : threads) t.join();
  tcp.Stop();
  const bool concurrent_ok = got == expected;
  return {round_trip && bytes_ok && encode_ok && concurrent_ok,
          (d << "round trip " << round_trip << ", bytes 4nd/4d " << bytes_ok << ", 8 clients == serial "
             << concurrent_ok << ", in-process == encode within f32 rounding " << encode_ok)
              .str()};
}

Outcome UpdateDrill() {
  constexpr double kMinRise = 1.10, kMaxRecovered = 1.20;
  int good = 0;
  Detail d;
  for (auto& lab : Labs()) {
    const DrillResult r = RunDrill(*lab);
    const double pre = r.pre_update.mse_denoised;
    const double rise = r.post_update.mse_denoised / pre, rec = r.finetuned.mse_denoised / pre;
    good += rise >= kMinRise && rec <= kMaxRecovered && r.control.mse_denoised == pre;
    d << "seed " << lab->world().seed << " post/pre " << rise << " finetuned/pre " << rec << "; ";
  }
  return {good == 3, (d << good << "/3").str()};
}

Outcome CliDeterminism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "snd_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "tiny.cfg") << "vocab_size = 200\ndim = 8\nseq_length = 6\ncorpus_size = 60\n"
                                     "validation_size = 20\ntask_train_size = 60\ntask_test_size = 40\n"
                                     "marker_count = 10\nencoder_d_ff = 16\nencoder_d_kv = 4\nencoder_n_head = 2\n"
                                     "denoiser_d_ff = 16\ndenoiser_d_kv = 4\ndenoiser_n_head = 2\nepochs = 1\n"
                                     "classifier_epochs = 30\nmi_samples = 200\nattack_samples = 100\n"
                                     "geometry_samples = 50\ngeometry_draws = 100\netas = 1, inf\nseeds = 1, 2\n";
  const std::vector<std::vector<std::string>> scenarios = {
      {"sweep"}, {"ablate", "server-denoise"}, {"ablate", "clipping"}, {"update-drill"}, {"attack", "inversion"},
      {"attack", "attribute"}, {"mi"}, {"geometry"}, {"similarity"}};
  int same = 0;
  Detail d;
  for (const auto& s : scenarios) {
    std::string csv[2];
    for (int run = 0; run < 2; ++run) {
      std::vector<std::string> args = s;
      const fs::path out = dir / ("run" + std::to_string(run) + ".csv");
      args.insert(args.end(), {"-c", (dir / "tiny.cfg").string(), "-o", out.string()});
      std::ostringstream sink;
      if (RunCli(args, sink, sink) != kExitOk) return {false, "scenario failed: " + s.back() + " " + sink.str()};
      std::ifstream in(out, std::ios::binary);
      csv[run].assign(std::istreambuf_iterator<char>(in), {});
    }
    same += csv[0] == csv[1] && !csv[0].empty();
  }
  return {same == static_cast<int>(scenarios.size()),
          (d << same << "/" << scenarios.size() << " scenarios byte-identical across runs").str()};
}

}  // namespace
}  // namespace snd

int main() {
  using namespace snd;
  const auto t0 = Clock::now();
  Run(1, "noise law", NoiseLaw);
  Run(2, "Laplace tail", LaplaceTail);
  Run(3, "density ratio bound", RatioBound);
  Run(4, "clipping", Clipping);
  Run(5, "entropy / MI oracles", EntropyOracle);
  Run(6, "MI monotone in eta", MiMonotone);
  Run(7, "inversion attack", Inversion);
  Run(8, "denoiser gradient check", GradientCheck);
  Run(9, "denoiser utility", DenoiserUtility);
  Run(10, "downstream gain", DownstreamGain);
  Run(11, "server-denoise ablation", ServerAblation);
  Run(12, "clipping ablation", ClippingAblation);
  Run(13, "protocol", Protocol);
  Run(14, "model-update drill", UpdateDrill);
  Run(15, "CLI determinism", CliDeterminism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << " in "
            << Seconds(t0) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
