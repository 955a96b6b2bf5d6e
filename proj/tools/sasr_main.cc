// Copyright (c) 2026 SASR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sasr/ctc/ctc.h"
#include "sasr/decode/ngram.h"
#include "sasr/endpoint/session.h"
#include "sasr/harness/evaluate.h"
#include "sasr/harness/pipeline.h"

namespace {

using namespace sasr;
namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::string workdir;
  std::string checkpoint;
  std::optional<uint64_t> seed;
  int threads = 0;
};

struct Context {
  HarnessConfig cfg;
  Workspace ws{""};
  std::string checkpoint;
};

Context MakeContext(const Globals& g) {
  Context c;
  c.cfg = g.config.empty() ? HarnessConfig() : HarnessConfig::LoadFile(g.config);
  if (!g.workdir.empty()) c.cfg.workdir = g.workdir;
  if (g.seed) {
    c.cfg.seed = *g.seed;
    c.cfg.data.seed = *g.seed;
    c.cfg.train.seed = *g.seed;
    c.cfg.finetune.seed = *g.seed;
  }
  c.ws = Workspace(c.cfg.workdir);
  c.checkpoint = g.checkpoint;
  return c;
}

std::string Or(const std::string& v, const std::string& fallback) {
  return v.empty() ? fallback : v;
}

// Model, tokenizers, LM and weights for decoding.
struct Loaded {
  Model model;
  TokenizerSet tokenizers;
  std::optional<NgramModel> lm;
  Recognizer rec;
};

std::unique_ptr<Loaded> LoadRecognizer(const Context& c, const std::string& checkpoint,
                                       bool use_weights) {
  auto l = std::make_unique<Loaded>();
  l->model = Model::Load(checkpoint);
  l->tokenizers = LoadTokenizers(c.ws);
  if (fs::exists(c.ws.lm())) l->lm = NgramModel::ReadArpa(c.ws.lm());
  l->rec.model = &l->model;
  l->rec.tokenizers = &l->tokenizers;
  l->rec.lm = l->lm ? &*l->lm : nullptr;
  l->rec.decode = c.cfg.decode;
  if (use_weights && fs::exists(c.ws.weights())) l->rec.weights = LoadWeights(c.ws.weights());
  l->rec.Validate();
  return l;
}

std::string DefaultDecodeCheckpoint(const Context& c) {
  if (!c.checkpoint.empty()) return c.checkpoint;
  return fs::exists(c.ws.eos_checkpoint()) ? c.ws.eos_checkpoint() : c.ws.checkpoint();
}

void RunTraining(const Context& c, const std::string& stage, const std::string& in_ckpt,
                 const std::string& out_ckpt, const std::string& train_manifest,
                 const std::string& dev_manifest, const TrainConfig& tc) {
  const TokenizerSet tok = LoadTokenizers(c.ws);
  Model model = in_ckpt.empty() ? CreateModel(c.cfg.model, tok, c.cfg.seed)
                                : Model::Load(in_ckpt);
  const auto train = LoadExamples(ReadManifest(train_manifest), tok);
  std::vector<Example> dev;
  if (!dev_manifest.empty() && tc.dev_every > 0) dev = LoadExamples(ReadManifest(dev_manifest), tok);
  std::ofstream log(c.ws.train_log(stage));
  log << "iteration,loss,lr,grad_norm\n";
  TrainHooks hooks;
  hooks.on_iteration = [&](const IterationLog& it) {
    log << it.iteration << ',' << it.loss << ',' << it.lr << ',' << it.grad_norm << '\n';
    if (tc.log_every > 0 && (it.iteration % tc.log_every == 0 || it.iteration == 1)) {
      std::cerr << stage << " iter " << it.iteration << " loss " << it.loss << " lr " << it.lr
                << '\n';
    }
  };
  hooks.on_dev_wer = [&](int it, double wer) {
    std::cerr << stage << " iter " << it << " dev_wer " << wer << '\n';
  };
  const TrainSummary s = Train(&model, tok, train, dev, tc, hooks);
  model.Save(out_ckpt, {{"stage", stage}, {"iterations", tc.iterations},
                        {"final_loss", s.losses.empty() ? 0.0 : s.losses.back()},
                        {"train", tc}});
  std::cout << nlohmann::json{{"checkpoint", out_ckpt},
                              {"iterations", tc.iterations},
                              {"final_loss", s.losses.empty() ? 0.0 : s.losses.back()},
                              {"skipped", s.skipped}}
                   .dump()
            << '\n';
}

std::vector<double> ParseList(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming speech recognition with model-based end-of-speech detection"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--workdir", g.workdir, "Work directory (overrides the config)");
  app.add_option("--checkpoint", g.checkpoint, "Model checkpoint");
  app.add_option("--seed", g.seed, "Seed for data, initialization and batching");
  app.add_option("--threads", g.threads, "Evaluation threads (0 = all cores)");

  auto* make_data = app.add_subcommand("make-data", "Synthesize the toy dataset");
  std::string data_out;
  make_data->add_option("--out", data_out, "Output directory");

  auto* build_vocab = app.add_subcommand("build-vocab", "Build the three tokenizers");
  std::string vocab_manifest;
  build_vocab->add_option("--manifest", vocab_manifest, "Training manifest");

  auto* train_lm = app.add_subcommand("train-lm", "Train the word n-gram LM");
  std::string lm_manifest;
  train_lm->add_option("--manifest", lm_manifest, "Training manifest");

  auto* train = app.add_subcommand("train", "Train the acoustic model");
  std::string train_manifest, dev_manifest, train_init;
  train->add_option("--manifest", train_manifest, "Training manifest");
  train->add_option("--dev", dev_manifest, "Dev manifest");
  train->add_option("--init", train_init, "Start from this checkpoint");
  std::optional<int> train_iters;
  train->add_option("--iterations", train_iters, "Override iteration count");

  auto* align = app.add_subcommand("align", "Forced alignment; fills endpoint_ms");
  std::string align_manifest, align_out;
  align->add_option("--manifest", align_manifest, "Input manifest")->required();
  align->add_option("--out", align_out, "Output manifest")->required();

  auto* finetune = app.add_subcommand("finetune-eos", "Fine-tune with </s> targets and EL penalty");
  std::string ft_manifest, ft_out;
  finetune->add_option("--manifest", ft_manifest, "Manifest with endpoint_ms");
  finetune->add_option("--out", ft_out, "Output checkpoint");
  std::optional<int> ft_iters;
  finetune->add_option("--iterations", ft_iters, "Override iteration count");

  auto* transcribe = app.add_subcommand("transcribe", "Decode one WAV file");
  std::string audio_path, utt_id;
  bool streaming = false, eos_on = false, eos_off = false;
  int chunk_ms = 300;
  std::optional<double> alpha, beta;
  std::optional<int> endpoint_ms;
  transcribe->add_option("audio", audio_path, "16 kHz mono PCM16 WAV")->required();
  transcribe->add_option("--id", utt_id, "Utterance id for the result record");
  transcribe->add_flag("--streaming", streaming, "Feed the audio chunk by chunk");
  transcribe->add_option("--chunk-ms", chunk_ms, "Chunk size in ms")->check(CLI::PositiveNumber);
  auto* on = transcribe->add_flag("--eos-on", eos_on, "Enable end-of-speech detection");
  transcribe->add_flag("--eos-off", eos_off, "Consume the whole stream")->excludes(on);
  transcribe->add_option("--alpha", alpha, "EOS threshold base");
  transcribe->add_option("--beta", beta, "EOS peak-count scale");
  transcribe->add_option("--endpoint-ms", endpoint_ms, "Reference endpoint for latency");

  auto* evaluate = app.add_subcommand("evaluate", "WER, latency and coverage on a manifest");
  std::string eval_manifest;
  bool eval_rows = false;
  evaluate->add_option("--manifest", eval_manifest, "Manifest (default: test split)");
  auto* eval_on = evaluate->add_flag("--eos-on", eos_on, "Enable end-of-speech detection");
  evaluate->add_flag("--eos-off", eos_off, "Consume the whole stream")->excludes(eval_on);
  evaluate->add_option("--alpha", alpha, "EOS threshold base");
  evaluate->add_option("--beta", beta, "EOS peak-count scale");
  evaluate->add_flag("--rows", eval_rows, "Include per-utterance rows");

  auto* sweep = app.add_subcommand("sweep", "Alpha/beta sweep as CSV");
  std::string sweep_manifest, alphas = "0.5,0.6,0.7,0.8,0.9", betas = "1,2,4", sweep_out;
  sweep->add_option("--manifest", sweep_manifest, "Manifest (default: test split)");
  sweep->add_option("--alphas", alphas, "Comma-separated alpha values");
  sweep->add_option("--betas", betas, "Comma-separated beta values");
  sweep->add_option("--out", sweep_out, "CSV path (default: stdout)");

  auto* grid = app.add_subcommand("grid-search-weights", "Tune rescoring weights on dev");
  std::string grid_manifest;
  grid->add_option("--manifest", grid_manifest, "Manifest (default: dev split)");

  CLI11_PARSE(app, argc, argv);

  try {
    const Context c = MakeContext(g);
    const HarnessConfig& cfg = c.cfg;
    const Workspace& ws = c.ws;

    if (*make_data) {
      const std::string dir = Or(data_out, ws.data_dir());
      const DatasetPaths p = SynthDataset(cfg.data, cfg.counts, dir);
      std::cout << nlohmann::json{{"train", p.train}, {"dev", p.dev}, {"test", p.test},
                                  {"train_minutes", p.train_minutes}}
                       .dump()
                << '\n';
    } else if (*build_vocab) {
      const auto texts = Texts(ReadManifest(Or(vocab_manifest, ws.manifest("train")), false));
      const TokenizerSet t = BuildTokenizers(texts, cfg.small_vocab, cfg.large_vocab);
      SaveTokenizers(t, ws);
      std::cout << nlohmann::json{{"char", t.levels[0].size()},
                                  {"sub_small", t.levels[1].size()},
                                  {"sub_large", t.levels[2].size()}}
                       .dump()
                << '\n';
    } else if (*train_lm) {
      const auto texts = Texts(ReadManifest(Or(lm_manifest, ws.manifest("train")), false));
      NgramModel::Train(texts, cfg.lm_order).WriteArpa(ws.lm());
      std::cout << nlohmann::json{{"lm", ws.lm()}, {"order", cfg.lm_order}}.dump() << '\n';
    } else if (*train) {
      TrainConfig tc = cfg.train;
      if (train_iters) tc.iterations = *train_iters;
      RunTraining(c, "train", train_init, Or(c.checkpoint, ws.checkpoint()),
                  Or(train_manifest, ws.manifest("train")), Or(dev_manifest, ws.manifest("dev")),
                  tc);
    } else if (*finetune) {
      TrainConfig tc = cfg.finetune;
      tc.eos_targets = true;
      if (ft_iters) tc.iterations = *ft_iters;
      RunTraining(c, "finetune", Or(c.checkpoint, ws.checkpoint()),
                  Or(ft_out, ws.eos_checkpoint()), Or(ft_manifest, ws.manifest("train")), "", tc);
    } else if (*align) {
      const Model model = Model::Load(Or(c.checkpoint, ws.checkpoint()));
      const TokenizerSet tok = LoadTokenizers(ws);
      const Vocabulary& chars = tok.at(Level::kChar);
      auto records = ReadManifest(align_manifest);
      for (auto& r : records) {
        const Example ex = MakeExample(r, ReadWav(r.audio), tok);
        const auto grids = model.ForwardFull(ex.features);
        const AlignmentResult a = ForcedAlign(grids[0].log_probs.ToTensor(),
                                              ex.targets.y[0], chars.blank_id(),
                                              grids[0].frame_stride_ms);
        r.endpoint_ms = a.endpoint_ms;
        std::cout << AlignmentLine(r.id, a) << '\n';
      }
      WriteManifest(align_out, records);
    } else if (*transcribe) {
      auto l = LoadRecognizer(c, DefaultDecodeCheckpoint(c), true);
      const Waveform wave = ReadWav(audio_path);
      nlohmann::json out = {{"id", Or(utt_id, fs::path(audio_path).stem().string())}};
      if (!streaming) {
        out["text"] = BatchTranscribe(wave, l->rec);
        out["source"] = DecisionSourceName(DecisionSource::kStreamEnd);
        out["decision_ms"] = static_cast<int>(wave.samples.size() * 1000 / kSampleRate);
      } else {
        SessionOptions o;
        o.mode = eos_off ? EosMode::kOff : EosMode::kOn;
        o.eos = cfg.eos;
        if (alpha) o.eos.alpha = *alpha;
        if (beta) o.eos.beta = *beta;
        o.chunk_ms = chunk_ms;
        o.on_interim = [](int ms, const std::string& text) {
          std::cerr << ms << '\t' << text << '\n';
        };
        const SessionResult r = RunSession(wave, l->rec, o);
        out["text"] = r.text;
        out["source"] = DecisionSourceName(r.source);
        out["decision_ms"] = r.decision_ms;
      }
      out["latency_ms"] = endpoint_ms ? nlohmann::json(out["decision_ms"].get<int>() - *endpoint_ms)
                                      : nlohmann::json(nullptr);
      std::cout << out.dump() << '\n';
    } else if (*evaluate) {
      auto l = LoadRecognizer(c, DefaultDecodeCheckpoint(c), true);
      EosConfig eos = cfg.eos;
      if (alpha) eos.alpha = *alpha;
      if (beta) eos.beta = *beta;
      const auto records = ReadManifest(Or(eval_manifest, ws.manifest("test")));
      const EvalReport r =
          EvalRun(l->rec, records, eos_on ? EosMode::kOn : EosMode::kOff, eos, g.threads);
      std::cout << ReportJson(r, eval_rows).dump() << '\n';
    } else if (*sweep) {
      auto l = LoadRecognizer(c, DefaultDecodeCheckpoint(c), true);
      const auto records = ReadManifest(Or(sweep_manifest, ws.manifest("test")));
      const auto traces = TraceCorpus(l->rec, records, cfg.eos, g.threads);
      const auto rows = Sweep(traces, records, l->rec.weights, ParseList(alphas),
                              ParseList(betas), cfg.eos,
                              l->tokenizers.at(Level::kSubLarge).eos_id());
      const std::string csv = SweepCsv(rows);
      if (sweep_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream(sweep_out) << csv;
      }
    } else if (*grid) {
      auto l = LoadRecognizer(c, Or(c.checkpoint, ws.checkpoint()), false);
      const auto records = ReadManifest(Or(grid_manifest, ws.manifest("dev")));
      const auto traces = TraceCorpus(l->rec, records, cfg.eos, g.threads);
      const auto dev = DevPools(traces, records);
      const GridSearchResult best = GridSearchWeights(dev, cfg.weight_grid);
      SaveWeights(ws.weights(), best.best);
      std::cout << nlohmann::json{{"w_lm", best.best.w_lm},
                                  {"w_char", best.best.w_char},
                                  {"w_s300", best.best.w_s300},
                                  {"w_len", best.best.w_len},
                                  {"dev_wer", best.wer},
                                  {"baseline_dev_wer", CorpusWer(dev, RescoreWeights{})},
                                  {"evaluated", best.evaluated}}
                       .dump()
                << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
