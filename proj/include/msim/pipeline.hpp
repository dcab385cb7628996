// Copyright 2026 The msim Authors
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

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msim/checkpoint.hpp"
#include "msim/cluster.hpp"
#include "msim/config.hpp"
#include "msim/corpus.hpp"
#include "msim/corpus_io.hpp"
#include "msim/encoder.hpp"
#include "msim/probe.hpp"
#include "msim/projection.hpp"
#include "msim/retrieval.hpp"
#include "msim/sts.hpp"
#include "msim/train.hpp"

namespace msim {

inline constexpr const char* kToolName = "msim";
inline constexpr const char* kToolVersion = "0.1.0";

using Log = std::function<void(const std::string&)>;

// ---------------------------------------------------------------------------
// World: lexicon, pretrained table and the untrained encoder.

struct World {
  SemanticLexicon lexicon;
  PretrainInit init;
  EncoderParams untrained;
};

inline World make_world(const ExperimentConfig& cfg) {
  SemanticLexicon lex(cfg.corpus.lexicon());
  PretrainInit init = init_pretrained_embeddings(lex, cfg.init.dim, cfg.init.offset_scale,
                                                 cfg.init.noise_scale, cfg.init.seed);
  EncoderParams p = make_encoder_params(init.table, cfg.encoder.encoder());
  return World{std::move(lex), std::move(init), std::move(p)};
}

// ---------------------------------------------------------------------------
// Corpora.

struct EvalCorpora {
  std::map<Language, std::vector<PairRecord>> parallel;  // pivot -> language
  std::map<std::string, std::vector<PairRecord>> sts;    // "a-b"
  std::vector<LabeledSentence> topics;
  std::vector<LabeledSentence> probe;  // label = item; every item in every language
};

struct CorpusSet {
  TrainingCorpora train;
  EvalCorpora eval;
};

inline std::vector<PairRecord> eval_parallel_pairs(const SemanticLexicon& lex,
                                                   const CorpusSection& c, Language src,
                                                   Language tgt) {
  const std::uint64_t root = derive_seed(c.seed, "eval_parallel");
  return gen_parallel(lex, c.eval_parallel_count, src, tgt,
                      derive_seed(root, src * 0x10000 + tgt));
}

inline std::vector<LabeledSentence> probe_sentences(const SemanticLexicon& lex,
                                                    const CorpusSection& c) {
  std::vector<LabeledSentence> out;
  const std::uint64_t seed = derive_seed(c.seed, "probe");
  for (Language l = 0; l < c.languages; ++l) {
    const auto items = gen_sentences(lex, c.probe_items, l, seed);
    for (std::size_t i = 0; i < items.size(); ++i) {
      out.push_back({items[i], static_cast<int>(i)});
    }
  }
  return out;
}

inline EvalCorpora generate_eval_corpora(const SemanticLexicon& lex, const CorpusSection& c) {
  EvalCorpora e;
  for (Language l : c.eval_langs) e.parallel[l] = eval_parallel_pairs(lex, c, c.eval_pivot, l);
  for (const auto& spec : c.sts_pairs) {
    const auto [a, b] = parse_lang_pair(spec);
    e.sts[spec] = gen_sts(lex, c.sts_count, a, b, derive_seed(c.seed, "sts:" + spec));
  }
  e.topics = gen_topics(lex, c.topics_count, c.topics_lang, c.topics_k, derive_seed(c.seed, "topics"));
  e.probe = probe_sentences(lex, c);
  return e;
}

inline TrainingCorpora generate_training_corpora(const SemanticLexicon& lex,
                                                 const CorpusSection& c) {
  TrainingCorpora t;
  t.unsupervised = gen_sentences(lex, c.unsupervised_count, c.unsupervised_lang,
                                 derive_seed(c.seed, "unsupervised"));
  t.nli = gen_nli(lex, c.nli_count, {c.nli_lang}, false, derive_seed(c.seed, "nli"));
  t.xnli = gen_nli(lex, c.xnli_count, c.xnli_pool, true, derive_seed(c.seed, "xnli"));
  t.parallel = gen_parallel(lex, c.parallel_count, c.parallel_src, c.parallel_tgt,
                            derive_seed(c.seed, "parallel"));
  return t;
}

inline CorpusSet generate_corpora(const SemanticLexicon& lex, const CorpusSection& c) {
  return {generate_training_corpora(lex, c), generate_eval_corpora(lex, c)};
}

namespace files {

inline std::string eval_parallel(Language a, Language b) {
  return "eval_parallel_" + std::to_string(a) + "_" + std::to_string(b) + ".jsonl";
}
inline std::string sts(const std::string& spec) {
  const auto [a, b] = parse_lang_pair(spec);
  return "sts_" + std::to_string(a) + "_" + std::to_string(b) + ".jsonl";
}
inline constexpr const char* kUnsupervised = "unsupervised.jsonl";
inline constexpr const char* kNli = "nli.jsonl";
inline constexpr const char* kXnli = "xnli.jsonl";
inline constexpr const char* kParallel = "parallel.jsonl";
inline constexpr const char* kTopics = "topics.jsonl";
inline constexpr const char* kProbe = "probe.jsonl";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kCheckpoint = "checkpoint.bin";
inline constexpr const char* kLossLog = "loss.csv";
inline constexpr const char* kReports = "reports.json";

}  // namespace files

/// Writes every corpus and returns (file name, record count) pairs.
inline std::vector<std::pair<std::string, std::size_t>> write_corpora(
    const std::filesystem::path& dir, const CorpusSet& s, const CorpusSection& c) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, std::size_t>> out;
  write_sentences(dir / files::kUnsupervised, s.train.unsupervised);
  out.emplace_back(files::kUnsupervised, s.train.unsupervised.size());
  write_pairs(dir / files::kNli, s.train.nli);
  out.emplace_back(files::kNli, s.train.nli.size());
  write_pairs(dir / files::kXnli, s.train.xnli);
  out.emplace_back(files::kXnli, s.train.xnli.size());
  write_pairs(dir / files::kParallel, s.train.parallel);
  out.emplace_back(files::kParallel, s.train.parallel.size());
  for (const auto& [l, pairs] : s.eval.parallel) {
    const std::string name = files::eval_parallel(c.eval_pivot, l);
    write_pairs(dir / name, pairs);
    out.emplace_back(name, pairs.size());
  }
  for (const auto& [spec, pairs] : s.eval.sts) {
    const std::string name = files::sts(spec);
    write_pairs(dir / name, pairs);
    out.emplace_back(name, pairs.size());
  }
  write_labeled(dir / files::kTopics, s.eval.topics);
  out.emplace_back(files::kTopics, s.eval.topics.size());
  write_labeled(dir / files::kProbe, s.eval.probe);
  out.emplace_back(files::kProbe, s.eval.probe.size());
  return out;
}

/// Loads only the corpora that the training mix draws from.
inline TrainingCorpora read_training_corpora(const std::filesystem::path& dir,
                                             const TrainSection& t) {
  TrainingCorpora c;
  if (t.mix_unsupervised > 0.0) c.unsupervised = read_sentences(dir / files::kUnsupervised);
  if (t.mix_nli > 0.0) c.nli = read_pairs(dir / files::kNli);
  if (t.mix_xnli > 0.0) c.xnli = read_pairs(dir / files::kXnli);
  if (t.mix_parallel > 0.0) c.parallel = read_pairs(dir / files::kParallel);
  return c;
}

inline EvalCorpora read_eval_corpora(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
  EvalCorpora e;
  const auto& c = cfg.corpus;
  const auto& v = cfg.eval;
  if (v.wants("retrieval") || v.wants("mining")) {
    for (Language l : c.eval_langs) e.parallel[l] = read_pairs(dir / files::eval_parallel(c.eval_pivot, l));
  }
  if (v.wants("sts")) {
    for (const auto& spec : c.sts_pairs) e.sts[spec] = read_pairs(dir / files::sts(spec));
  }
  if (v.wants("clustering")) e.topics = read_labeled(dir / files::kTopics);
  if (v.wants("probe")) e.probe = read_labeled(dir / files::kProbe);
  return e;
}

/// Every sentence must be non-empty with token ids inside the table.
inline void check_vocab(const std::vector<const Sentence*>& sentences, std::size_t rows,
                        const std::string& what) {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const Sentence& s = *sentences[i];
    if (s.tokens.empty()) throw EmptySentenceError(what + ": record " + std::to_string(i) + " is empty");
    for (TokenId t : s.tokens) {
      if (t >= rows) {
        throw VocabularyError(what + ": record " + std::to_string(i) + " has token id " +
                              std::to_string(t) + " outside the table of " +
                              std::to_string(rows) + " rows");
      }
    }
  }
}

inline void check_training_vocab(const TrainingCorpora& c, std::size_t rows) {
  std::vector<const Sentence*> v;
  for (const auto& s : c.unsupervised) v.push_back(&s);
  check_vocab(v, rows, files::kUnsupervised);
  auto pairs = [&](const std::vector<PairRecord>& ps, const char* name) {
    std::vector<const Sentence*> xs;
    for (const auto& r : ps) {
      xs.push_back(&r.a);
      xs.push_back(&r.b);
      if (r.neg) xs.push_back(&*r.neg);
    }
    check_vocab(xs, rows, name);
  };
  pairs(c.nli, files::kNli);
  pairs(c.xnli, files::kXnli);
  pairs(c.parallel, files::kParallel);
}

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalReport {
  std::string metric;
  double value = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  Json breakdown = Json::object();
};

inline void check_range(const EvalReport& r) {
  if (!std::isfinite(r.value) || r.value < r.lower || r.value > r.upper) {
    throw Error("metric " + r.metric + " = " + std::to_string(r.value) + " outside [" +
                std::to_string(r.lower) + ", " + std::to_string(r.upper) + "]");
  }
}

inline EmbeddingSet embed_set(const Encoder& enc, const std::vector<Sentence>& xs,
                              std::vector<RowMeta> meta) {
  return EmbeddingSet(enc.embed(xs), std::move(meta));
}

inline std::string lang_pair_key(Language a, Language b) {
  return std::to_string(a) + "-" + std::to_string(b);
}

struct ParallelPools {
  EmbeddingSet src, tgt;
};

inline ParallelPools embed_parallel(const Encoder& enc, const std::vector<PairRecord>& pairs) {
  std::vector<Sentence> a, b;
  std::vector<RowMeta> ma, mb;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    a.push_back(pairs[i].a);
    b.push_back(pairs[i].b);
    ma.push_back({pairs[i].a.lang, static_cast<std::int64_t>(i), -1});
    mb.push_back({pairs[i].b.lang, static_cast<std::int64_t>(i), -1});
  }
  return {embed_set(enc, a, ma), embed_set(enc, b, mb)};
}

inline EvalReport eval_retrieval(const Encoder& enc, const EvalCorpora& e, Language pivot) {
  EvalReport r{"retrieval_accuracy"};
  if (e.parallel.empty()) throw ContractError("retrieval needs at least one entry in eval_langs");
  double total = 0.0;
  for (const auto& [l, pairs] : e.parallel) {
    const auto pools = embed_parallel(enc, pairs);
    const auto acc = retrieval_accuracy(pools.src, pools.tgt);
    r.breakdown[lang_pair_key(pivot, l)] = {
        {"src_to_tgt", acc.src_to_tgt}, {"tgt_to_src", acc.tgt_to_src}, {"mean", acc.mean}};
    total += acc.mean;
  }
  r.value = total / static_cast<double>(e.parallel.size());
  return r;
}

/// Mining pools: the first n - 2m pairs are gold, the next m contribute a
/// source-only distractor and the last m a target-only distractor.
inline MiningResult mine_parallel(const Encoder& enc, const std::vector<PairRecord>& pairs,
                                  std::size_t distractors, const MiningOptions& opt) {
  const std::size_t n = pairs.size(), m = distractors;
  if (2 * m >= n) throw ContractError("mining needs more pairs than 2 * distractors");
  const std::size_t g = n - 2 * m;
  std::vector<Sentence> src, tgt;
  std::vector<RowMeta> ms, mt;
  for (std::size_t i = 0; i < g + m; ++i) {
    src.push_back(pairs[i].a);
    ms.push_back({pairs[i].a.lang, i < g ? static_cast<std::int64_t>(i) : -1, -1});
  }
  for (std::size_t i = 0; i < g; ++i) {
    tgt.push_back(pairs[i].b);
    mt.push_back({pairs[i].b.lang, static_cast<std::int64_t>(i), -1});
  }
  for (std::size_t i = g + m; i < n; ++i) {
    tgt.push_back(pairs[i].b);
    mt.push_back({pairs[i].b.lang, -1, -1});
  }
  std::vector<std::pair<std::size_t, std::size_t>> gold;
  for (std::size_t i = 0; i < g; ++i) gold.emplace_back(i, i);
  return mine_bitext(embed_set(enc, src, ms), embed_set(enc, tgt, mt), gold, opt);
}

inline EvalReport eval_mining(const Encoder& enc, const EvalCorpora& e, Language pivot,
                              const EvalSection& v) {
  EvalReport r{"bitext_f1"};
  if (e.parallel.empty()) throw ContractError("mining needs at least one entry in eval_langs");
  double total = 0.0;
  for (const auto& [l, pairs] : e.parallel) {
    const auto m = mine_parallel(enc, pairs, v.mining_distractors, MiningOptions{v.mining_grid});
    r.breakdown[lang_pair_key(pivot, l)] = {{"f1", m.f1},
                                            {"precision", m.precision},
                                            {"recall", m.recall},
                                            {"threshold", m.threshold},
                                            {"candidates", m.candidates},
                                            {"no_candidates", m.no_candidates}};
    total += m.f1;
  }
  r.value = total / static_cast<double>(e.parallel.size());
  return r;
}

inline EvalReport eval_sts(const Encoder& enc, const EvalCorpora& e) {
  EvalReport r{"sts_spearman", 0.0, -1.0, 1.0};
  if (e.sts.empty()) throw ContractError("sts needs at least one entry in sts_pairs");
  double total = 0.0;
  for (const auto& [spec, pairs] : e.sts) {
    const double rho = sts_eval(enc, pairs);
    r.breakdown[spec] = rho;
    total += rho;
  }
  r.value = total / static_cast<double>(e.sts.size());
  return r;
}

inline EvalReport eval_clustering(const Encoder& enc, const EvalCorpora& e, const ExperimentConfig& cfg) {
  EvalReport r{"clustering_purity"};
  std::vector<Sentence> xs;
  std::vector<RowMeta> meta;
  std::vector<int> labels;
  for (const auto& t : e.topics) {
    xs.push_back(t.sentence);
    meta.push_back({t.sentence.lang, -1, t.label});
    labels.push_back(t.label);
  }
  const EmbeddingSet set = embed_set(enc, xs, meta);
  KMeansOptions opt;
  opt.k = cfg.corpus.topics_k;
  opt.seed = derive_seed(cfg.eval.seed, "kmeans");
  opt.restarts = cfg.eval.kmeans_restarts;
  opt.max_iterations = cfg.eval.kmeans_max_iter;
  const auto c = kmeans_purity(set.matrix(), labels, opt);
  r.value = c.purity.purity;
  r.breakdown = {{"macro_purity", c.purity.macro_purity}, {"inertia", c.inertia}, {"k", opt.k}};
  return r;
}

/// Train/test split by semantic item, so no content is shared across the
/// split; every item contributes one sentence per language.
inline EvalReport eval_probe(const Encoder& enc, const EvalCorpora& e, const EvalSection& v) {
  EvalReport r{"language_probe_accuracy"};
  std::vector<int> items;
  for (const auto& p : e.probe) {
    if (std::find(items.begin(), items.end(), p.label) == items.end()) items.push_back(p.label);
  }
  std::sort(items.begin(), items.end());
  Rng rng(derive_seed(v.seed, "probe_split"));
  rng.shuffle(items);
  const auto n_train = static_cast<std::size_t>(v.probe_train_fraction * static_cast<double>(items.size()));
  const std::set<int> train_items(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));

  std::vector<Sentence> xs;
  std::vector<RowMeta> meta;
  for (const auto& p : e.probe) {
    xs.push_back(p.sentence);
    meta.push_back({p.sentence.lang, p.label, p.label});
  }
  const EmbeddingSet all = embed_set(enc, xs, meta);
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < e.probe.size(); ++i) {
    (train_items.count(e.probe[i].label) ? tr : te).push_back(i);
  }
  const auto res = language_probe(all.subset(tr), all.subset(te), ProbeOptions{v.probe_epochs, v.probe_lr});
  r.value = res.accuracy;
  r.breakdown = {{"classes", res.classes},
                 {"chance", 1.0 / static_cast<double>(res.classes)},
                 {"final_train_loss", res.final_train_loss},
                 {"train_rows", tr.size()},
                 {"test_rows", te.size()}};
  return r;
}

inline std::vector<EvalReport> evaluate(const ExperimentConfig& cfg, const EncoderParams& params,
                                        const EvalCorpora& e) {
  const Encoder enc(params, false);
  std::vector<EvalReport> out;
  const auto& v = cfg.eval;
  if (v.wants("retrieval")) out.push_back(eval_retrieval(enc, e, cfg.corpus.eval_pivot));
  if (v.wants("mining")) out.push_back(eval_mining(enc, e, cfg.corpus.eval_pivot, v));
  if (v.wants("sts")) out.push_back(eval_sts(enc, e));
  if (v.wants("clustering")) out.push_back(eval_clustering(enc, e, cfg));
  if (v.wants("probe")) out.push_back(eval_probe(enc, e, v));
  for (const auto& r : out) check_range(r);
  return out;
}

inline Json reports_to_json(const std::vector<EvalReport>& reports, const ExperimentConfig& cfg) {
  Json arr = Json::array();
  const std::string hash = config_hash(cfg);
  for (const auto& r : reports) {
    check_range(r);
    arr.push_back({{"metric", r.metric},
                   {"value", r.value},
                   {"range", {r.lower, r.upper}},
                   {"breakdown", r.breakdown},
                   {"config_hash", hash},
                   {"seed", cfg.experiment.seed}});
  }
  return arr;
}

inline const EvalReport* find_report(const std::vector<EvalReport>& rs, const std::string& metric) {
  for (const auto& r : rs) {
    if (r.metric == metric) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Manifests.

inline std::string mix_label(const TrainSection& t, const CorpusSection& c) {
  std::string out;
  const std::pair<const char*, double> parts[] = {{"unsupervised", t.mix_unsupervised},
                                                  {"nli", t.mix_nli},
                                                  {"xnli", t.mix_xnli},
                                                  {"parallel", t.mix_parallel}};
  std::size_t active = 0;
  for (const auto& [n, w] : parts) active += w > 0.0;
  for (const auto& [name, w] : parts) {
    if (!(w > 0.0)) continue;
    if (!out.empty()) out += "+";
    out += name;
    if (std::string(name) == "xnli") out += "{" + detail::join_langs(c.xnli_pool) + "}";
    if (std::string(name) == "nli") out += "{" + std::to_string(c.nli_lang) + "}";
    if (std::string(name) == "parallel") {
      out += "{" + std::to_string(c.parallel_src) + "," + std::to_string(c.parallel_tgt) + "}";
    }
    if (active > 1) out += "=" + detail::format_double(w);
  }
  return out;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline Json make_manifest(const std::string& command, const ExperimentConfig& cfg,
                          const std::filesystem::path& dir, const std::vector<std::string>& artifacts,
                          double seconds, Json metrics = Json::object()) {
  Json arts = Json::array();
  for (const auto& a : artifacts) {
    arts.push_back({{"path", a}, {"sha256", sha256_hex(read_file_bytes(dir / a))}});
  }
  return {{"tool", kToolName},
          {"tool_version", kToolVersion},
          {"command", command},
          {"experiment", cfg.experiment.name},
          {"strategy", mix_label(cfg.train, cfg.corpus)},
          {"config_hash", config_hash(cfg)},
          {"config", serialize_config(cfg)},
          {"seed", cfg.experiment.seed},
          {"artifacts", arts},
          {"wall_clock_seconds", seconds},
          {"metrics", std::move(metrics)}};
}

// ---------------------------------------------------------------------------
// Commands.

inline std::filesystem::path corpus_dir(const std::filesystem::path& out) { return out / "corpus"; }
inline std::filesystem::path train_dir(const std::filesystem::path& out) { return out / "train"; }

inline Json cmd_gen(const ExperimentConfig& cfg, const std::filesystem::path& out, const Log& log = {}) {
  Stopwatch clock;
  const World w = make_world(cfg);
  const CorpusSet corpora = generate_corpora(w.lexicon, cfg.corpus);
  const auto dir = corpus_dir(out);
  const auto counts = write_corpora(dir, corpora, cfg.corpus);
  Json metrics = Json::object();
  std::vector<std::string> names;
  for (const auto& [name, n] : counts) {
    metrics[name] = n;
    names.push_back(name);
  }
  if (log) log("wrote " + std::to_string(names.size()) + " corpus files to " + dir.string());
  Json m = make_manifest("gen", cfg, dir, names, clock.seconds(), {{"record_counts", metrics}});
  write_json_file(dir / files::kManifest, m);
  return m;
}

inline Json cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out, const Log& log = {}) {
  Stopwatch clock;
  const World w = make_world(cfg);
  const TrainingCorpora corpora = read_training_corpora(corpus_dir(out), cfg.train);
  check_training_vocab(corpora, w.untrained.token_table.rows());
  const auto dir = train_dir(out);
  std::filesystem::create_directories(dir);
  StepObserver observer;
  if (log) {
    observer = [&log](std::size_t step, double loss, const EncodingPlan&) {
      if (step == 1 || step % 100 == 0) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "step %zu loss %.6f", step, loss);
        log(buf);
      }
    };
  }
  const TrainResult res = train(cfg.train.train(), corpora, w.untrained, dir / files::kCheckpoint, observer);
  write_loss_log(res.step_losses, dir / files::kLossLog);
  Json metrics = {{"steps", res.step_losses.size()}, {"epochs_completed", res.epochs_completed}};
  if (!res.step_losses.empty()) {
    metrics["first_loss"] = res.step_losses.front();
    metrics["final_loss"] = res.step_losses.back();
  }
  Json m = make_manifest("train", cfg, dir, {files::kCheckpoint, files::kLossLog}, clock.seconds(), metrics);
  write_json_file(dir / files::kManifest, m);
  return m;
}

/// nullopt checkpoint: the untrained encoder.
inline EncoderParams load_model(const ExperimentConfig& cfg, const World& w,
                                const std::optional<std::filesystem::path>& checkpoint) {
  if (!checkpoint) return w.untrained;
  EncoderParams p = load_checkpoint(*checkpoint);
  check_checkpoint_shapes(p, w.untrained.token_table.rows(), cfg.init.dim, cfg.encoder.output_dim);
  return p;
}

inline Json cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& out,
                     const std::optional<std::filesystem::path>& checkpoint,
                     const std::string& tag = "", const Log& log = {}) {
  Stopwatch clock;
  const World w = make_world(cfg);
  const EncoderParams p = load_model(cfg, w, checkpoint);
  const EvalCorpora e = read_eval_corpora(corpus_dir(out), cfg);
  const auto reports = evaluate(cfg, p, e);
  const auto dir = out / (tag.empty() ? std::string("eval") : "eval-" + tag);
  std::filesystem::create_directories(dir);
  const Json j = reports_to_json(reports, cfg);
  write_json_file(dir / files::kReports, j);
  Json summary = Json::object();
  for (const auto& r : reports) {
    summary[r.metric] = r.value;
    if (log) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%-26s %.6f", r.metric.c_str(), r.value);
      log(buf);
    }
  }
  Json m = make_manifest("eval", cfg, dir, {files::kReports}, clock.seconds(), summary);
  m["model"] = checkpoint ? checkpoint->string() : std::string("untrained");
  m["tag"] = tag;
  write_json_file(dir / files::kManifest, m);
  return m;
}

// ---------------------------------------------------------------------------
// Parallel-count ablation.

struct AblationRun {
  std::size_t count = 0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  RetrievalResult retrieval;
  std::size_t steps = 0;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::vector<double> mean_accuracy;  // per count
  double trend_spearman = 0.0;        // count rank vs mean-accuracy rank
};

/// Training config for one ablation cell: English NLI plus `count` parallel
/// pairs mixed in proportion to corpus size, hard negatives always dropped.
inline TrainConfig ablation_train_config(const ExperimentConfig& cfg, std::size_t count) {
  TrainConfig t = cfg.train.train();
  StrategyMix mix;
  const double n_nli = static_cast<double>(cfg.corpus.nli_count);
  const double total = n_nli + static_cast<double>(count);
  mix[Strategy::kNli] = n_nli / total;
  mix[Strategy::kParallel] = static_cast<double>(count) / total;
  t.mix = mix;
  t.drop_hard_negatives = true;
  return t;
}

inline AblationResult run_ablation(const ExperimentConfig& base, const std::vector<std::size_t>& counts,
                                   const Log& log = {}) {
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] <= counts[i - 1]) throw ConfigError("[ablation].counts must be strictly ascending");
  }
  if (counts.empty()) throw ConfigError("[ablation].counts must not be empty");
  AblationResult out;
  out.mean_accuracy.assign(counts.size(), 0.0);
  for (std::size_t r = 0; r < base.ablation.repeats; ++r) {
    const std::uint64_t seed = derive_seed(base.ablation.seed, r);
    const ExperimentConfig cfg = with_seed(base, seed);
    const World w = make_world(cfg);
    const auto& c = cfg.corpus;
    TrainingCorpora corpora;
    corpora.nli = gen_nli(w.lexicon, c.nli_count, {c.nli_lang}, false, derive_seed(c.seed, "nli"));
    const auto all_parallel = gen_parallel(w.lexicon, counts.back(), c.parallel_src, c.parallel_tgt,
                                           derive_seed(c.seed, "parallel"));
    const auto eval_pairs = eval_parallel_pairs(w.lexicon, c, c.parallel_src, c.parallel_tgt);
    for (std::size_t k = 0; k < counts.size(); ++k) {
      corpora.parallel.assign(all_parallel.begin(),
                              all_parallel.begin() + static_cast<std::ptrdiff_t>(counts[k]));
      const TrainResult res = train(ablation_train_config(cfg, counts[k]), corpora, w.untrained);
      const Encoder enc(res.params, false);
      const auto pools = embed_parallel(enc, eval_pairs);
      AblationRun run{counts[k], r, seed, retrieval_accuracy(pools.src, pools.tgt), res.step_losses.size()};
      out.mean_accuracy[k] += run.retrieval.mean / static_cast<double>(base.ablation.repeats);
      if (log) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "repeat %zu count %zu retrieval %.4f", r, counts[k],
                      run.retrieval.mean);
        log(buf);
      }
      out.runs.push_back(run);
    }
  }
  if (counts.size() >= 2) {
    std::vector<double> ranks(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) ranks[i] = static_cast<double>(i);
    out.trend_spearman = spearman_rho(out.mean_accuracy, ranks);
  }
  return out;
}

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline Json cmd_ablate_parallel(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                const std::vector<std::size_t>& counts, const Log& log = {}) {
  Stopwatch clock;
  const AblationResult res = run_ablation(cfg, counts, log);
  const auto dir = out / "ablation";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "ablation.csv", std::ios::binary | std::ios::trunc);
    f << "count,mean_retrieval_accuracy,repeats\n";
    for (std::size_t k = 0; k < counts.size(); ++k) {
      f << counts[k] << "," << fmt17(res.mean_accuracy[k]) << "," << cfg.ablation.repeats << "\n";
    }
  }
  {
    std::ofstream f(dir / "runs.csv", std::ios::binary | std::ios::trunc);
    f << "count,repeat,seed,src_to_tgt,tgt_to_src,mean,steps\n";
    for (const auto& r : res.runs) {
      f << r.count << "," << r.repeat << "," << r.seed << "," << fmt17(r.retrieval.src_to_tgt) << ","
        << fmt17(r.retrieval.tgt_to_src) << "," << fmt17(r.retrieval.mean) << "," << r.steps << "\n";
    }
  }
  Json metrics = {{"counts", counts},
                  {"mean_retrieval_accuracy", res.mean_accuracy},
                  {"trend_spearman", res.trend_spearman},
                  {"language_pair", lang_pair_key(cfg.corpus.parallel_src, cfg.corpus.parallel_tgt)}};
  Json m = make_manifest("ablate-parallel", cfg, dir, {"ablation.csv", "runs.csv"}, clock.seconds(), metrics);
  write_json_file(dir / files::kManifest, m);
  return m;
}

// ---------------------------------------------------------------------------
// Projection export.

inline Json cmd_project(const ExperimentConfig& cfg, const std::filesystem::path& out,
                        const std::optional<std::filesystem::path>& checkpoint,
                        const std::string& tag = "", const Log& log = {}) {
  Stopwatch clock;
  const World w = make_world(cfg);
  const EncoderParams p = load_model(cfg, w, checkpoint);
  const auto probe = read_labeled(corpus_dir(out) / files::kProbe);
  std::vector<Sentence> xs;
  for (const auto& s : probe) xs.push_back(s.sentence);
  if (xs.size() < 2) throw DataError("projection needs at least two probe sentences");
  const Encoder enc(p, false);
  const Projection proj = pca_project(enc.embed(xs), 2);
  const auto dir = out / (tag.empty() ? std::string("projection") : "projection-" + tag);
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "projection.csv", std::ios::binary | std::ios::trunc);
    f << "x,y,lang,label\n";
    for (std::size_t i = 0; i < probe.size(); ++i) {
      f << fmt17(proj.coords(i, 0)) << "," << fmt17(proj.coords(i, 1)) << "," << probe[i].sentence.lang
        << "," << probe[i].label << "\n";
    }
  }
  if (log) log("projected " + std::to_string(xs.size()) + " sentences");
  Json m = make_manifest("project", cfg, dir, {"projection.csv"}, clock.seconds(),
                         {{"explained_ratio", proj.explained_ratio}});
  m["model"] = checkpoint ? checkpoint->string() : std::string("untrained");
  write_json_file(dir / files::kManifest, m);
  return m;
}

}  // namespace msim
