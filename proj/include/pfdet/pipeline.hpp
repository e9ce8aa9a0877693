#pragma once
// Command implementations behind the CLI. Stages communicate only through
// files (bank, manifest, cache, checkpoint, pseudo manifest, report) so each
// is independently runnable and resumable; every command writes the fully
// resolved config into its artifact.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "pfdet/classifier.hpp"
#include "pfdet/concept_bank.hpp"
#include "pfdet/config.hpp"
#include "pfdet/data.hpp"
#include "pfdet/encoders.hpp"
#include "pfdet/image_ops.hpp"
#include "pfdet/kgp.hpp"
#include "pfdet/llm_http.hpp"
#include "pfdet/metrics.hpp"
#include "pfdet/synthetic.hpp"
#include "pfdet/text_pipeline.hpp"
#include "pfdet/ttp.hpp"

namespace pfdet {

namespace detail {

inline EncoderPair make_pair_from(const RunConfig& cfg) {
  // validate_config guarantees encoder.kind == "toy" for now; a real backbone
  // adapter would be constructed here.
  return make_toy_pair(cfg.encoder_seed, static_cast<std::size_t>(cfg.encoder_dim),
                       static_cast<std::size_t>(cfg.encoder_vocab));
}

inline ConceptBank bank_from(const RunConfig& cfg) {
  ConceptBank bank = cfg.bank_path.empty() ? default_bank() : load_bank(cfg.bank_path);
  if (!cfg.bank_query.empty()) bank.query = cfg.bank_query;
  return bank;
}

inline AugmentRecipe recipe_from(const RunConfig& cfg) {
  return cfg.data_augment == "none" ? AugmentRecipe::none() : AugmentRecipe::standard();
}

inline ClassifierConfig classifier_from(const RunConfig& cfg) { return {cfg.classifier_tau}; }

inline SelectionConfig selection_from(const RunConfig& cfg) {
  return {cfg.ttp_t_real, cfg.ttp_t_fake, static_cast<std::size_t>(cfg.ttp_top_k)};
}

inline TtpConfig ttp_from(const RunConfig& cfg) {
  TtpConfig t;
  t.learning_rate = cfg.ttp_learning_rate;
  t.batch_size = static_cast<std::size_t>(cfg.ttp_batch_size);
  t.steps = static_cast<std::size_t>(cfg.ttp_steps);
  t.rounds = static_cast<std::size_t>(cfg.ttp_rounds);
  t.seed = cfg.ttp_seed;
  return t;
}

inline TrainConfig train_from(const RunConfig& cfg) {
  TrainConfig t;
  t.learning_rate = cfg.train_learning_rate;
  t.batch_size = static_cast<std::size_t>(cfg.train_batch_size);
  t.epochs = static_cast<std::size_t>(cfg.train_epochs);
  t.seed = cfg.train_seed;
  return t;
}

inline void write_echo(std::ostream& out, const ConfigEcho& echo) {
  for (const auto& [key, value] : echo) out << "# " << key << " = " << value << "\n";
}

inline void verify_cache_binding(const DatasetManifest& manifest, const AugmentRecipe& recipe,
                                 const EncoderPair& pair, const EmbeddingCache& cache,
                                 const std::string& cache_path) {
  if (cache.dim() != pair.dim)
    fail(ErrorKind::Integrity, "embedding cache dimension does not match the encoder: " + cache_path);
  const auto expected = to_hex(cache_binding_digest(manifest, recipe.canonical(), pair.frozen_fingerprint));
  if (expected != cache.digest_hex())
    fail(ErrorKind::Integrity,
         "embedding cache digest mismatch (manifest, augmentation recipe, or encoder changed): " +
             cache_path);
}

inline std::vector<LabeledEmbedding> labeled_embeddings(const DatasetManifest& manifest,
                                                        const EmbeddingCache& cache) {
  std::vector<LabeledEmbedding> out;
  out.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) out.push_back({cache.get(e.sample_id), e.label});
  return out;
}

inline std::vector<ImageEmbedding> embeddings_only(const DatasetManifest& manifest,
                                                   const EmbeddingCache& cache) {
  std::vector<ImageEmbedding> out;
  out.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) out.push_back(cache.get(e.sample_id));
  return out;
}

// The checkpoint defines the context length; the encoder defines the width.
inline PromptContext load_checkpoint_for(const EncoderPair& pair, const std::string& path) {
  PromptContext ctx = load_context(path);
  if (ctx.width() != pair.text->token_width())
    fail(ErrorKind::Integrity,
         "checkpoint width does not match the encoder token width: " + path);
  return ctx;
}

inline std::vector<EvalRecord> score_records(const EncoderPair& pair, const PromptContext& ctx,
                                             const PromptSet& prompts,
                                             const DatasetManifest& manifest,
                                             const EmbeddingCache& cache,
                                             const ClassifierConfig& ccfg) {
  const Prototypes protos = compute_prototypes(pair, ctx, prompts);
  std::vector<EvalRecord> records;
  records.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    const ImageEmbedding x = cache.get(e.sample_id);
    const ProbabilityPair p = predict_proba(similarities(x, protos), ccfg);
    records.push_back({e.sample_id, e.label, p.p_fake, e.subset});
  }
  return records;
}

}  // namespace detail

// Builds (or loads) the concept bank, optionally extends it from the LLM
// endpoint, proves the prompts tokenize, and writes the bank artifact.
inline void cmd_build_prompts(const RunConfig& cfg, std::ostream& out = std::cout) {
  ConceptBank bank = detail::bank_from(cfg);
  if (cfg.bank_retrieve) {
    if (cfg.llm_endpoint.empty())
      fail(ErrorKind::Validation, "bank.retrieve requires llm.endpoint");
    HttpLlmClient client(cfg.llm_endpoint, static_cast<int>(cfg.llm_timeout_seconds));
    const std::string query = bank.query.empty() ? kDefaultQuery : bank.query;
    const RetrievalResult retrieved = retrieve_concepts(client, query);
    if (!retrieved.diagnostic.empty()) out << "retrieval note: " << retrieved.diagnostic << "\n";
    bank = merge_concepts(bank, retrieved.concepts);
  }
  const EncoderPair pair = detail::make_pair_from(cfg);
  const PromptSet prompts =
      build_prompts(*pair.text, bank, static_cast<std::size_t>(cfg.context_n));

  std::ofstream file(cfg.bank_out, std::ios::binary | std::ios::trunc);
  if (!file) fail(ErrorKind::Io, "cannot open bank file for writing: " + cfg.bank_out);
  file << serialize_bank(bank);
  detail::write_echo(file, config_echo(cfg));
  if (!file) fail(ErrorKind::Io, "failed writing bank file: " + cfg.bank_out);

  out << "bank: " << bank.fake_concepts.size() << " fake concepts, real word '"
      << bank.real_word.text << "'\n";
  out << "prompts: 1 real + " << prompts.fake_prompts.size() << " fake, context slots "
      << cfg.context_n << "\n";
  out << "wrote " << cfg.bank_out << "\n";
}

// Scans the dataset tree, writes the manifest, encodes every sample once
// (augment -> resize -> frozen encoder) and writes the embedding cache plus a
// '.meta' sidecar with the resolved config and binding digest.
inline void cmd_build_cache(const RunConfig& cfg, std::ostream& out = std::cout) {
  if (cfg.paths_data_root.empty())
    fail(ErrorKind::Validation, "paths.data_root is required for build-cache");
  std::vector<std::string> diagnostics;
  DatasetManifest manifest = scan_dataset(cfg.paths_data_root, &diagnostics);
  std::sort(diagnostics.begin(), diagnostics.end());
  save_manifest(manifest, cfg.paths_manifest);

  const EncoderPair pair = detail::make_pair_from(cfg);
  const AugmentRecipe recipe = detail::recipe_from(cfg);
  const CacheBuildResult result =
      build_cache(manifest, cfg.paths_data_root, pair, recipe, cfg.data_seed, cfg.paths_cache);

  std::ofstream meta(cfg.paths_cache + ".meta", std::ios::binary | std::ios::trunc);
  if (!meta) fail(ErrorKind::Io, "cannot open cache sidecar for writing");
  detail::write_echo(meta, config_echo(cfg));
  meta << "cache.count = " << result.count << "\n";
  meta << "cache.digest = " << result.digest_hex << "\n";
  meta << "cache.recipe = " << recipe.canonical() << "\n";
  meta << "encoder.fingerprint = " << pair.frozen_fingerprint << "\n";
  for (const std::string& d : diagnostics) meta << "diagnostic = " << d << "\n";
  if (!meta) fail(ErrorKind::Io, "failed writing cache sidecar");

  out << "manifest: " << manifest.entries.size() << " samples -> " << cfg.paths_manifest << "\n";
  for (const std::string& d : diagnostics) out << "note: " << d << "\n";
  out << "cache: " << result.count << " embeddings of dim " << pair.dim << " -> "
      << cfg.paths_cache << "\n";
}

// Stage 1: optimize the prompt context on the labeled training cache.
inline void cmd_train(const RunConfig& cfg, std::ostream& out = std::cout) {
  const DatasetManifest manifest = load_manifest(cfg.paths_manifest);
  const EmbeddingCache cache = EmbeddingCache::open(cfg.paths_cache);
  const EncoderPair pair = detail::make_pair_from(cfg);
  detail::verify_cache_binding(manifest, detail::recipe_from(cfg), pair, cache, cfg.paths_cache);

  const ConceptBank bank = detail::bank_from(cfg);
  const PromptSet prompts =
      build_prompts(*pair.text, bank, static_cast<std::size_t>(cfg.context_n));
  PromptContext context =
      init_context(cfg.context_seed, static_cast<std::size_t>(cfg.context_n),
                   pair.text->token_width(), cfg.context_init_std);

  const std::vector<LabeledEmbedding> data = detail::labeled_embeddings(manifest, cache);

  std::ofstream log(cfg.paths_train_log, std::ios::binary | std::ios::trunc);
  if (!log) fail(ErrorKind::Io, "cannot open training log for writing: " + cfg.paths_train_log);
  detail::write_echo(log, config_echo(cfg));
  log << "# columns: epoch\tstep\tloss\n";

  TrainReport report =
      train(context, data, pair, prompts, detail::train_from(cfg), detail::classifier_from(cfg), &log);
  if (!log) fail(ErrorKind::Io, "failed writing training log: " + cfg.paths_train_log);
  save_context(context, cfg.paths_checkpoint);
  report.checkpoint_path = cfg.paths_checkpoint;

  out << "trained " << report.steps << " steps over " << report.epoch_losses.size()
      << " epochs; final epoch loss " << format_g17(report.epoch_losses.back()) << "\n";
  out << "encoders frozen: "
      << (report.fingerprint_before == report.fingerprint_after ? "yes" : "NO") << "\n";
  out << "wrote " << cfg.paths_checkpoint << "\n";
}

// Stage 2: select confident pseudo-labeled test samples with the stage-1
// checkpoint, tune the context on them, and persist checkpoint + manifest.
inline void cmd_ttp(const RunConfig& cfg, std::ostream& out = std::cout) {
  const DatasetManifest manifest = load_manifest(cfg.paths_manifest);
  const EmbeddingCache cache = EmbeddingCache::open(cfg.paths_cache);
  const EncoderPair pair = detail::make_pair_from(cfg);
  detail::verify_cache_binding(manifest, detail::recipe_from(cfg), pair, cache, cfg.paths_cache);

  const ConceptBank bank = detail::bank_from(cfg);
  const PromptContext start = detail::load_checkpoint_for(pair, cfg.paths_checkpoint);
  const PromptSet prompts = build_prompts(*pair.text, bank, start.size());
  const std::vector<ImageEmbedding> embeddings = detail::embeddings_only(manifest, cache);

  std::ofstream log(cfg.paths_ttp_log, std::ios::binary | std::ios::trunc);
  if (!log) fail(ErrorKind::Io, "cannot open ttp log for writing: " + cfg.paths_ttp_log);
  detail::write_echo(log, config_echo(cfg));
  log << "# columns: pass\tstep\tloss\n";

  const TtpOutcome outcome =
      ttp_tune(start, embeddings, pair, prompts, detail::selection_from(cfg),
               detail::ttp_from(cfg), detail::classifier_from(cfg), &log);
  if (!log) fail(ErrorKind::Io, "failed writing ttp log: " + cfg.paths_ttp_log);

  save_context(outcome.context, cfg.paths_ttp_checkpoint);
  save_pseudo_manifest(outcome.pseudo, config_echo(cfg), cfg.paths_pseudo_manifest);

  if (outcome.skipped) out << "warning: " << outcome.warning << "\n";
  out << "selected " << outcome.pseudo.real_ids.size() << " real + "
      << outcome.pseudo.fake_ids.size() << " fake pseudo-labeled samples\n";
  out << "wrote " << cfg.paths_ttp_checkpoint << " and " << cfg.paths_pseudo_manifest << "\n";
}

// Scores a cache with a checkpoint and writes the per-subset metrics report.
inline void cmd_eval(const RunConfig& cfg, std::ostream& out = std::cout) {
  const DatasetManifest manifest = load_manifest(cfg.paths_manifest);
  const EmbeddingCache cache = EmbeddingCache::open(cfg.paths_cache);
  const EncoderPair pair = detail::make_pair_from(cfg);
  detail::verify_cache_binding(manifest, detail::recipe_from(cfg), pair, cache, cfg.paths_cache);

  const ConceptBank bank = detail::bank_from(cfg);
  const PromptContext context = detail::load_checkpoint_for(pair, cfg.paths_checkpoint);
  const PromptSet prompts = build_prompts(*pair.text, bank, context.size());

  const auto records = detail::score_records(pair, context, prompts, manifest, cache,
                                             detail::classifier_from(cfg));
  const MetricsReport report = make_report(records, config_echo(cfg));
  save_report(report, cfg.paths_report);

  out << "evaluated " << records.size() << " samples over " << report.subsets.size()
      << " subsets\n";
  out << "macro auc = " << (report.macro_auc ? format_g17(*report.macro_auc) : "undefined")
      << ", macro oa = " << format_g17(report.macro_oa) << "\n";
  out << "wrote " << cfg.paths_report << "\n";
}

// Varies exactly one hyper-parameter over a grid, re-running selection +
// tuning + evaluation from the fixed stage-1 checkpoint for each value, and
// writes one table row per value.
inline void cmd_sweep(const RunConfig& cfg, std::ostream& out = std::cout) {
  if (cfg.sweep_param.empty() || cfg.sweep_values.empty())
    fail(ErrorKind::Validation, "sweep requires sweep.param and sweep.values");
  std::vector<std::string> grid;
  for (const std::string& v : split(cfg.sweep_values, ',')) {
    const std::string value = trim_copy(v);
    if (!value.empty()) grid.push_back(value);
  }
  if (grid.empty()) fail(ErrorKind::Validation, "sweep.values contains no grid points");

  const DatasetManifest manifest = load_manifest(cfg.paths_manifest);
  const EmbeddingCache cache = EmbeddingCache::open(cfg.paths_cache);
  const EncoderPair pair = detail::make_pair_from(cfg);
  detail::verify_cache_binding(manifest, detail::recipe_from(cfg), pair, cache, cfg.paths_cache);

  const ConceptBank bank = detail::bank_from(cfg);
  const PromptContext start = detail::load_checkpoint_for(pair, cfg.paths_checkpoint);
  const PromptSet prompts = build_prompts(*pair.text, bank, start.size());
  const std::vector<ImageEmbedding> embeddings = detail::embeddings_only(manifest, cache);

  std::ofstream table(cfg.paths_sweep_out, std::ios::binary | std::ios::trunc);
  if (!table) fail(ErrorKind::Io, "cannot open sweep table for writing: " + cfg.paths_sweep_out);
  detail::write_echo(table, config_echo(cfg));
  table << "# columns: " << cfg.sweep_param << "\tauc\toa\tselected_real\tselected_fake\n";

  for (const std::string& value : grid) {
    RunConfig point = cfg;
    set_config_value(point, cfg.sweep_param, value);
    validate_config(point);

    const TtpOutcome outcome =
        ttp_tune(start, embeddings, pair, prompts, detail::selection_from(point),
                 detail::ttp_from(point), detail::classifier_from(point), nullptr);
    const auto records = detail::score_records(pair, outcome.context, prompts, manifest, cache,
                                               detail::classifier_from(point));
    const MetricsReport report = make_report(records);
    const std::string auc_text = report.macro_auc ? format_g17(*report.macro_auc) : "undefined";
    table << value << '\t' << auc_text << '\t' << format_g17(report.macro_oa) << '\t'
          << outcome.pseudo.real_ids.size() << '\t' << outcome.pseudo.fake_ids.size() << '\n';
    out << cfg.sweep_param << " = " << value << ": auc " << auc_text << ", oa "
        << format_g17(report.macro_oa) << "\n";
  }
  if (!table) fail(ErrorKind::Io, "failed writing sweep table: " + cfg.paths_sweep_out);
  out << "wrote " << cfg.paths_sweep_out << "\n";
}

// Convenience generator for the seeded two-cluster benchmark dataset.
inline void cmd_synth(const RunConfig& cfg, std::ostream& out = std::cout) {
  SyntheticConfig scfg;
  scfg.seed = cfg.synth_seed;
  scfg.image_size = static_cast<int>(cfg.synth_image_size);
  scfg.train_per_class = static_cast<std::size_t>(cfg.synth_train_per_class);
  scfg.test_per_class = static_cast<std::size_t>(cfg.synth_test_per_class);
  scfg.amplitude = cfg.synth_amplitude;
  scfg.noise_sigma = cfg.synth_noise;
  scfg.shift_mild = cfg.synth_shift_mild;
  scfg.shift_strong = cfg.synth_shift_strong;
  generate_synthetic_dataset(scfg, cfg.synth_out);

  std::ofstream meta(std::filesystem::path(cfg.synth_out) / "synth.meta",
                     std::ios::binary | std::ios::trunc);
  if (!meta) fail(ErrorKind::Io, "cannot open synth sidecar for writing");
  detail::write_echo(meta, config_echo(cfg));

  out << "wrote synthetic dataset under " << cfg.synth_out << " ("
      << 2 * scfg.train_per_class << " train, " << 4 * scfg.test_per_class << " test images)\n";
}

}  // namespace pfdet
