#pragma once
// Flat dotted-key run configuration: built-in defaults, then "key = value"
// lines from an optional config file, then command-line overrides. The whole
// config is validated before any stage runs, and every command echoes the
// fully-resolved key set into its output artifact.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pfdet/errors.hpp"
#include "pfdet/strings.hpp"

namespace pfdet {

struct RunConfig {
  // concept bank
  std::string bank_path;        // empty -> built-in default bank
  std::string bank_out = "bank.txt";
  std::string bank_query;       // empty -> default retrieval query
  bool bank_retrieve = false;

  // LLM client
  std::string llm_endpoint;     // e.g. http://127.0.0.1:8080/complete
  std::int64_t llm_timeout_seconds = 30;

  // encoders
  std::string encoder_kind = "toy";
  std::uint64_t encoder_seed = 0;
  std::int64_t encoder_dim = 16;
  std::int64_t encoder_vocab = 4096;

  // prompt context
  std::int64_t context_n = 1;
  double context_init_std = 0.02;
  std::uint64_t context_seed = 0;

  // classifier
  double classifier_tau = 0.01;

  // stage-1 training
  double train_learning_rate = 1e-4;
  std::int64_t train_batch_size = 256;
  std::int64_t train_epochs = 25;
  std::uint64_t train_seed = 0;

  // stage-2 test-time tuning
  double ttp_learning_rate = 5e-5;
  std::int64_t ttp_batch_size = 128;
  std::int64_t ttp_steps = 10;
  std::int64_t ttp_rounds = 1;
  double ttp_t_real = 0.999;
  double ttp_t_fake = 0.5;
  std::int64_t ttp_top_k = 128;
  std::uint64_t ttp_seed = 0;

  // data / cache
  std::string data_augment = "standard";  // standard | none
  std::uint64_t data_seed = 0;

  // artifact paths (resolved relative to the working directory)
  std::string paths_data_root;
  std::string paths_manifest = "manifest.tsv";
  std::string paths_cache = "embeddings.pfemb";
  std::string paths_checkpoint = "context.pfctx";
  std::string paths_train_log = "train.log";
  std::string paths_ttp_checkpoint = "context_ttp.pfctx";
  std::string paths_ttp_log = "ttp.log";
  std::string paths_pseudo_manifest = "pseudo.tsv";
  std::string paths_report = "report.txt";
  std::string paths_sweep_out = "sweep.txt";

  // sweep harness
  std::string sweep_param;
  std::string sweep_values;  // comma-separated grid

  // synthetic dataset generator
  std::string synth_out = "data";
  std::uint64_t synth_seed = 0;
  std::int64_t synth_image_size = 16;
  std::int64_t synth_train_per_class = 256;
  std::int64_t synth_test_per_class = 128;
  double synth_amplitude = 0.2;
  double synth_noise = 0.08;
  double synth_shift_mild = 0.3;
  double synth_shift_strong = 0.6;
};

namespace detail {

struct ConfigKey {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigKey>& config_registry() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    const auto add_string = [&](const std::string& name, std::string RunConfig::* field) {
      k.push_back({name, [field](RunConfig& c, const std::string& v) { c.*field = v; },
                   [field](const RunConfig& c) { return c.*field; }});
    };
    const auto add_bool = [&](const std::string& name, bool RunConfig::* field) {
      k.push_back({name,
                   [field, name](RunConfig& c, const std::string& v) {
                     if (v == "true" || v == "1")
                       c.*field = true;
                     else if (v == "false" || v == "0")
                       c.*field = false;
                     else
                       fail(ErrorKind::Validation, "expected true/false for " + name + ", got '" + v + "'");
                   },
                   [field](const RunConfig& c) { return std::string(c.*field ? "true" : "false"); }});
    };
    const auto add_int = [&](const std::string& name, std::int64_t RunConfig::* field) {
      k.push_back({name,
                   [field, name](RunConfig& c, const std::string& v) { c.*field = parse_int(v, name); },
                   [field](const RunConfig& c) { return std::to_string(c.*field); }});
    };
    const auto add_u64 = [&](const std::string& name, std::uint64_t RunConfig::* field) {
      k.push_back({name,
                   [field, name](RunConfig& c, const std::string& v) {
                     const long long parsed = parse_int(v, name);
                     if (parsed < 0) fail(ErrorKind::Validation, name + " must be non-negative");
                     c.*field = static_cast<std::uint64_t>(parsed);
                   },
                   [field](const RunConfig& c) { return std::to_string(c.*field); }});
    };
    const auto add_double = [&](const std::string& name, double RunConfig::* field) {
      k.push_back({name,
                   [field, name](RunConfig& c, const std::string& v) { c.*field = parse_double(v, name); },
                   [field](const RunConfig& c) { return format_g17(c.*field); }});
    };

    add_string("bank.path", &RunConfig::bank_path);
    add_string("bank.out", &RunConfig::bank_out);
    add_string("bank.query", &RunConfig::bank_query);
    add_bool("bank.retrieve", &RunConfig::bank_retrieve);
    add_string("llm.endpoint", &RunConfig::llm_endpoint);
    add_int("llm.timeout_seconds", &RunConfig::llm_timeout_seconds);
    add_string("encoder.kind", &RunConfig::encoder_kind);
    add_u64("encoder.seed", &RunConfig::encoder_seed);
    add_int("encoder.dim", &RunConfig::encoder_dim);
    add_int("encoder.vocab", &RunConfig::encoder_vocab);
    add_int("context.n", &RunConfig::context_n);
    add_double("context.init_std", &RunConfig::context_init_std);
    add_u64("context.seed", &RunConfig::context_seed);
    add_double("classifier.tau", &RunConfig::classifier_tau);
    add_double("train.learning_rate", &RunConfig::train_learning_rate);
    add_int("train.batch_size", &RunConfig::train_batch_size);
    add_int("train.epochs", &RunConfig::train_epochs);
    add_u64("train.seed", &RunConfig::train_seed);
    add_double("ttp.learning_rate", &RunConfig::ttp_learning_rate);
    add_int("ttp.batch_size", &RunConfig::ttp_batch_size);
    add_int("ttp.steps", &RunConfig::ttp_steps);
    add_int("ttp.rounds", &RunConfig::ttp_rounds);
    add_double("ttp.t_real", &RunConfig::ttp_t_real);
    add_double("ttp.t_fake", &RunConfig::ttp_t_fake);
    add_int("ttp.top_k", &RunConfig::ttp_top_k);
    add_u64("ttp.seed", &RunConfig::ttp_seed);
    add_string("data.augment", &RunConfig::data_augment);
    add_u64("data.seed", &RunConfig::data_seed);
    add_string("paths.data_root", &RunConfig::paths_data_root);
    add_string("paths.manifest", &RunConfig::paths_manifest);
    add_string("paths.cache", &RunConfig::paths_cache);
    add_string("paths.checkpoint", &RunConfig::paths_checkpoint);
    add_string("paths.train_log", &RunConfig::paths_train_log);
    add_string("paths.ttp_checkpoint", &RunConfig::paths_ttp_checkpoint);
    add_string("paths.ttp_log", &RunConfig::paths_ttp_log);
    add_string("paths.pseudo_manifest", &RunConfig::paths_pseudo_manifest);
    add_string("paths.report", &RunConfig::paths_report);
    add_string("paths.sweep_out", &RunConfig::paths_sweep_out);
    add_string("sweep.param", &RunConfig::sweep_param);
    add_string("sweep.values", &RunConfig::sweep_values);
    add_string("synth.out", &RunConfig::synth_out);
    add_u64("synth.seed", &RunConfig::synth_seed);
    add_int("synth.image_size", &RunConfig::synth_image_size);
    add_int("synth.train_per_class", &RunConfig::synth_train_per_class);
    add_int("synth.test_per_class", &RunConfig::synth_test_per_class);
    add_double("synth.amplitude", &RunConfig::synth_amplitude);
    add_double("synth.noise", &RunConfig::synth_noise);
    add_double("synth.shift_mild", &RunConfig::synth_shift_mild);
    add_double("synth.shift_strong", &RunConfig::synth_shift_strong);
    return k;
  }();
  return keys;
}

inline const ConfigKey& find_key(const std::string& name) {
  for (const ConfigKey& k : config_registry())
    if (k.name == name) return k;
  fail(ErrorKind::Validation, "unknown config key: '" + name + "'");
}

}  // namespace detail

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  detail::find_key(key).set(cfg, value);
}

// Config file: UTF-8 "key = value" lines; '#' starts a comment.
inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, "config file not found: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim_copy(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Validation,
           "malformed config line " + std::to_string(line_no) + ": '" + line + "'");
    set_config_value(cfg, trim_copy(text.substr(0, eq)), trim_copy(text.substr(eq + 1)));
  }
}

// Fully-resolved config, in registry order, for artifact headers.
inline std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const detail::ConfigKey& k : detail::config_registry()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

// Whole-config validation; runs before any stage regardless of command.
inline void validate_config(const RunConfig& cfg) {
  if (cfg.encoder_kind != "toy")
    fail(ErrorKind::Validation,
         "encoder.kind '" + cfg.encoder_kind + "' is not available (only 'toy' ships; "
         "real backbones plug in through the encoder adapter contract)");
  if (cfg.encoder_dim < 2) fail(ErrorKind::Validation, "encoder.dim must be at least 2");
  if (cfg.encoder_vocab < 2) fail(ErrorKind::Validation, "encoder.vocab must be at least 2");
  if (cfg.context_n < 1) fail(ErrorKind::Validation, "context.n must be at least 1");
  if (!(cfg.context_init_std > 0.0)) fail(ErrorKind::Validation, "context.init_std must be positive");
  if (!(cfg.classifier_tau > 0.0)) fail(ErrorKind::Validation, "classifier.tau must be positive");
  if (!(cfg.train_learning_rate >= 0.0))
    fail(ErrorKind::Validation, "train.learning_rate must be non-negative");
  if (cfg.train_batch_size < 1) fail(ErrorKind::Validation, "train.batch_size must be at least 1");
  if (cfg.train_epochs < 1) fail(ErrorKind::Validation, "train.epochs must be at least 1");
  if (!(cfg.ttp_learning_rate >= 0.0))
    fail(ErrorKind::Validation, "ttp.learning_rate must be non-negative");
  if (cfg.ttp_batch_size < 1) fail(ErrorKind::Validation, "ttp.batch_size must be at least 1");
  if (cfg.ttp_steps < 1) fail(ErrorKind::Validation, "ttp.steps must be at least 1");
  if (cfg.ttp_rounds < 1) fail(ErrorKind::Validation, "ttp.rounds must be at least 1");
  if (!(cfg.ttp_t_real > 0.0 && cfg.ttp_t_real < 1.0))
    fail(ErrorKind::Validation, "ttp.t_real must lie in (0, 1)");
  if (!(cfg.ttp_t_fake > 0.0 && cfg.ttp_t_fake < 1.0))
    fail(ErrorKind::Validation, "ttp.t_fake must lie in (0, 1)");
  if (cfg.ttp_t_real + cfg.ttp_t_fake < 1.0)
    fail(ErrorKind::Validation,
         "ttp.t_real + ttp.t_fake must be >= 1 (selected sets must stay disjoint)");
  if (cfg.ttp_top_k < 1) fail(ErrorKind::Validation, "ttp.top_k must be at least 1");
  if (cfg.data_augment != "standard" && cfg.data_augment != "none")
    fail(ErrorKind::Validation, "data.augment must be 'standard' or 'none'");
  if (cfg.llm_timeout_seconds < 1)
    fail(ErrorKind::Validation, "llm.timeout_seconds must be at least 1");
  if (cfg.synth_image_size < 2) fail(ErrorKind::Validation, "synth.image_size must be at least 2");
  if (!cfg.sweep_param.empty()) {
    static const char* allowed[] = {"ttp.t_real", "ttp.t_fake", "ttp.top_k", "ttp.learning_rate"};
    bool ok = false;
    for (const char* a : allowed) ok = ok || cfg.sweep_param == a;
    if (!ok)
      fail(ErrorKind::Validation,
           "sweep.param must be one of ttp.t_real, ttp.t_fake, ttp.top_k, ttp.learning_rate");
  }
}

}  // namespace pfdet
