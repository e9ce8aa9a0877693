// pfdet: prompt-context learning for real-vs-synthetic image detection over
// frozen encoders, at desk scale.
//
// Usage: pfdet <command> [--config FILE] [--<key> <value> ...]
// Exit codes: 0 success, 2 config/validation error, 3 missing input artifact,
// 4 runtime failure.

#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "pfdet/config.hpp"
#include "pfdet/errors.hpp"
#include "pfdet/pipeline.hpp"

namespace {

void print_usage(std::ostream& out) {
  out << "usage: pfdet <command> [--config FILE] [--<key> <value> ...]\n"
      << "\n"
      << "commands:\n"
      << "  build-prompts   build or extend the concept bank and verify the prompts\n"
      << "  build-cache     scan a dataset tree and encode every image once\n"
      << "  train           stage 1: optimize the prompt context on labeled data\n"
      << "  ttp             stage 2: pseudo-label the test cache and tune the context\n"
      << "  eval            score a cache with a checkpoint and report AUC/OA\n"
      << "  sweep           vary one ttp hyper-parameter over a grid\n"
      << "  synth           generate the seeded two-cluster benchmark dataset\n"
      << "\n"
      << "Options are dotted config keys, e.g. --ttp.top_k 128; the same keys can\n"
      << "live in a 'key = value' config file passed via --config. Flags override\n"
      << "the file, which overrides built-in defaults.\n";
}

struct ParsedArgs {
  std::string command;
  pfdet::RunConfig config;
};

ParsedArgs parse_args(int argc, char** argv) {
  if (argc < 2) {
    print_usage(std::cerr);
    pfdet::fail(pfdet::ErrorKind::Validation, "missing command");
  }
  ParsedArgs parsed;
  parsed.command = argv[1];

  // First pass: locate --config so file values load before flag overrides.
  std::vector<std::pair<std::string, std::string>> overrides;
  for (int i = 2; i < argc; ++i) {
    std::string arg = argv[i];
    if (!arg.starts_with("--"))
      pfdet::fail(pfdet::ErrorKind::Validation, "expected --key value, got '" + arg + "'");
    arg = arg.substr(2);
    std::string value;
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      value = arg.substr(eq + 1);
      arg = arg.substr(0, eq);
    } else {
      if (i + 1 >= argc)
        pfdet::fail(pfdet::ErrorKind::Validation, "flag --" + arg + " is missing a value");
      value = argv[++i];
    }
    if (arg == "config") {
      pfdet::apply_config_file(parsed.config, value);
    } else {
      overrides.emplace_back(arg, value);
    }
  }
  for (const auto& [key, value] : overrides)
    pfdet::set_config_value(parsed.config, key, value);
  return parsed;
}

int dispatch(const ParsedArgs& parsed) {
  const pfdet::RunConfig& cfg = parsed.config;
  pfdet::validate_config(cfg);
  if (parsed.command == "build-prompts") {
    pfdet::cmd_build_prompts(cfg);
  } else if (parsed.command == "build-cache") {
    pfdet::cmd_build_cache(cfg);
  } else if (parsed.command == "train") {
    pfdet::cmd_train(cfg);
  } else if (parsed.command == "ttp") {
    pfdet::cmd_ttp(cfg);
  } else if (parsed.command == "eval") {
    pfdet::cmd_eval(cfg);
  } else if (parsed.command == "sweep") {
    pfdet::cmd_sweep(cfg);
  } else if (parsed.command == "synth") {
    pfdet::cmd_synth(cfg);
  } else if (parsed.command == "help" || parsed.command == "--help" || parsed.command == "-h") {
    print_usage(std::cout);
  } else {
    print_usage(std::cerr);
    pfdet::fail(pfdet::ErrorKind::Validation, "unknown command: '" + parsed.command + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(parse_args(argc, argv));
  } catch (const pfdet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case pfdet::ErrorKind::Config:
      case pfdet::ErrorKind::Validation:
        return 2;
      case pfdet::ErrorKind::NotFound:
        return 3;
      default:
        return 4;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
