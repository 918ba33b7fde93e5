#include "pudle/harness.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  bool force = false;
  int threads = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--out", args.out, "output directory (overrides config)");
  sub->add_flag("--force", args.force, "overwrite an existing run directory");
  sub->add_option("--threads", args.threads,
                  "worker threads (results do not depend on this)");
}

int run(const CommonArgs& args,
        const std::function<pudle::CommandResult(
            const pudle::RunConfig&, const std::filesystem::path&, bool)>& fn) {
  if (args.threads > 0) omp_set_num_threads(args.threads);
  pudle::RunConfig cfg = pudle::load_run_config(args.config);
  std::filesystem::path out = args.out.empty() ? cfg.output_dir : args.out;
  pudle::CommandResult result = fn(cfg, out, args.force);
  std::printf("%s\n", result.report.dump(2).c_str());
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pudle: unrolled dictionary learning lab"};
  app.set_version_flag("--version", pudle::kToolVersion);
  app.require_subcommand(1);

  CommonArgs gen_args, encode_args, train_args, theory_args, interpret_args;
  add_common(app.add_subcommand("gen", "generate a synthetic problem"),
             gen_args);
  add_common(app.add_subcommand("encode", "run the unrolled encoder"),
             encode_args);
  add_common(app.add_subcommand("train", "dictionary learning"), train_args);
  add_common(app.add_subcommand("theory", "theorem validators"), theory_args);
  add_common(app.add_subcommand("interpret", "representer-point reports"),
             interpret_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen")) return run(gen_args, pudle::cmd_gen);
    if (app.got_subcommand("encode")) return run(encode_args, pudle::cmd_encode);
    if (app.got_subcommand("train")) return run(train_args, pudle::cmd_train);
    if (app.got_subcommand("theory")) return run(theory_args, pudle::cmd_theory);
    if (app.got_subcommand("interpret"))
      return run(interpret_args, pudle::cmd_interpret);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pudle: error: %s\n", e.what());
    return 2;
  }
  return 2;
}
