#pragma once

#include "pudle/datagen.hpp"
#include "pudle/encoder.hpp"
#include "pudle/theory.hpp"
#include "pudle/trainer.hpp"
#include "pudle/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace pudle {

inline constexpr const char* kToolVersion = "0.1.0";

/// Size guards enforced before any compute.
inline constexpr long kTrainBudget = 1'000'000;        // m * p
inline constexpr Index kRepresenterBudget = 10'000;    // n

/// Schema-validated experiment configuration. Unknown keys anywhere in the
/// file are rejected. PUDLE_SEED in the environment overrides `seed`.
struct RunConfig {
  nlohmann::json raw;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  nlohmann::json problem;    // generation params or {"path": ...}
  nlohmann::json init;       // {"tau_b": ..., "seed": ...}
  nlohmann::json encoder;    // encoder + schedule
  nlohmann::json train;      // training loop
  nlohmann::json theory;     // experiment selection + assertions
  nlohmann::json interpret;  // representer reports
  nlohmann::json encode;     // encode-command extras
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const nlohmann::json& j);

SyntheticProblem resolve_problem(const RunConfig& cfg);
EncoderConfig resolve_encoder(const RunConfig& cfg);
TrainConfig resolve_train(const RunConfig& cfg, const nlohmann::json& over);
InitSpec resolve_init(const RunConfig& cfg);

struct CommandResult {
  int exit_code = 0;
  nlohmann::json report;
};

CommandResult cmd_gen(const RunConfig& cfg, const std::filesystem::path& out,
                      bool force);
CommandResult cmd_encode(const RunConfig& cfg,
                         const std::filesystem::path& out, bool force);
CommandResult cmd_train(const RunConfig& cfg, const std::filesystem::path& out,
                        bool force);
CommandResult cmd_theory(const RunConfig& cfg,
                         const std::filesystem::path& out, bool force);
CommandResult cmd_interpret(const RunConfig& cfg,
                            const std::filesystem::path& out, bool force);

void save_history_csv(const std::filesystem::path& path,
                      const TrainHistory& history);

}  // namespace pudle
