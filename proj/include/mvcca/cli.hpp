#pragma once

// Batch command-line front end. Each cmd_* wires files to the library and
// writes machine output to files or `out`, diagnostics to `err`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvcca/cca.hpp"
#include "mvcca/dataio.hpp"
#include "mvcca/metrics.hpp"

namespace mvcca::cli {

struct RunConfig {
  std::string subcommand;

  std::optional<std::filesystem::path> questions;
  std::optional<std::filesystem::path> answers;
  std::optional<std::filesystem::path> images;
  std::optional<std::filesystem::path> train_questions;
  std::optional<std::filesystem::path> train_answers;
  std::optional<std::filesystem::path> train_images;
  std::optional<std::filesystem::path> queries;
  std::optional<std::filesystem::path> candidates;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> table;
  std::optional<std::filesystem::path> text;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> report;

  CcaConfig cca;
  std::size_t k = 100;
  std::size_t top = 10;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool otsu = false;
  bool ndcg = false;
  std::size_t bins = kDefaultOtsuBins;
  Pooling pooling = Pooling::PresentMean;
  std::size_t max_tokens = kDefaultMaxTokens;
  bool verbose = false;

  SynthConfig synth;
};

int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_rank(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_nn_retrieve(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_nn_baseline(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_pool_text(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv, dispatches and maps errors to a nonzero exit code with a
/// one-line diagnostic on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience for tests: args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mvcca::cli
