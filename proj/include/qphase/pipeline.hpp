#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "qphase/config.hpp"

namespace qphase {

struct RunOptions {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool resume = false;
};

// Applies command-line overrides to the config and re-validates it.
RunConfig apply_overrides(RunConfig cfg, const RunOptions& opts);

// Runs one command and writes its output tree under cfg.output. Everything
// except run.log is a pure function of the effective config.
void run_pipeline(const RunConfig& cfg, const RunOptions& opts, std::ostream* progress = nullptr);

// 0 success, 1 config error, 2 solver failure, 3 I/O error.
int exit_code_for(ErrorCode c);

}  // namespace qphase
