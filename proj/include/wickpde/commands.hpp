#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wickpde/scenario.hpp"

namespace wickpde {

struct CommandOptions {
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
  std::string out_dir;                // overrides the scenario output directory
  int threads = 1;
};

/// Solves the scenario and writes the final-time coefficient field (JSON),
/// a per-coefficient norm table (CSV) and a run manifest.  Returns 0.
int cmd_solve(const std::string& scenario_path, const CommandOptions& opts, std::ostream& log);

/// Runs one named verification (lemma1, lemma2, thm1, eq3, summability,
/// oracle, mc) or "all"; writes a JSON report and prints one line per checked
/// inequality.  Returns 0 when every check passes, 1 otherwise.
int cmd_verify(const std::string& scenario_path, const std::string& check,
               const CommandOptions& opts, std::ostream& log);

/// Weighted zeta-sum sweep over m = 1..m_max at fixed n: partial sums against
/// the factorized closed form, one CSV row per (p, m).  Returns 0.
int cmd_series(const std::vector<double>& ps, int m_max, int n, TruncationShape shape,
               const std::string& out_dir, std::ostream& log);

}  // namespace wickpde
