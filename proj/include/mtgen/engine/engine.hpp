// Two-level active-learning orchestrator: chemical cycles sample the current
// generator and push novel, filter-surviving molecules into the accumulated
// specific set; affinity cycles score that set, shrink it to the molecules
// under the current thresholds, decay the thresholds, and re-tune the
// generator. Every completed step appends one hash-chained ledger event, so
// a run can be interrupted at any step boundary and resumed bit-exactly, and
// reports are rebuilt from the ledger alone.
#pragma once

#include <functional>
#include <string>

#include "mtgen/engine/config.hpp"

namespace mtgen::engine {

// Polled between live pipeline steps; returning true stops the run after the
// last completed (already ledgered) step. Replayed steps never poll.
using InterruptFn = std::function<bool()>;

struct RunResult {
  bool interrupted = false;
  std::string stop_reason;  // "patience" | "max_cycles" | "phases_done"; empty when interrupted
  int affinity_cycles = 0;  // completed affinity cycles
  size_t candidates = 0;    // rows in reports/candidates.csv (0 when interrupted)
  std::string out_dir;
};

// Fresh run into out_dir (created if missing). Throws if the directory
// already holds a ledger. out_dir is an invocation detail, not part of the
// config, so the same config produces byte-identical ledgers anywhere.
RunResult run_workflow(const RunConfig& cfg, const std::string& out_dir,
                       const InterruptFn& interrupt = {});

// Continue (or, when already finished, re-report) a run from its ledger. The
// configuration is taken from the ledger header, never from local files.
RunResult resume_workflow(const std::string& out_dir, const InterruptFn& interrupt = {});

// Rebuild reports/ for a finished run from ledger + scores.csv alone. The
// live run ends by calling exactly this, so a replay is byte-identical.
// Returns the number of candidate rows.
size_t write_reports(const std::string& out_dir);

}  // namespace mtgen::engine
