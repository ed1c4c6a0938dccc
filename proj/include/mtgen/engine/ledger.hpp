// Append-only run ledger: one JSON object per line, each carrying a hash
// chained over every byte that came before it. The ledger is the single
// source of truth for a run — resume and reporting both replay it, so a
// truncated or edited file is detected before any state is trusted.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mtgen::engine {

using json = nlohmann::ordered_json;

// Chain seed for line 0; line i chains fnv1a64(line-without-chain, prev).
uint64_t ledger_chain_seed();

class LedgerWriter {
 public:
  // Truncates (fresh run). Throws on open failure.
  explicit LedgerWriter(const std::string& path);
  // Continues an existing ledger whose replay ended at (next_seq, chain).
  LedgerWriter(const std::string& path, int next_seq, uint64_t chain);

  // Fills in "seq" and "chain", writes one line, flushes. `event` must
  // already carry "type" first.
  void append(json event);

  int next_seq() const { return next_seq_; }
  uint64_t chain() const { return chain_; }

 private:
  std::ofstream out_;
  int next_seq_ = 0;
  uint64_t chain_ = 0;
};

struct LedgerContents {
  std::vector<json> events;  // chain fields stripped, seq retained
  int next_seq = 0;
  uint64_t chain = 0;  // value after the last verified line
};

// Replays and verifies the whole file. Throws std::runtime_error naming the
// first bad line on corruption, tampering, or seq gaps.
LedgerContents read_ledger(const std::string& path);

}  // namespace mtgen::engine
