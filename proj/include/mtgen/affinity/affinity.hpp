// Multi-target affinity scoring: the oracle interface with its deterministic
// mock implementation, per-molecule score records, threshold filtering with a
// global mean gate plus an individual per-target gate, linear threshold decay,
// and patience-based stopping. Thresholds are kept in integer milli-kcal/mol
// so decay trajectories are exact, never a float accumulation.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "mtgen/fp/fingerprint.hpp"

namespace mtgen::affinity {

struct Target {
  std::string id;                // unique within a run, e.g. "SARS2-7RNW"
  std::string display_name;
  std::string reference_smiles;  // seeds the mock oracle's pharmacophore fingerprint
};

// TSV columns: target_id, display_name, reference_smiles. Full-line '#'
// comments and blank lines are skipped. Throws on duplicate ids.
std::vector<Target> load_targets(const std::string& path);

struct ScoreRecord {
  std::string smiles;              // canonical molecule key
  std::vector<double> per_target;  // aligned with the run's target order
  double global = 0;               // arithmetic mean of per_target

  // Computes the mean; throws std::invalid_argument on an empty score list.
  static ScoreRecord make(std::string smiles, std::vector<double> per_target);
};

struct ThresholdState {
  long long t_g_milli = 0;    // global-mean threshold
  long long t_ind_milli = 0;  // per-target threshold
  long long delta_milli = 0;  // decay step, >= 0
  int n_min = 0;              // pass count required before a decay
  int patience = 0;           // consecutive no-decay cycles tolerated
  int counter = 0;            // current consecutive no-decay count
  int cycle = 0;              // affinity cycles completed

  double t_g() const { return static_cast<double>(t_g_milli) / 1000.0; }
  double t_ind() const { return static_cast<double>(t_ind_milli) / 1000.0; }

  // Validates delta >= 0, n_min >= 0, patience >= 1.
  static ThresholdState from_kcal(double t_g, double t_ind, double delta, int n_min,
                                  int patience);

  bool operator==(const ThresholdState&) const = default;
};

// Pass iff global <= T_g AND every per-target score <= T_ind (inclusive on
// both boundaries, so a molecule sitting exactly on the thresholds passes).
// The individual gate stops a strong mean from masking one poor target.
// Throws std::invalid_argument when the record has no per-target scores.
bool evaluate(const ScoreRecord& rec, const ThresholdState& st);

struct DecayOutcome {
  ThresholdState state;
  bool decayed = false;
};

// One decision drives both thresholds: if n_passed >= N_min they each drop by
// delta, otherwise neither moves. Their difference is invariant over a run.
DecayOutcome decay(const ThresholdState& st, int n_passed);

struct PatienceOutcome {
  ThresholdState state;
  bool stop = false;
};

// Resets the counter on a decay, otherwise increments it; signals stop once
// the counter reaches the patience limit. Also advances the cycle index —
// call exactly once per affinity cycle, after decay().
PatienceOutcome update_patience(const ThresholdState& st, bool decayed);

// Deterministic scoring boundary. Implementations must return the same finite
// value for the same (canonical SMILES, target, seed) forever.
class AffinityOracle {
 public:
  virtual ~AffinityOracle() = default;
  virtual double score(const std::string& canonical_smiles, const Target& target) = 0;
  virtual uint64_t seed() const = 0;
};

// Stand-in for a docking engine: a keyed hash of (canonical SMILES, target,
// seed) plus a similarity bonus toward the target's reference fingerprint,
// mapped into [-12, -2] kcal/mol. The similarity term gives the AL loop a
// learnable signal; the per-molecule hash term is shared across targets so a
// "good" molecule tends to score well everywhere, like a real pan-inhibitor.
class MockOracle : public AffinityOracle {
 public:
  MockOracle(const std::vector<Target>& targets, uint64_t seed);
  double score(const std::string& canonical_smiles, const Target& target) override;
  uint64_t seed() const override { return seed_; }

 private:
  uint64_t seed_;
  std::map<std::string, fp::Fingerprint> ref_fps_;  // target id -> reference fp
  std::map<std::string, fp::Fingerprint> mol_fps_;  // canonical SMILES -> fp
  std::shared_mutex mu_;
};

// Replays scores from a CSV exchange file (canonical_smiles,target_id,
// score_kcal_mol) so an external docking process can replace the mock.
// Throws std::runtime_error when asked for a pair the file does not cover.
class FileOracle : public AffinityOracle {
 public:
  FileOracle(const std::string& csv_path, uint64_t seed);
  double score(const std::string& canonical_smiles, const Target& target) override;
  uint64_t seed() const override { return seed_; }

 private:
  uint64_t seed_;
  std::map<std::pair<std::string, std::string>, double> scores_;
};

// Score memo keyed by (canonical SMILES, target id), valid for one oracle
// seed. Concurrent reads, exclusive writes. Persists to the same CSV exchange
// format with an `# oracle_seed=N` comment for resume validation.
class ScoreCache {
 public:
  explicit ScoreCache(uint64_t oracle_seed) : seed_(oracle_seed) {}
  ScoreCache(ScoreCache&&) = default;
  ScoreCache& operator=(ScoreCache&&) = default;

  std::optional<double> lookup(const std::string& smiles, const std::string& target_id) const;
  void insert(const std::string& smiles, const std::string& target_id, double score);
  size_t size() const;
  uint64_t seed() const { return seed_; }

  void save_csv(const std::string& path) const;
  // Throws if the file records a different oracle seed.
  static ScoreCache load_csv(const std::string& path, uint64_t expected_seed);

 private:
  uint64_t seed_;
  std::map<std::pair<std::string, std::string>, double> scores_;
  mutable std::unique_ptr<std::shared_mutex> mu_ = std::make_unique<std::shared_mutex>();
};

// Scores every molecule against every target, via the cache when possible.
// Returns one complete record per molecule, in input order.
std::vector<ScoreRecord> score_all(AffinityOracle& oracle, ScoreCache& cache,
                                   const std::vector<std::string>& smiles,
                                   const std::vector<Target>& targets);

// Fixed specific set: molecules whose score to EVERY target is <= threshold.
// (The mean variant would admit molecules weak against one target.)
std::vector<std::string> build_fixed_set(const std::vector<std::string>& smiles,
                                         AffinityOracle& oracle, ScoreCache& cache,
                                         const std::vector<Target>& targets, double threshold);

}  // namespace mtgen::affinity
