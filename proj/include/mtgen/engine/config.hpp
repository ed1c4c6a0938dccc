// Flat key=value run configuration. One file drives a whole workflow run; the
// canonical serialization is embedded in the ledger header so a resumed run
// never depends on the original file still being present or unchanged.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mtgen::engine {

// One affinity cycle's shape. The last phase in the list repeats until the
// patience stop or the affinity-cycle cap fires.
struct PhaseSpec {
  int n_chemical = 1;         // chemical cycles inside one affinity cycle
  double ta_threshold = 0.4;  // candidate kept iff max Tanimoto to the
                              // cumulative specific set is strictly below this
  int gen_size = 3500;        // molecules sampled per generation

  bool operator==(const PhaseSpec&) const = default;
};

struct RunConfig {
  // schedule: "40:0.4" or "40:0.4:3500", comma-separated phases
  std::vector<PhaseSpec> phases = {{40, 0.4, 3500}, {10, 0.6, 3500}};
  int max_affinity_cycles = 50;
  bool repeat_last_phase = true;

  // chemical filters
  double qed_min = 0.8;
  double sa_max = 3.0;
  std::string smarts_stage = "in_loop";  // in_loop | post_generation | off
  std::string stage1_catalogues = "custom_motifs";
  std::string stage2_catalogues = "brenk_subset,pains_subset,nih_subset,chembl_subset";

  // affinity thresholds
  double t_global_start = -7.5;
  double t_ind_start = -7.0;
  double delta = 0.1;
  int n_min = 50;
  int patience = 3;
  double fixed_threshold = -5.9;  // per-target gate for the fixed specific set

  // generator
  int vae_hidden = 256;
  int vae_latent = 128;
  int vae_fc = 256;
  int epochs_general = 60;
  int epochs_finetune = 10;
  int max_smiles_len = 100;

  uint64_t seed = 0;
  int threads = 1;

  // data
  std::string data_dir = "data";
  std::string targets_file = "data/targets/targets.tsv";
  std::string general_corpus = "data/corpora/general.smi";
  std::string fixed_pool = "data/corpora/specific_pool.smi";
  std::string fixed_set_file;  // pre-built fixed set; empty -> build from pool
  std::string general_weights;  // pre-trained checkpoint; empty -> train here

  // reporting
  std::vector<std::pair<double, double>> report_thresholds;  // empty -> final thresholds
  std::vector<double> cluster_epsilons = {0.2, 0.3, 0.4};
  int cluster_min_pts = 2;

  bool operator==(const RunConfig&) const = default;

  // key = value lines, full-line '#' comments; unknown keys are errors.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  // Canonical text: every key, one per line, round-trips through parse().
  std::string to_text() const;

  void validate() const;  // throws std::invalid_argument with the broken key
};

}  // namespace mtgen::engine
