// Generation statistics (validity / uniqueness / novelty), docking-score
// histograms, and scaffold clustering via DBSCAN over Tanimoto distances.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtgen/affinity/affinity.hpp"

namespace mtgen::metrics {

struct GenerationStats {
  size_t n_gen = 0;  // strings sampled
  size_t n_val = 0;  // parse + valence success
  size_t n_uni = 0;  // distinct canonical SMILES among the valid
  size_t n_unk = 0;  // unique canonicals absent from the cumulative specific set

  // Percentages; empty when the denominator is zero (undefined, never 0).
  std::optional<double> validity;    // 100 * n_val / n_gen
  std::optional<double> uniqueness;  // 100 * n_uni / n_val
  std::optional<double> novelty;     // 100 * n_unk / n_uni

  // The unique novel canonical SMILES, in first-appearance order; this is the
  // set the engine carries forward into filtering.
  std::vector<std::string> novel_canonical;
};

GenerationStats generation_stats(const std::vector<std::string>& generated,
                                 const std::set<std::string>& cumulative_specific);

// Half-open bins [i*width, (i+1)*width) keyed by integer index i.
struct Histogram {
  double bin_width = 0;
  std::map<long long, size_t> counts;
  size_t total = 0;
  double bin_lo(long long index) const { return static_cast<double>(index) * bin_width; }
};

Histogram histogram(const std::vector<double>& values, double bin_width);

// Bins the global (mean) docking scores of the records.
Histogram score_histogram(const std::vector<affinity::ScoreRecord>& records, double bin_width);

inline constexpr int kNoise = -1;

// Density-based clustering on a precomputed distance matrix. Neighborhoods
// are closed balls (d <= epsilon) and include the point itself, so a pair of
// coincident points is already a cluster at min_pts = 2. Returns one label
// per point: a cluster id from 0 upward, or kNoise. Cluster ids are assigned
// in ascending order of each cluster's first core point, so the labeling is
// deterministic for a given matrix.
std::vector<int> dbscan(const std::vector<std::vector<double>>& dist, double epsilon,
                        int min_pts);

struct ClusterRow {
  int cycle = 0;
  size_t n_molecules = 0;
  size_t n_scaffolds = 0;          // distinct non-empty scaffolds
  std::vector<size_t> clusters;    // per epsilon
  std::vector<size_t> noise;       // per epsilon
};

struct ClusterReport {
  std::vector<double> epsilons;
  int min_pts = 2;
  std::vector<ClusterRow> rows;
};

// Murcko scaffolds per cycle set, deduplicated (acyclic molecules, which have
// no scaffold, are dropped), pairwise Tanimoto distance on scaffold Morgan
// fingerprints, one DBSCAN run per epsilon.
ClusterReport scaffold_cluster_report(const std::vector<std::vector<std::string>>& cycles,
                                      const std::vector<double>& epsilons, int min_pts = 2);

}  // namespace mtgen::metrics
