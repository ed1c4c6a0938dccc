#include "mtgen/metrics/metrics.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "mtgen/chem/scaffold.hpp"
#include "mtgen/chem/smiles.hpp"
#include "mtgen/fp/fingerprint.hpp"

namespace mtgen::metrics {

GenerationStats generation_stats(const std::vector<std::string>& generated,
                                 const std::set<std::string>& cumulative_specific) {
  GenerationStats st;
  st.n_gen = generated.size();
  std::set<std::string> seen;
  for (const std::string& s : generated) {
    auto res = chem::parse_smiles(s);
    if (!res.mol) continue;
    ++st.n_val;
    std::string canon = chem::canonical_smiles(*res.mol);
    if (!seen.insert(canon).second) continue;
    ++st.n_uni;
    if (!cumulative_specific.count(canon)) {
      ++st.n_unk;
      st.novel_canonical.push_back(std::move(canon));
    }
  }
  if (st.n_gen > 0) st.validity = 100.0 * static_cast<double>(st.n_val) / st.n_gen;
  if (st.n_val > 0) st.uniqueness = 100.0 * static_cast<double>(st.n_uni) / st.n_val;
  if (st.n_uni > 0) st.novelty = 100.0 * static_cast<double>(st.n_unk) / st.n_uni;
  return st;
}

Histogram histogram(const std::vector<double>& values, double bin_width) {
  if (!(bin_width > 0)) throw std::invalid_argument("bin width must be positive");
  Histogram h;
  h.bin_width = bin_width;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite value in histogram input");
    ++h.counts[static_cast<long long>(std::floor(v / bin_width))];
    ++h.total;
  }
  return h;
}

Histogram score_histogram(const std::vector<affinity::ScoreRecord>& records, double bin_width) {
  std::vector<double> globals;
  globals.reserve(records.size());
  for (const auto& r : records) globals.push_back(r.global);
  return histogram(globals, bin_width);
}

std::vector<int> dbscan(const std::vector<std::vector<double>>& dist, double epsilon,
                        int min_pts) {
  if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
  if (min_pts < 1) throw std::invalid_argument("min_pts must be >= 1");
  const size_t n = dist.size();
  for (size_t i = 0; i < n; ++i) {
    if (dist[i].size() != n) throw std::invalid_argument("distance matrix must be square");
    if (dist[i][i] != 0.0) throw std::invalid_argument("distance matrix diagonal must be zero");
    for (size_t j = i + 1; j < n; ++j)
      if (std::abs(dist[i][j] - dist[j][i]) > 1e-12)
        throw std::invalid_argument("distance matrix must be symmetric");
  }

  auto neighbors = [&](size_t p) {
    std::vector<size_t> out;
    for (size_t q = 0; q < n; ++q)
      if (dist[p][q] <= epsilon) out.push_back(q);  // includes p itself
    return out;
  };

  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);
  int next_cluster = 0;
  for (size_t p = 0; p < n; ++p) {
    if (label[p] != kUnvisited) continue;
    auto nb = neighbors(p);
    if (static_cast<int>(nb.size()) < min_pts) {
      label[p] = kNoise;
      continue;
    }
    const int cid = next_cluster++;
    label[p] = cid;
    std::deque<size_t> frontier(nb.begin(), nb.end());
    while (!frontier.empty()) {
      size_t q = frontier.front();
      frontier.pop_front();
      if (label[q] == kNoise) label[q] = cid;  // border point adopted by the cluster
      if (label[q] != kUnvisited) continue;
      label[q] = cid;
      auto qn = neighbors(q);
      if (static_cast<int>(qn.size()) >= min_pts)
        frontier.insert(frontier.end(), qn.begin(), qn.end());
    }
  }
  return label;
}

ClusterReport scaffold_cluster_report(const std::vector<std::vector<std::string>>& cycles,
                                      const std::vector<double>& epsilons, int min_pts) {
  if (cycles.empty()) throw std::invalid_argument("need at least one cycle set");
  ClusterReport report;
  report.epsilons = epsilons;
  report.min_pts = min_pts;

  int cycle_index = 0;
  for (const auto& molecules : cycles) {
    ClusterRow row;
    row.cycle = cycle_index++;
    row.n_molecules = molecules.size();

    std::set<std::string> scaffolds;
    for (const std::string& s : molecules) {
      auto res = chem::parse_smiles(s);
      if (!res.mol) throw std::invalid_argument("unparsable molecule in cluster input: " + s);
      std::string scaf = chem::murcko_scaffold_smiles(*res.mol);
      if (!scaf.empty()) scaffolds.insert(std::move(scaf));
    }
    row.n_scaffolds = scaffolds.size();

    std::vector<fp::Fingerprint> fps;
    fps.reserve(scaffolds.size());
    for (const std::string& s : scaffolds) {
      auto res = chem::parse_smiles(s);
      fps.push_back(fp::morgan_fingerprint(*res.mol));
    }
    const size_t n = fps.size();
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j)
        dist[i][j] = dist[j][i] = 1.0 - fp::tanimoto(fps[i], fps[j]);

    for (double eps : epsilons) {
      if (n == 0) {
        row.clusters.push_back(0);
        row.noise.push_back(0);
        continue;
      }
      auto labels = dbscan(dist, eps, min_pts);
      int max_label = -1;
      size_t noise = 0;
      for (int l : labels) {
        if (l == kNoise)
          ++noise;
        else
          max_label = std::max(max_label, l);
      }
      row.clusters.push_back(static_cast<size_t>(max_label + 1));
      row.noise.push_back(noise);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace mtgen::metrics
