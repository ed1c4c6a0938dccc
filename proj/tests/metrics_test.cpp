#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "doctest.h"
#include "mtgen/metrics/metrics.hpp"
#include "mtgen/util/rng.hpp"
#include "test_util.hpp"

using namespace mtgen;
using metrics::GenerationStats;

namespace {

// Density-reachability closure oracle: cores from neighbor counts, connected
// components over core-core edges, borders joined to the lowest adjacent
// cluster id, everything else noise. Mirrors the documented determinism of
// metrics::dbscan without sharing any code with it.
std::vector<int> dbscan_oracle(const std::vector<std::vector<double>>& dist, double eps,
                               int min_pts) {
  const size_t n = dist.size();
  std::vector<bool> core(n, false);
  for (size_t i = 0; i < n; ++i) {
    int cnt = 0;
    for (size_t j = 0; j < n; ++j)
      if (dist[i][j] <= eps) ++cnt;
    core[i] = cnt >= min_pts;
  }
  // union-find over cores
  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), size_t{0});
  std::function<size_t(size_t)> find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && dist[i][j] <= eps) parent[find(i)] = find(j);

  // cluster ids in ascending order of each component's first core point
  std::map<size_t, int> comp_id;
  std::vector<int> label(n, metrics::kNoise);
  int next = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    size_t root = find(i);
    if (!comp_id.count(root)) comp_id[root] = next++;
    label[i] = comp_id[root];
  }
  for (size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = metrics::kNoise;
    for (size_t j = 0; j < n; ++j)
      if (core[j] && dist[i][j] <= eps)
        best = best == metrics::kNoise ? label[j] : std::min(best, label[j]);
    label[i] = best;
  }
  return label;
}

std::vector<std::vector<double>> euclidean_matrix(const std::vector<std::pair<double, double>>& pts) {
  const size_t n = pts.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double dx = pts[i].first - pts[j].first, dy = pts[i].second - pts[j].second;
      d[i][j] = d[j][i] = std::sqrt(dx * dx + dy * dy);
    }
  return d;
}

// Renames cluster ids to first-appearance order so labelings can be compared
// across point permutations.
std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> rename;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    if (l == metrics::kNoise) {
      out.push_back(metrics::kNoise);
      continue;
    }
    auto [it, fresh] = rename.emplace(l, static_cast<int>(rename.size()));
    out.push_back(it->second);
    (void)fresh;
  }
  return out;
}

}  // namespace

TEST_CASE("generation stats follow the percentage definitions") {
  // 100 strings, 59 of them valid
  std::vector<std::string> gen;
  for (int i = 0; i < 59; ++i) gen.push_back("C" + std::string(i % 7 + 1, 'C'));
  for (int i = 0; i < 41; ++i) gen.push_back("not_a_molecule((");
  auto st = metrics::generation_stats(gen, {});
  CHECK(st.n_gen == 100);
  CHECK(st.n_val == 59);
  CHECK(st.validity.value() == doctest::Approx(59.0));

  // all valid molecules identical -> uniqueness 100/n_val
  st = metrics::generation_stats({"CCO", "CCO", "CCO", "CCO"}, {});
  CHECK(st.n_val == 4);
  CHECK(st.n_uni == 1);
  CHECK(st.uniqueness.value() == doctest::Approx(25.0));

  // every unique molecule already known -> novelty 0
  std::set<std::string> known = {testutil::canon("CCO"), testutil::canon("CCN")};
  st = metrics::generation_stats({"CCO", "OCC", "CCN"}, known);
  CHECK(st.n_uni == 2);  // OCC canonicalizes onto CCO
  CHECK(st.n_unk == 0);
  CHECK(st.novelty.value() == doctest::Approx(0.0));
  CHECK(st.novel_canonical.empty());
}

TEST_CASE("undefined ratios stay undefined instead of collapsing to zero") {
  auto st = metrics::generation_stats({}, {});
  CHECK_FALSE(st.validity.has_value());
  CHECK_FALSE(st.uniqueness.has_value());
  CHECK_FALSE(st.novelty.has_value());

  st = metrics::generation_stats({"garbage((", "more)garbage"}, {});
  CHECK(st.validity.value() == doctest::Approx(0.0));
  CHECK_FALSE(st.uniqueness.has_value());
  CHECK_FALSE(st.novelty.has_value());
}

TEST_CASE("stats chain identity holds on 1000 random mixes") {
  const std::vector<std::string> pool = {"CCO",        "CCN",     "CCC",   "c1ccccc1", "CC(C)O",
                                         "CC(=O)O",    "C1CCCC1", "CCOCC", "CC(N)C",   "c1ccncc1",
                                         "CC(=O)NC",   "CCS"};
  std::set<std::string> known;
  for (size_t i = 0; i < 4; ++i) known.insert(testutil::canon(pool[i]));

  util::Rng rng = util::Rng::derive(99, "test.mix");
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> gen;
    const int n = 1 + static_cast<int>(rng.below(25));
    for (int i = 0; i < n; ++i) {
      switch (rng.below(4)) {
        case 0: gen.push_back(pool[rng.below(pool.size())]); break;           // maybe novel
        case 1: gen.push_back(pool[rng.below(4)]); break;                     // known
        case 2: gen.push_back(gen.empty() ? pool[0] : gen[rng.below(gen.size())]); break;
        default: gen.push_back("bad(smiles" + std::to_string(i)); break;      // invalid
      }
    }
    auto st = metrics::generation_stats(gen, known);

    // brute-force recount
    std::set<std::string> uniq;
    size_t val = 0, unk = 0;
    for (const auto& s : gen) {
      auto res = chem::parse_smiles(s);
      if (!res.mol) continue;
      ++val;
      auto c = chem::canonical_smiles(*res.mol);
      if (uniq.insert(c).second && !known.count(c)) ++unk;
    }
    CHECK(st.n_val == val);
    CHECK(st.n_uni == uniq.size());
    CHECK(st.n_unk == unk);
    CHECK(st.n_gen >= st.n_val);
    CHECK(st.n_val >= st.n_uni);
    CHECK(st.n_uni >= st.n_unk);

    if (st.validity && st.uniqueness && st.novelty) {
      const double chained = *st.validity * *st.uniqueness * *st.novelty / 1e4;
      const double direct = 100.0 * static_cast<double>(st.n_unk) / static_cast<double>(st.n_gen);
      CHECK(std::abs(chained - direct) < 1e-9);
    }
  }
}

TEST_CASE("histograms bin half-open and conserve totals") {
  auto h = metrics::histogram({-8.1, -8.1, -8.1}, 0.25);
  REQUIRE(h.counts.size() == 1);
  CHECK(h.counts.begin()->second == 3);
  CHECK(h.bin_lo(h.counts.begin()->first) == doctest::Approx(-8.25));
  CHECK(h.total == 3);

  CHECK(metrics::histogram({}, 0.25).counts.empty());
  CHECK_THROWS_AS(metrics::histogram({1.0}, 0.0), std::invalid_argument);

  // boundary values land in the bin they open
  h = metrics::histogram({-8.25, -8.0}, 0.25);
  CHECK(h.counts.at(-33) == 1);
  CHECK(h.counts.at(-32) == 1);

  util::Rng rng = util::Rng::derive(7, "test.hist");
  std::vector<double> vals;
  for (int i = 0; i < 500; ++i) vals.push_back(-12.0 + 10.0 * rng.uniform());
  h = metrics::histogram(vals, 0.25);
  size_t sum = 0;
  for (const auto& [bin, c] : h.counts) sum += c;
  CHECK(sum == vals.size());

  affinity::ScoreRecord r = affinity::ScoreRecord::make("m", {-8.0, -8.2});
  auto sh = metrics::score_histogram({r}, 0.25);
  CHECK(sh.counts.at(static_cast<long long>(std::floor(-8.1 / 0.25))) == 1);
}

TEST_CASE("dbscan handles the degenerate geometries") {
  std::vector<std::vector<double>> zeros(5, std::vector<double>(5, 0.0));
  auto labels = metrics::dbscan(zeros, 0.1, 2);
  for (int l : labels) CHECK(l == 0);

  std::vector<std::vector<double>> ones(5, std::vector<double>(5, 1.0));
  for (int i = 0; i < 5; ++i) ones[i][i] = 0.0;
  labels = metrics::dbscan(ones, 0.1, 2);
  for (int l : labels) CHECK(l == metrics::kNoise);

  CHECK_THROWS_AS(metrics::dbscan(zeros, 0.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(metrics::dbscan(zeros, 0.1, 0), std::invalid_argument);

  auto asym = zeros;
  asym[0][1] = 0.5;
  CHECK_THROWS_AS(metrics::dbscan(asym, 0.1, 2), std::invalid_argument);
  auto diag = zeros;
  diag[2][2] = 0.3;
  CHECK_THROWS_AS(metrics::dbscan(diag, 0.1, 2), std::invalid_argument);
}

TEST_CASE("dbscan matches the reachability oracle on a two-blob instance") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({0.02 * i, 0.01 * i});        // blob A
  for (int i = 0; i < 5; ++i) pts.push_back({1.0 + 0.02 * i, 1.0});       // blob B
  pts.push_back({0.5, 0.5});                                              // lone point
  auto d = euclidean_matrix(pts);

  auto got = metrics::dbscan(d, 0.15, 2);
  auto want = dbscan_oracle(d, 0.15, 2);
  CHECK(got == want);
  CHECK(got[0] == 0);
  CHECK(got[6] == 1);
  CHECK(got[11] == metrics::kNoise);
}

TEST_CASE("dbscan equals the closure oracle on 50 random instances") {
  util::Rng rng = util::Rng::derive(13, "test.dbscan");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 12; ++i) pts.push_back({rng.uniform(), rng.uniform()});
    auto d = euclidean_matrix(pts);
    const double eps = 0.1 + 0.3 * rng.uniform();
    const int min_pts = 1 + static_cast<int>(rng.below(4));
    CAPTURE(trial);
    CAPTURE(eps);
    CAPTURE(min_pts);
    CHECK(metrics::dbscan(d, eps, min_pts) == dbscan_oracle(d, eps, min_pts));
  }
}

TEST_CASE("dbscan is permutation-invariant up to relabeling") {
  util::Rng rng = util::Rng::derive(21, "test.dbscan.perm");
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({rng.uniform(), rng.uniform()});
  auto d = euclidean_matrix(pts);
  auto base = metrics::dbscan(d, 0.3, 2);

  std::vector<size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), size_t{0});
  for (int round = 0; round < 20; ++round) {
    rng.shuffle(perm);
    std::vector<std::vector<double>> pd(pts.size(), std::vector<double>(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = 0; j < pts.size(); ++j) pd[i][j] = d[perm[i]][perm[j]];
    auto got = metrics::dbscan(pd, 0.3, 2);
    std::vector<int> base_permuted(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) base_permuted[i] = base[perm[i]];
    CHECK(canonical_labels(got) == canonical_labels(base_permuted));
  }
}

TEST_CASE("scaffold report clusters deduped scaffolds per epsilon") {
  // one shared scaffold; at min_pts 1 a singleton is its own cluster
  std::vector<std::string> shared = {"Cc1ccccc1", "CCc1ccccc1", "Oc1ccccc1", "c1ccccc1"};
  auto rep = metrics::scaffold_cluster_report({shared}, {0.2, 0.5, 0.9}, 1);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].n_molecules == 4);
  CHECK(rep.rows[0].n_scaffolds == 1);
  for (size_t e = 0; e < rep.epsilons.size(); ++e) {
    CHECK(rep.rows[0].clusters[e] == 1);
    CHECK(rep.rows[0].noise[e] == 0);
  }

  // duplicates never change any reported count
  std::vector<std::string> dup = shared;
  dup.push_back("Cc1ccccc1");
  auto rep2 = metrics::scaffold_cluster_report({dup}, {0.2, 0.5, 0.9}, 1);
  CHECK(rep2.rows[0].n_scaffolds == rep.rows[0].n_scaffolds);
  CHECK(rep2.rows[0].clusters == rep.rows[0].clusters);
  CHECK(rep2.rows[0].noise == rep.rows[0].noise);

  // with min_pts 1 cluster counts can only fall as epsilon grows
  std::vector<std::string> mixed = {"c1ccccc1",          "c1ccc2ccccc2c1", "C1CCCCC1",
                                    "c1ccncc1",          "C1CCNCC1",       "c1ccc2[nH]ccc2c1",
                                    "O=C1C=CC(=O)C=C1"};
  auto sweep = metrics::scaffold_cluster_report({mixed}, {0.1, 0.3, 0.6, 0.95, 1.0}, 1);
  const auto& row = sweep.rows[0];
  CHECK(row.n_scaffolds == 7);
  for (size_t e = 1; e < sweep.epsilons.size(); ++e)
    CHECK(row.clusters[e] <= row.clusters[e - 1]);
  CHECK(row.clusters.back() == 1);  // distance never exceeds 1.0

  // acyclic molecules have no scaffold and drop out entirely
  auto acyclic = metrics::scaffold_cluster_report({{"CCO", "CCN"}}, {0.5}, 2);
  CHECK(acyclic.rows[0].n_scaffolds == 0);
  CHECK(acyclic.rows[0].clusters[0] == 0);
  CHECK(acyclic.rows[0].noise[0] == 0);

  // multiple cycles stack rows in order
  auto multi = metrics::scaffold_cluster_report({shared, mixed}, {0.5}, 2);
  REQUIRE(multi.rows.size() == 2);
  CHECK(multi.rows[0].cycle == 0);
  CHECK(multi.rows[1].cycle == 1);
}
