#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mtgen/affinity/affinity.hpp"
#include "mtgen/chem/smiles.hpp"
#include "mtgen/util/rng.hpp"
#include "test_util.hpp"

using namespace mtgen;
using affinity::ScoreRecord;
using affinity::Target;
using affinity::ThresholdState;

namespace {

// Fixed score table; any pair not listed is a hard error, like FileOracle.
class StubOracle : public affinity::AffinityOracle {
 public:
  void set(const std::string& smiles, const std::string& target_id, double score) {
    scores_[{smiles, target_id}] = score;
  }
  double score(const std::string& smiles, const Target& target) override {
    ++calls;
    return scores_.at({smiles, target.id});
  }
  uint64_t seed() const override { return 0; }
  int calls = 0;

 private:
  std::map<std::pair<std::string, std::string>, double> scores_;
};

ThresholdState paper_start() { return ThresholdState::from_kcal(-7.5, -7.0, 0.1, 50, 3); }

struct TrajectoryPoint {
  long long t_g_milli, t_ind_milli;
  int counter;
  bool stop;
};

// Drives the state machine with a scripted decay pattern: 'D' cycles see 60
// passing molecules (>= N_min), 'N' cycles see 10.
std::vector<TrajectoryPoint> run_script(ThresholdState st, const std::string& script) {
  std::vector<TrajectoryPoint> traj;
  for (char c : script) {
    auto d = affinity::decay(st, c == 'D' ? 60 : 10);
    auto p = affinity::update_patience(d.state, d.decayed);
    st = p.state;
    traj.push_back({st.t_g_milli, st.t_ind_milli, st.counter, p.stop});
  }
  return traj;
}

std::string temp_file(const char* stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

std::vector<std::string> corpus_sample(size_t n) {
  auto recs = chem::read_smiles_file(std::string(MTGEN_TEST_DATA_DIR) + "/corpora/general.smi");
  std::vector<std::string> out;
  for (const auto& r : recs) {
    if (out.size() >= n) break;
    out.push_back(testutil::canon(r.smiles));
  }
  return out;
}

}  // namespace

TEST_CASE("threshold state holds exact milli-kcal values") {
  auto st = paper_start();
  CHECK(st.t_g_milli == -7500);
  CHECK(st.t_ind_milli == -7000);
  CHECK(st.delta_milli == 100);
  CHECK(st.t_g() == doctest::Approx(-7.5));
  CHECK_THROWS_AS(ThresholdState::from_kcal(-7.5, -7.0, -0.1, 50, 3), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdState::from_kcal(-7.5, -7.0, 0.1, -1, 3), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdState::from_kcal(-7.5, -7.0, 0.1, 50, 0), std::invalid_argument);
}

TEST_CASE("evaluate gates on the mean and on every single target") {
  auto st = ThresholdState::from_kcal(-8.0, -7.8, 0.1, 50, 3);

  CHECK(affinity::evaluate(ScoreRecord::make("a", {-8.1, -7.9, -8.3}), st));
  // strong mean cannot mask one weak target
  CHECK_FALSE(affinity::evaluate(ScoreRecord::make("b", {-9.5, -9.5, -6.0}), st));
  // inclusive boundaries: sitting exactly on both thresholds passes
  CHECK(affinity::evaluate(ScoreRecord::make("c", {-7.8, -7.8, -8.4}), st));
  CHECK(affinity::evaluate(ScoreRecord::make("d", {-8.0, -8.0, -8.0}), st));

  ScoreRecord empty;
  empty.smiles = "e";
  CHECK_THROWS_AS(affinity::evaluate(empty, st), std::invalid_argument);
  CHECK_THROWS_AS(ScoreRecord::make("f", {}), std::invalid_argument);
}

TEST_CASE("evaluate is monotone under threshold relaxation") {
  util::Rng rng = util::Rng::derive(5, "test.monotone");
  for (int k = 0; k < 200; ++k) {
    std::vector<double> scores;
    for (int t = 0; t < 3; ++t) scores.push_back(-12.0 + 10.0 * rng.uniform());
    auto rec = ScoreRecord::make("m", scores);
    auto tight = ThresholdState::from_kcal(-9.0 + 2.0 * rng.uniform(),
                                           -9.0 + 2.0 * rng.uniform(), 0.1, 50, 3);
    auto loose = tight;
    loose.t_g_milli += 500;
    loose.t_ind_milli += 500;
    if (affinity::evaluate(rec, tight)) CHECK(affinity::evaluate(rec, loose));
  }
}

TEST_CASE("decay moves both thresholds together once N_min is met") {
  auto st = paper_start();
  auto out = affinity::decay(st, 60);
  CHECK(out.decayed);
  CHECK(out.state.t_g_milli == -7600);
  CHECK(out.state.t_ind_milli == -7100);

  out = affinity::decay(st, 49);
  CHECK_FALSE(out.decayed);
  CHECK(out.state.t_g_milli == -7500);
  CHECK(out.state.t_ind_milli == -7000);

  out = affinity::decay(st, 50);  // inclusive N_min
  CHECK(out.decayed);

  // ten consecutive decays land exactly on the ablated-run endpoint
  ThresholdState t = paper_start();
  for (int i = 0; i < 10; ++i) t = affinity::decay(t, 60).state;
  CHECK(t.t_g_milli == -8500);
  CHECK(t.t_ind_milli == -8000);
  CHECK(t.t_g() == -8.5);
  CHECK(t.t_ind() == -8.0);
}

TEST_CASE("patience counts consecutive non-decays and signals stop") {
  auto st = paper_start();
  auto p = affinity::update_patience(st, true);
  CHECK(p.state.counter == 0);
  CHECK_FALSE(p.stop);
  CHECK(p.state.cycle == 1);

  // no, no, decay -> counter back to 0, never stopped
  st = paper_start();
  p = affinity::update_patience(st, false);
  CHECK(p.state.counter == 1);
  p = affinity::update_patience(p.state, false);
  CHECK(p.state.counter == 2);
  CHECK_FALSE(p.stop);
  p = affinity::update_patience(p.state, true);
  CHECK(p.state.counter == 0);
  CHECK_FALSE(p.stop);

  // three consecutive non-decays with p = 3 -> stop
  st = paper_start();
  for (int i = 0; i < 3; ++i) p = affinity::update_patience(i == 0 ? st : p.state, false);
  CHECK(p.state.counter == 3);
  CHECK(p.stop);
}

TEST_CASE("ablated-run script lands on -8.5/-8.0 after 15 cycles") {
  auto traj = run_script(paper_start(), "DDDDDNNDDDDDNNN");
  REQUIRE(traj.size() == 15);
  for (size_t i = 0; i + 1 < traj.size(); ++i) CHECK_FALSE(traj[i].stop);
  CHECK(traj.back().stop);
  CHECK(traj.back().t_g_milli == -8500);
  CHECK(traj.back().t_ind_milli == -8000);

  // full hand-computed table
  const std::vector<TrajectoryPoint> want = {
      {-7600, -7100, 0, false}, {-7700, -7200, 0, false}, {-7800, -7300, 0, false},
      {-7900, -7400, 0, false}, {-8000, -7500, 0, false}, {-8000, -7500, 1, false},
      {-8000, -7500, 2, false}, {-8100, -7600, 0, false}, {-8200, -7700, 0, false},
      {-8300, -7800, 0, false}, {-8400, -7900, 0, false}, {-8500, -8000, 0, false},
      {-8500, -8000, 1, false}, {-8500, -8000, 2, false}, {-8500, -8000, 3, true},
  };
  for (size_t i = 0; i < want.size(); ++i) {
    CAPTURE(i);
    CHECK(traj[i].t_g_milli == want[i].t_g_milli);
    CHECK(traj[i].t_ind_milli == want[i].t_ind_milli);
    CHECK(traj[i].counter == want[i].counter);
    CHECK(traj[i].stop == want[i].stop);
  }
}

TEST_CASE("regular-run script lands on -8.3/-7.8 after 13 cycles") {
  auto traj = run_script(paper_start(), "DDDDNNDDDDNNN");
  REQUIRE(traj.size() == 13);
  for (size_t i = 0; i + 1 < traj.size(); ++i) CHECK_FALSE(traj[i].stop);
  CHECK(traj.back().stop);
  CHECK(traj.back().t_g_milli == -8300);
  CHECK(traj.back().t_ind_milli == -7800);

  // the global/individual gap never changes
  for (const auto& pt : traj) CHECK(pt.t_g_milli - pt.t_ind_milli == -500);
}

TEST_CASE("targets file loads three unique targets") {
  auto targets = affinity::load_targets(std::string(MTGEN_TEST_DATA_DIR) + "/targets/targets.tsv");
  REQUIRE(targets.size() == 3);
  CHECK(targets[0].id == "SARS2-7RNW");
  CHECK(targets[1].id == "SARS-2GX4");
  CHECK(targets[2].id == "MERS-7ENE");
  for (const auto& t : targets) {
    CHECK_FALSE(t.display_name.empty());
    CHECK(chem::parse_smiles(t.reference_smiles).mol.has_value());
  }

  const std::string dup = temp_file("targets_dup.tsv");
  {
    std::ofstream f(dup);
    f << "A\tTarget A\tCCO\nA\tTarget A again\tCCN\n";
  }
  CHECK_THROWS_AS(affinity::load_targets(dup), std::runtime_error);
  std::remove(dup.c_str());
}

TEST_CASE("mock oracle is deterministic, bounded, and favors the references") {
  auto targets = affinity::load_targets(std::string(MTGEN_TEST_DATA_DIR) + "/targets/targets.tsv");
  affinity::MockOracle oracle(targets, 1234);
  affinity::MockOracle twin(targets, 1234);
  affinity::MockOracle other(targets, 77);

  auto mols = corpus_sample(100);
  REQUIRE(mols.size() == 100);

  int better = 0, total = 0;
  for (const Target& t : targets) {
    const std::string ref = testutil::canon(t.reference_smiles);
    const double ref_score = oracle.score(ref, t);
    for (const std::string& m : mols) {
      double s = oracle.score(m, t);
      CHECK(s >= -12.0);
      CHECK(s <= -2.0);
      CHECK(oracle.score(m, t) == s);      // repeatable
      CHECK(twin.score(m, t) == s);        // seed-determined
      ++total;
      if (ref_score <= s) ++better;
    }
    CHECK(ref_score >= -12.0);
    CHECK(ref_score <= -2.0);
  }
  // the reference pharmacophore outranks nearly every corpus molecule
  CHECK(better >= total * 9 / 10);

  // a different seed reshuffles the landscape
  int moved = 0;
  for (const std::string& m : mols)
    if (other.score(m, targets[0]) != oracle.score(m, targets[0])) ++moved;
  CHECK(moved > 90);
}

TEST_CASE("score cache round-trips exactly and guards its seed") {
  affinity::ScoreCache cache(42);
  cache.insert("CCO", "A", -7.123456789012345);
  cache.insert("CCO", "B", -3.25);
  cache.insert("c1ccccc1", "A", -11.999999999999998);
  CHECK(cache.size() == 3);
  CHECK(cache.lookup("CCO", "A").value() == -7.123456789012345);
  CHECK_FALSE(cache.lookup("CCO", "C").has_value());

  const std::string path = temp_file("score_cache_test.csv");
  cache.save_csv(path);
  auto back = affinity::ScoreCache::load_csv(path, 42);
  CHECK(back.size() == 3);
  CHECK(back.lookup("CCO", "A").value() == -7.123456789012345);
  CHECK(back.lookup("c1ccccc1", "A").value() == -11.999999999999998);
  CHECK_THROWS_AS(affinity::ScoreCache::load_csv(path, 43), std::runtime_error);

  // the same CSV drives a FileOracle drop-in
  affinity::FileOracle fo(path, 42);
  Target a{"A", "Target A", "CCO"};
  Target c{"C", "Target C", "CCO"};
  CHECK(fo.score("CCO", a) == -7.123456789012345);
  CHECK_THROWS_AS(fo.score("CCO", c), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("score_all fills the cache and never re-asks the oracle") {
  StubOracle stub;
  std::vector<Target> targets = {{"A", "a", "CCO"}, {"B", "b", "CCN"}};
  stub.set("CCO", "A", -6.0);
  stub.set("CCO", "B", -8.0);
  stub.set("CCN", "A", -5.0);
  stub.set("CCN", "B", -5.5);

  affinity::ScoreCache cache(0);
  auto recs = affinity::score_all(stub, cache, {"CCO", "CCN"}, targets);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].global == doctest::Approx(-7.0));
  CHECK(recs[1].global == doctest::Approx(-5.25));
  CHECK(stub.calls == 4);
  CHECK(cache.size() == 4);

  recs = affinity::score_all(stub, cache, {"CCO", "CCN"}, targets);
  CHECK(stub.calls == 4);  // all served from cache
  CHECK(recs[0].per_target == std::vector<double>{-6.0, -8.0});
}

TEST_CASE("fixed set keeps molecules below threshold on every target") {
  StubOracle stub;
  std::vector<Target> targets = {{"A", "a", "C"}, {"B", "b", "C"}, {"C", "c", "C"}};
  stub.set("keep", "A", -6.0);
  stub.set("keep", "B", -6.1);
  stub.set("keep", "C", -6.2);
  stub.set("drop", "A", -6.0);
  stub.set("drop", "B", -6.1);
  stub.set("drop", "C", -5.0);

  affinity::ScoreCache cache(0);
  auto kept = affinity::build_fixed_set({"keep", "drop"}, stub, cache, targets, -5.9);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == "keep");

  affinity::ScoreCache cache2(0);
  CHECK(affinity::build_fixed_set({"keep", "drop"}, stub, cache2, targets, -1e18).empty());
}
