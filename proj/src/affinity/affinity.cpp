#include "mtgen/affinity/affinity.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "mtgen/chem/smiles.hpp"
#include "mtgen/util/hash.hpp"

namespace mtgen::affinity {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double unit_interval(uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

fp::Fingerprint fingerprint_of(const std::string& smiles) {
  auto res = chem::parse_smiles(smiles);
  if (!res.mol) throw std::invalid_argument("cannot score unparsable SMILES: " + smiles);
  return fp::morgan_fingerprint(*res.mol);
}

}  // namespace

std::vector<Target> load_targets(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open targets file: " + path);
  std::vector<Target> out;
  std::string line;
  while (std::getline(f, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    Target tg;
    if (!std::getline(ss, tg.id, '\t') || !std::getline(ss, tg.display_name, '\t') ||
        !std::getline(ss, tg.reference_smiles, '\t'))
      throw std::runtime_error("malformed targets row: " + line);
    tg.id = trim(tg.id);
    tg.display_name = trim(tg.display_name);
    tg.reference_smiles = trim(tg.reference_smiles);
    if (tg.id.empty() || tg.reference_smiles.empty())
      throw std::runtime_error("malformed targets row: " + line);
    for (const Target& seen : out)
      if (seen.id == tg.id) throw std::runtime_error("duplicate target id: " + tg.id);
    out.push_back(std::move(tg));
  }
  if (out.empty()) throw std::runtime_error("no targets in " + path);
  return out;
}

ScoreRecord ScoreRecord::make(std::string smiles, std::vector<double> per_target) {
  if (per_target.empty()) throw std::invalid_argument("score record needs at least one target");
  ScoreRecord r;
  r.smiles = std::move(smiles);
  double sum = 0;
  for (double s : per_target) sum += s;
  r.global = sum / static_cast<double>(per_target.size());
  r.per_target = std::move(per_target);
  return r;
}

ThresholdState ThresholdState::from_kcal(double t_g, double t_ind, double delta, int n_min,
                                         int patience) {
  if (delta < 0) throw std::invalid_argument("threshold decay delta must be >= 0");
  if (n_min < 0) throw std::invalid_argument("N_min must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  ThresholdState st;
  st.t_g_milli = std::llround(t_g * 1000.0);
  st.t_ind_milli = std::llround(t_ind * 1000.0);
  st.delta_milli = std::llround(delta * 1000.0);
  st.n_min = n_min;
  st.patience = patience;
  return st;
}

bool evaluate(const ScoreRecord& rec, const ThresholdState& st) {
  if (rec.per_target.empty())
    throw std::invalid_argument("score record for " + rec.smiles + " has no per-target scores");
  if (rec.global > st.t_g()) return false;
  for (double s : rec.per_target)
    if (s > st.t_ind()) return false;
  return true;
}

DecayOutcome decay(const ThresholdState& st, int n_passed) {
  if (n_passed < 0) throw std::invalid_argument("pass count cannot be negative");
  DecayOutcome out{st, false};
  if (n_passed >= st.n_min) {
    out.state.t_g_milli -= st.delta_milli;
    out.state.t_ind_milli -= st.delta_milli;
    out.decayed = true;
  }
  return out;
}

PatienceOutcome update_patience(const ThresholdState& st, bool decayed) {
  PatienceOutcome out{st, false};
  out.state.counter = decayed ? 0 : std::min(st.counter + 1, st.patience);
  out.state.cycle = st.cycle + 1;
  out.stop = out.state.counter >= st.patience;
  return out;
}

MockOracle::MockOracle(const std::vector<Target>& targets, uint64_t seed) : seed_(seed) {
  for (const Target& t : targets) {
    if (ref_fps_.count(t.id)) throw std::invalid_argument("duplicate target id: " + t.id);
    ref_fps_.emplace(t.id, fingerprint_of(t.reference_smiles));
  }
}

double MockOracle::score(const std::string& canonical_smiles, const Target& target) {
  auto ref = ref_fps_.find(target.id);
  if (ref == ref_fps_.end()) throw std::invalid_argument("unknown target: " + target.id);

  const fp::Fingerprint* mol_fp = nullptr;
  {
    std::shared_lock lock(mu_);
    auto it = mol_fps_.find(canonical_smiles);
    if (it != mol_fps_.end()) mol_fp = &it->second;
  }
  if (!mol_fp) {
    fp::Fingerprint computed = fingerprint_of(canonical_smiles);
    std::unique_lock lock(mu_);
    mol_fp = &mol_fps_.emplace(canonical_smiles, std::move(computed)).first->second;
  }

  // per-molecule quality shared across targets; per-pair jitter; similarity pull
  const double u_mol = unit_interval(util::hash_str(canonical_smiles, seed_ ^ 0x6d6f6cULL));
  const double u_mt =
      unit_interval(util::hash_combine(util::hash_str(canonical_smiles, seed_),
                                       util::fnv1a64(target.id)));
  const double sim = fp::tanimoto(*mol_fp, ref->second);
  return -2.0 - 3.0 * u_mol - 1.0 * u_mt - 6.0 * sim;
}

FileOracle::FileOracle(const std::string& csv_path, uint64_t seed) : seed_(seed) {
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("cannot open score file: " + csv_path);
  std::string line;
  while (std::getline(f, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    std::string smiles, target_id, value;
    if (!std::getline(ss, smiles, ',') || !std::getline(ss, target_id, ',') ||
        !std::getline(ss, value, ','))
      throw std::runtime_error("malformed score row: " + line);
    if (smiles == "canonical_smiles") continue;  // header row
    double s = 0;
    try {
      s = std::stod(value);
    } catch (const std::exception&) {
      throw std::runtime_error("bad score value in row: " + line);
    }
    if (!std::isfinite(s)) throw std::runtime_error("non-finite score in row: " + line);
    scores_[{smiles, target_id}] = s;
  }
}

double FileOracle::score(const std::string& canonical_smiles, const Target& target) {
  auto it = scores_.find({canonical_smiles, target.id});
  if (it == scores_.end())
    throw std::runtime_error("no score on file for " + canonical_smiles + " vs " + target.id);
  return it->second;
}

std::optional<double> ScoreCache::lookup(const std::string& smiles,
                                         const std::string& target_id) const {
  std::shared_lock lock(*mu_);
  auto it = scores_.find({smiles, target_id});
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::insert(const std::string& smiles, const std::string& target_id, double score) {
  std::unique_lock lock(*mu_);
  scores_[{smiles, target_id}] = score;
}

size_t ScoreCache::size() const {
  std::shared_lock lock(*mu_);
  return scores_.size();
}

void ScoreCache::save_csv(const std::string& path) const {
  std::shared_lock lock(*mu_);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write score cache: " + path);
  f << "# oracle_seed=" << seed_ << "\n";
  f << "canonical_smiles,target_id,score_kcal_mol\n";
  char buf[64];
  for (const auto& [key, score] : scores_) {
    std::snprintf(buf, sizeof buf, "%.17g", score);
    f << key.first << ',' << key.second << ',' << buf << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

ScoreCache ScoreCache::load_csv(const std::string& path, uint64_t expected_seed) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open score cache: " + path);
  ScoreCache cache(expected_seed);
  std::string line;
  bool seed_seen = false;
  while (std::getline(f, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      auto pos = t.find("oracle_seed=");
      if (pos != std::string::npos) {
        uint64_t s = std::stoull(t.substr(pos + 12));
        if (s != expected_seed)
          throw std::runtime_error("score cache " + path + " was built with oracle seed " +
                                   std::to_string(s) + ", expected " +
                                   std::to_string(expected_seed));
        seed_seen = true;
      }
      continue;
    }
    std::istringstream ss(t);
    std::string smiles, target_id, value;
    if (!std::getline(ss, smiles, ',') || !std::getline(ss, target_id, ',') ||
        !std::getline(ss, value, ','))
      throw std::runtime_error("malformed score row: " + line);
    if (smiles == "canonical_smiles") continue;
    cache.scores_[{smiles, target_id}] = std::stod(value);
  }
  (void)seed_seen;  // external files may omit the seed comment
  return cache;
}

std::vector<ScoreRecord> score_all(AffinityOracle& oracle, ScoreCache& cache,
                                   const std::vector<std::string>& smiles,
                                   const std::vector<Target>& targets) {
  if (targets.empty()) throw std::invalid_argument("no targets to score against");
  std::vector<ScoreRecord> out;
  out.reserve(smiles.size());
  for (const std::string& s : smiles) {
    std::vector<double> per;
    per.reserve(targets.size());
    for (const Target& t : targets) {
      if (auto hit = cache.lookup(s, t.id)) {
        per.push_back(*hit);
      } else {
        double v = oracle.score(s, t);
        cache.insert(s, t.id, v);
        per.push_back(v);
      }
    }
    out.push_back(ScoreRecord::make(s, std::move(per)));
  }
  return out;
}

std::vector<std::string> build_fixed_set(const std::vector<std::string>& smiles,
                                         AffinityOracle& oracle, ScoreCache& cache,
                                         const std::vector<Target>& targets, double threshold) {
  std::vector<std::string> kept;
  for (const ScoreRecord& rec : score_all(oracle, cache, smiles, targets)) {
    bool all_below = true;
    for (double s : rec.per_target) all_below = all_below && s <= threshold;
    if (all_below) kept.push_back(rec.smiles);
  }
  return kept;
}

}  // namespace mtgen::affinity
