#include "mtgen/engine/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mtgen/affinity/affinity.hpp"
#include "mtgen/chem/scaffold.hpp"
#include "mtgen/chem/smiles.hpp"
#include "mtgen/desc/descriptors.hpp"
#include "mtgen/engine/ledger.hpp"
#include "mtgen/fp/fingerprint.hpp"
#include "mtgen/metrics/metrics.hpp"
#include "mtgen/smarts/smarts.hpp"
#include "mtgen/util/hash.hpp"
#include "mtgen/vae/vae.hpp"
#include "mtgen/vae/vocab.hpp"

namespace mtgen::engine {
namespace {

namespace fs = std::filesystem;

constexpr double kHistogramBinWidth = 0.25;  // kcal/mol, fixed report granularity

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    auto b = cur.find_first_not_of(" \t");
    auto e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

std::string hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t parse_hex16(const std::string& s) {
  if (s.size() != 16) throw std::runtime_error("engine: bad hash field '" + s + "'");
  uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<uint64_t>(c - 'a' + 10);
    else throw std::runtime_error("engine: bad hash field '" + s + "'");
  }
  return v;
}

std::string f6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

const char* b2s(bool b) { return b ? "true" : "false"; }

uint64_t file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("engine: cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return util::fnv1a64(buf.str());
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("engine: cannot write " + p.string());
}

// Derived per-purpose seed; (i, j) keyed streams keep sibling cycles
// independent, which is what makes interrupt/resume bit-exact.
uint64_t seed_for(uint64_t master, const char* label, int i = 0, int j = 0) {
  return util::hash_combine(
      util::hash_combine(util::hash_str(label, master), static_cast<uint64_t>(i)),
      static_cast<uint64_t>(j));
}

std::vector<smarts::Catalogue> load_catalogue_list(const std::string& data_dir,
                                                   const std::string& names_csv) {
  std::vector<smarts::Catalogue> out;
  for (const auto& name : split_csv(names_csv))
    if (!name.empty())
      out.push_back(smarts::load_named_catalogue(data_dir + "/catalogues/" + name + ".tsv", name));
  return out;
}

// Canonical, deduplicated, sorted molecule list from raw SMILES records.
std::vector<std::string> canonical_sorted(const std::vector<chem::SmilesRecord>& records,
                                          const std::string& what) {
  std::set<std::string> seen;
  for (const auto& rec : records) {
    auto c = chem::canonical_smiles(rec.smiles);
    if (!c)
      throw std::runtime_error("engine: unparsable SMILES in " + what + " line " +
                               std::to_string(rec.line_no) + ": " + rec.smiles);
    seen.insert(*c);
  }
  return {seen.begin(), seen.end()};
}

affinity::ScoreRecord record_from_cache(const affinity::ScoreCache& cache, const std::string& smiles,
                                        const std::vector<std::string>& target_ids) {
  std::vector<double> per;
  per.reserve(target_ids.size());
  for (const auto& id : target_ids) {
    auto v = cache.lookup(smiles, id);
    if (!v) throw std::runtime_error("engine: scores.csv is missing " + smiles + " / " + id);
    per.push_back(*v);
  }
  return affinity::ScoreRecord::make(smiles, std::move(per));
}

affinity::ThresholdState reporting_state(double t_g, double t_ind) {
  return affinity::ThresholdState::from_kcal(t_g, t_ind, 0.0, 0, 1);
}

// ----------------------------------------------------------------------------
// Ledger replay into a flat history (shared by resume and the report builder).

struct HistoryAff {
  int cycle = 0;
  json ev;
  std::vector<std::string> scored;  // accumulated set at scoring time, sorted
};

struct History {
  json header;
  RunConfig cfg;
  uint64_t oracle_seed = 0;
  std::vector<std::string> target_ids;
  std::vector<std::string> fixed;
  std::vector<json> chems;
  std::vector<HistoryAff> affs;
  json end;  // null until the run finished
};

History replay_history(const fs::path& out_dir) {
  auto led = read_ledger((out_dir / "ledger.jsonl").string());
  History h;
  std::set<std::string> accumulated;
  for (const auto& e : led.events) {
    const std::string type = e.at("type").get<std::string>();
    if (type == "header") {
      h.header = e;
      h.cfg = RunConfig::parse(e.at("config").get<std::string>());
      h.oracle_seed = e.at("oracle_seed").get<uint64_t>();
      h.target_ids = e.at("targets").get<std::vector<std::string>>();
    } else if (type == "fixed_set") {
      h.fixed = e.at("smiles").get<std::vector<std::string>>();
    } else if (type == "chemical_cycle") {
      for (const auto& s : e.at("added")) accumulated.insert(s.get<std::string>());
      h.chems.push_back(e);
    } else if (type == "affinity_cycle") {
      HistoryAff a;
      a.cycle = e.at("cycle").get<int>();
      a.ev = e;
      a.scored.assign(accumulated.begin(), accumulated.end());
      auto updated = e.at("updated").get<std::vector<std::string>>();
      accumulated = std::set<std::string>(updated.begin(), updated.end());
      h.affs.push_back(std::move(a));
    } else if (type == "end") {
      h.end = e;
    }
  }
  if (h.header.is_null()) throw std::runtime_error("engine: ledger has no header event");
  return h;
}

// ----------------------------------------------------------------------------
// Report builder. Pure function of (ledger, scores.csv, data files): the live
// run calls this after its end event, a replay calls it again later, and both
// write the same bytes.

size_t build_reports(const fs::path& out_dir) {
  History h = replay_history(out_dir);
  if (h.end.is_null())
    throw std::runtime_error("engine: ledger has no end event; resume the run before reporting");
  const RunConfig& cfg = h.cfg;
  auto cache = affinity::ScoreCache::load_csv((out_dir / "scores.csv").string(), h.oracle_seed);
  fs::create_directories(out_dir / "reports");

  {  // threshold trajectory
    std::string csv =
        "cycle,t_global_before,t_ind_before,n_scored,n_passed,decayed,"
        "t_global_after,t_ind_after,counter,stop\n";
    for (const auto& a : h.affs) {
      const json& e = a.ev;
      csv += std::to_string(a.cycle) + ',' +
             f6(e.at("t_global_before_milli").get<long long>() / 1000.0) + ',' +
             f6(e.at("t_ind_before_milli").get<long long>() / 1000.0) + ',' +
             std::to_string(e.at("n_scored").get<size_t>()) + ',' +
             std::to_string(e.at("n_passed").get<size_t>()) + ',' +
             b2s(e.at("decayed").get<bool>()) + ',' +
             f6(e.at("t_global_after_milli").get<long long>() / 1000.0) + ',' +
             f6(e.at("t_ind_after_milli").get<long long>() / 1000.0) + ',' +
             std::to_string(e.at("counter").get<int>()) + ',' + b2s(e.at("stop").get<bool>()) +
             '\n';
    }
    write_file(out_dir / "reports/thresholds.csv", csv);
  }

  {  // per-generation validity / uniqueness / novelty
    std::string csv =
        "affinity_cycle,chemical_cycle,n_gen,n_val,n_uni,n_unk,validity,uniqueness,novelty\n";
    for (const auto& e : h.chems) {
      const json& s = e.at("stats");
      auto opt = [&](const char* key) {
        return s.at(key).is_null() ? std::string() : f6(s.at(key).get<double>());
      };
      csv += std::to_string(e.at("affinity_cycle").get<int>()) + ',' +
             std::to_string(e.at("chemical_cycle").get<int>()) + ',' +
             std::to_string(s.at("n_gen").get<size_t>()) + ',' +
             std::to_string(s.at("n_val").get<size_t>()) + ',' +
             std::to_string(s.at("n_uni").get<size_t>()) + ',' +
             std::to_string(s.at("n_unk").get<size_t>()) + ',' + opt("validity") + ',' +
             opt("uniqueness") + ',' + opt("novelty") + '\n';
    }
    write_file(out_dir / "reports/generation_stats.csv", csv);
  }

  {  // specific-set growth and affinity filtering
    std::string csv = "affinity_cycle,step,added,accumulated,cumulative\n";
    size_t chem_pos = 0;
    for (const auto& a : h.affs) {
      while (chem_pos < h.chems.size() &&
             h.chems[chem_pos].at("affinity_cycle").get<int>() == a.cycle) {
        const json& e = h.chems[chem_pos];
        csv += std::to_string(a.cycle) + ",chem_" +
               std::to_string(e.at("chemical_cycle").get<int>()) + ',' +
               std::to_string(e.at("added").size()) + ',' +
               std::to_string(e.at("accumulated_size").get<size_t>()) + ',' +
               std::to_string(e.at("cumulative_size").get<size_t>()) + '\n';
        ++chem_pos;
      }
      size_t n_updated = a.ev.at("updated").size();
      csv += std::to_string(a.cycle) + ",filter,," + std::to_string(n_updated) + ',' +
             std::to_string(h.fixed.size() + n_updated) + '\n';
    }
    write_file(out_dir / "reports/set_sizes.csv", csv);
  }

  {  // per-affinity-cycle global score histograms
    std::string csv = "affinity_cycle,bin_lo,count\n";
    for (const auto& a : h.affs) {
      std::vector<affinity::ScoreRecord> records;
      records.reserve(a.scored.size());
      for (const auto& s : a.scored) records.push_back(record_from_cache(cache, s, h.target_ids));
      auto hist = metrics::score_histogram(records, kHistogramBinWidth);
      for (const auto& [bin, count] : hist.counts)
        csv += std::to_string(a.cycle) + ',' + f6(hist.bin_lo(bin)) + ',' + std::to_string(count) +
               '\n';
    }
    write_file(out_dir / "reports/histograms.csv", csv);
  }

  {  // scaffold clustering of each cycle's updated set
    std::vector<std::vector<std::string>> cycles;
    for (const auto& a : h.affs)
      cycles.push_back(a.ev.at("updated").get<std::vector<std::string>>());
    auto report = metrics::scaffold_cluster_report(cycles, cfg.cluster_epsilons, cfg.cluster_min_pts);
    std::string csv = "affinity_cycle,epsilon,n_molecules,n_scaffolds,n_clusters,n_noise\n";
    for (const auto& row : report.rows)
      for (size_t k = 0; k < report.epsilons.size(); ++k)
        csv += std::to_string(row.cycle + 1) + ',' + f6(report.epsilons[k]) + ',' +
               std::to_string(row.n_molecules) + ',' + std::to_string(row.n_scaffolds) + ',' +
               std::to_string(row.clusters[k]) + ',' + std::to_string(row.noise[k]) + '\n';
    write_file(out_dir / "reports/clusters.csv", csv);
  }

  // Candidate tables: every molecule that ever reached an affinity filter,
  // re-evaluated at the reporting thresholds (default: the final ones).
  std::set<std::string> universe;
  for (const auto& a : h.affs) universe.insert(a.scored.begin(), a.scored.end());

  std::vector<std::pair<double, double>> pairs = cfg.report_thresholds;
  if (pairs.empty()) {
    if (h.affs.empty())
      pairs.emplace_back(cfg.t_global_start, cfg.t_ind_start);
    else
      pairs.emplace_back(h.affs.back().ev.at("t_global_after_milli").get<long long>() / 1000.0,
                         h.affs.back().ev.at("t_ind_after_milli").get<long long>() / 1000.0);
  }

  const bool post_screen = cfg.smarts_stage == "post_generation";
  std::vector<smarts::Catalogue> stage2;
  if (post_screen) stage2 = load_catalogue_list(cfg.data_dir, cfg.stage2_catalogues);

  struct CandRow {
    affinity::ScoreRecord rec;
    bool screened_out = false;
  };
  std::vector<CandRow> rows;
  rows.reserve(universe.size());
  for (const auto& s : universe) {
    CandRow row{record_from_cache(cache, s, h.target_ids), false};
    if (post_screen) {
      auto pr = chem::parse_smiles(s);
      if (!pr.ok()) throw std::runtime_error("engine: ledger molecule failed to reparse: " + s);
      row.screened_out = !smarts::screen(*pr.mol, stage2).pass;
    }
    rows.push_back(std::move(row));
  }

  {  // candidate counts per reporting threshold pair
    std::string csv = "t_global,t_ind,n_candidates\n";
    for (const auto& [g, ti] : pairs) {
      auto st = reporting_state(g, ti);
      size_t n = 0;
      for (const auto& row : rows)
        if (!row.screened_out && affinity::evaluate(row.rec, st)) ++n;
      csv += f6(g) + ',' + f6(ti) + ',' + std::to_string(n) + '\n';
    }
    write_file(out_dir / "reports/candidate_counts.csv", csv);
  }

  // Full candidate table at the primary (first) reporting pair.
  auto primary = reporting_state(pairs.front().first, pairs.front().second);
  std::vector<const CandRow*> kept;
  for (const auto& row : rows)
    if (!row.screened_out && affinity::evaluate(row.rec, primary)) kept.push_back(&row);
  std::sort(kept.begin(), kept.end(), [](const CandRow* a, const CandRow* b) {
    if (a->rec.global != b->rec.global) return a->rec.global < b->rec.global;
    return a->rec.smiles < b->rec.smiles;
  });

  auto desc_set = desc::DescriptorSet::load(cfg.data_dir);
  std::string csv = "canonical_smiles,global";
  for (const auto& id : h.target_ids) csv += ',' + id;
  csv += ",qed,sa,scaffold\n";
  for (const CandRow* row : kept) {
    auto pr = chem::parse_smiles(row->rec.smiles);
    if (!pr.ok())
      throw std::runtime_error("engine: ledger molecule failed to reparse: " + row->rec.smiles);
    csv += row->rec.smiles + ',' + f6(row->rec.global);
    for (double v : row->rec.per_target) csv += ',' + f6(v);
    csv += ',' + f6(desc_set.qed(*pr.mol)) + ',' + f6(desc_set.sa_score(*pr.mol)) + ',' +
           chem::murcko_scaffold_smiles(*pr.mol) + '\n';
  }
  write_file(out_dir / "reports/candidates.csv", csv);
  return kept.size();
}

// ----------------------------------------------------------------------------
// The workflow driver. One instance per run/resume; replays whatever prefix
// of the ledger exists, then continues live from the first missing step.

struct AffinityStepResult {
  bool stop = false;
  bool interrupted = false;
};

class Workflow {
 public:
  Workflow(RunConfig cfg, fs::path out, InterruptFn interrupt)
      : cfg_(std::move(cfg)),
        out_(std::move(out)),
        interrupt_(std::move(interrupt)),
        cache_(0) {}

  RunResult fresh() {
    writer_ = std::make_unique<LedgerWriter>((out_ / "ledger.jsonl").string());
    setup(false);
    return drive();
  }

  RunResult resume(LedgerContents led) {
    replay_ = std::move(led.events);
    writer_ = std::make_unique<LedgerWriter>((out_ / "ledger.jsonl").string(), led.next_seq,
                                             led.chain);
    setup(true);
    return drive();
  }

 private:
  RunConfig cfg_;
  fs::path out_;
  InterruptFn interrupt_;

  vae::Vocabulary vocab_;
  std::vector<affinity::Target> targets_;
  std::optional<desc::DescriptorSet> desc_;
  std::vector<smarts::Catalogue> stage1_, stage2_;
  uint64_t oracle_seed_ = 0;
  std::unique_ptr<affinity::MockOracle> oracle_;
  affinity::ScoreCache cache_;

  std::unique_ptr<LedgerWriter> writer_;
  std::vector<json> replay_;
  size_t replay_pos_ = 0;

  std::optional<vae::VaeParams> general_, current_;
  std::string general_path_, current_path_;  // out_-relative checkpoint paths
  uint64_t general_hash_ = 0, current_hash_ = 0;
  std::vector<std::string> fixed_;
  std::set<std::string> accumulated_;
  affinity::ThresholdState st_;
  std::map<std::string, fp::Fingerprint> fp_memo_;
  bool interrupted_ = false;

  // --- infrastructure ---------------------------------------------------

  bool live() const { return replay_pos_ >= replay_.size(); }

  const json* replay_peek(const char* type) {
    if (live()) return nullptr;
    const json& e = replay_[replay_pos_];
    const std::string found = e.at("type").get<std::string>();
    if (found != type)
      throw std::runtime_error("engine: ledger event " + std::to_string(replay_pos_) +
                               " is '" + found + "' where '" + type + "' was expected");
    return &e;
  }

  void replay_advance() { ++replay_pos_; }

  // Live-only poll; replay never stops halfway.
  bool check_interrupt() {
    if (interrupt_ && interrupt_()) {
      interrupted_ = true;
      return true;
    }
    return false;
  }

  void setup(bool resuming) {
    cfg_.validate();
    targets_ = affinity::load_targets(cfg_.targets_file);
    desc_ = desc::DescriptorSet::load(cfg_.data_dir);
    stage1_ = load_catalogue_list(cfg_.data_dir, cfg_.stage1_catalogues);
    stage2_ = load_catalogue_list(cfg_.data_dir, cfg_.stage2_catalogues);
    oracle_seed_ = util::hash_str("engine.oracle", cfg_.seed);
    oracle_ = std::make_unique<affinity::MockOracle>(targets_, oracle_seed_);
    fs::path scores = out_ / "scores.csv";
    if (resuming && fs::exists(scores))
      cache_ = affinity::ScoreCache::load_csv(scores.string(), oracle_seed_);
    else
      cache_ = affinity::ScoreCache(oracle_seed_);
    st_ = affinity::ThresholdState::from_kcal(cfg_.t_global_start, cfg_.t_ind_start, cfg_.delta,
                                              cfg_.n_min, cfg_.patience);
    fs::create_directories(out_ / "weights");
  }

  vae::TrainConfig tcfg(int epochs, uint64_t seed) const {
    vae::TrainConfig c;
    c.epochs = epochs;
    c.max_len = cfg_.max_smiles_len;
    c.seed = seed;
    return c;
  }

  std::vector<std::string> training_corpus() const {
    std::vector<std::string> out = fixed_;
    out.insert(out.end(), accumulated_.begin(), accumulated_.end());
    return out;
  }

  std::set<std::string> cumulative() const {
    std::set<std::string> out(fixed_.begin(), fixed_.end());
    out.insert(accumulated_.begin(), accumulated_.end());
    return out;
  }

  const fp::Fingerprint& fp_of(const std::string& canonical) {
    auto it = fp_memo_.find(canonical);
    if (it != fp_memo_.end()) return it->second;
    auto pr = chem::parse_smiles(canonical);
    if (!pr.ok()) throw std::runtime_error("engine: molecule failed to reparse: " + canonical);
    return fp_memo_.emplace(canonical, fp::morgan_fingerprint(*pr.mol)).first->second;
  }

  json save_weights(const vae::VaeParams& p, const std::string& rel) {
    fs::path full = out_ / rel;
    vae::save_checkpoint(p, full.string());
    json w;
    w["path"] = rel;
    w["hash"] = hex16(file_hash(full));
    return w;
  }

  void note_weights(const json& field, std::optional<vae::VaeParams>* slot, std::string* path,
                    uint64_t* hash) {
    *path = field.at("path").get<std::string>();
    *hash = parse_hex16(field.at("hash").get<std::string>());
    slot->reset();  // reload lazily from the file when next needed
  }

  const vae::VaeParams& weights(std::optional<vae::VaeParams>& slot, const std::string& rel,
                                uint64_t hash, const char* role) {
    if (!slot) {
      if (rel.empty())
        throw std::runtime_error(std::string("engine: ") + role + " weights not established");
      fs::path full = out_ / rel;
      if (file_hash(full) != hash)
        throw std::runtime_error("engine: checkpoint " + full.string() +
                                 " does not match the hash recorded in the ledger");
      slot = vae::load_checkpoint(full.string());
    }
    return *slot;
  }

  const vae::VaeParams& general() {
    return weights(general_, general_path_, general_hash_, "general");
  }
  const vae::VaeParams& current() {
    return weights(current_, current_path_, current_hash_, "current");
  }

  // --- pipeline steps ----------------------------------------------------

  void step_header() {
    if (const json* e = replay_peek("header")) {
      auto recorded = e->at("targets").get<std::vector<std::string>>();
      std::vector<std::string> loaded;
      for (const auto& t : targets_) loaded.push_back(t.id);
      if (recorded != loaded)
        throw std::runtime_error("engine: target list changed since the run started");
      replay_advance();
      return;
    }
    json ev;
    ev["type"] = "header";
    ev["version"] = "0.1.0";
    ev["seed"] = cfg_.seed;
    ev["oracle_seed"] = oracle_seed_;
    json ids = json::array();
    for (const auto& t : targets_) ids.push_back(t.id);
    ev["targets"] = std::move(ids);
    ev["config"] = cfg_.to_text();
    writer_->append(std::move(ev));
  }

  void step_general_weights() {
    if (const json* e = replay_peek("general_weights")) {
      note_weights(e->at("weights"), &general_, &general_path_, &general_hash_);
      replay_advance();
      return;
    }
    if (check_interrupt()) return;
    json ev;
    ev["type"] = "general_weights";
    if (!cfg_.general_weights.empty()) {
      auto p = vae::load_checkpoint(cfg_.general_weights);
      if (p.dims.hidden != cfg_.vae_hidden || p.dims.latent != cfg_.vae_latent ||
          p.dims.fc != cfg_.vae_fc)
        throw std::invalid_argument("engine: general weights dimensions do not match the config");
      ev["source"] = "file";
      general_ = std::move(p);
    } else {
      auto records = chem::read_smiles_file(cfg_.general_corpus);
      if (records.empty()) throw std::runtime_error("engine: general corpus is empty");
      std::vector<std::string> corpus;
      corpus.reserve(records.size());
      for (const auto& rec : records) corpus.push_back(rec.smiles);
      vae::Dims dims;
      dims.hidden = cfg_.vae_hidden;
      dims.latent = cfg_.vae_latent;
      dims.fc = cfg_.vae_fc;
      auto init = vae::VaeParams::init(dims, seed_for(cfg_.seed, "engine.vae.init"));
      auto result = vae::train(std::move(init), corpus, vocab_,
                               tcfg(cfg_.epochs_general, seed_for(cfg_.seed, "engine.train.general")));
      ev["source"] = "trained";
      ev["n_data"] = corpus.size();
      ev["epochs"] = cfg_.epochs_general;
      if (!result.trace.empty()) {
        ev["first_total"] = result.trace.front().total;
        ev["last_total"] = result.trace.back().total;
      }
      general_ = std::move(result.params);
    }
    json w = save_weights(*general_, "weights/general.ckpt");
    general_path_ = w.at("path").get<std::string>();
    general_hash_ = parse_hex16(w.at("hash").get<std::string>());
    ev["weights"] = std::move(w);
    writer_->append(std::move(ev));
  }

  void step_fixed_set() {
    if (const json* e = replay_peek("fixed_set")) {
      fixed_ = e->at("smiles").get<std::vector<std::string>>();
      replay_advance();
      return;
    }
    if (check_interrupt()) return;
    json ev;
    ev["type"] = "fixed_set";
    if (!cfg_.fixed_set_file.empty()) {
      fixed_ = canonical_sorted(chem::read_smiles_file(cfg_.fixed_set_file), cfg_.fixed_set_file);
      ev["source"] = "file";
    } else {
      auto pool = canonical_sorted(chem::read_smiles_file(cfg_.fixed_pool), cfg_.fixed_pool);
      fixed_ = affinity::build_fixed_set(pool, *oracle_, cache_, targets_, cfg_.fixed_threshold);
      ev["source"] = "pool";
      ev["pool_size"] = pool.size();
      ev["threshold"] = cfg_.fixed_threshold;
      cache_.save_csv((out_ / "scores.csv").string());
    }
    if (fixed_.empty())
      throw std::runtime_error("engine: fixed specific set is empty; relax fixed_threshold");
    ev["n"] = fixed_.size();
    ev["smiles"] = fixed_;
    writer_->append(std::move(ev));
  }

  void step_initial_finetune() {
    if (const json* e = replay_peek("finetune_init")) {
      note_weights(e->at("weights"), &current_, &current_path_, &current_hash_);
      replay_advance();
      return;
    }
    if (check_interrupt()) return;
    auto result = vae::finetune(general(), training_corpus(), vocab_,
                                tcfg(cfg_.epochs_finetune, seed_for(cfg_.seed, "engine.finetune.init")));
    current_ = std::move(result.params);
    json w = save_weights(*current_, "weights/init.ckpt");
    current_path_ = w.at("path").get<std::string>();
    current_hash_ = parse_hex16(w.at("hash").get<std::string>());
    json ev;
    ev["type"] = "finetune_init";
    ev["n_data"] = fixed_.size();
    ev["weights"] = std::move(w);
    writer_->append(std::move(ev));
  }

  // Candidate-level work shared by the filter pipeline; computed in index
  // order across `threads` workers, so the outcome is independent of N.
  struct CandEval {
    bool motif = false, prop = false, smarts2 = true, fits_vocab = false;
    fp::Fingerprint fpr;
  };

  std::vector<CandEval> evaluate_candidates(const std::vector<std::string>& canon) {
    std::vector<CandEval> out(canon.size());
    const bool want_stage2 = cfg_.smarts_stage == "in_loop";
    auto work = [&](size_t lo, size_t hi) {
      for (size_t k = lo; k < hi; ++k) {
        auto pr = chem::parse_smiles(canon[k]);
        if (!pr.ok())
          throw std::runtime_error("engine: canonical SMILES failed to reparse: " + canon[k]);
        const chem::MolGraph& mol = *pr.mol;
        CandEval& ev = out[k];
        ev.motif = smarts::screen(mol, stage1_).pass;
        ev.prop = desc_->qed(mol) >= cfg_.qed_min && desc_->sa_score(mol) <= cfg_.sa_max;
        if (want_stage2) ev.smarts2 = smarts::screen(mol, stage2_).pass;
        ev.fpr = fp::morgan_fingerprint(mol);
        auto toks = vocab_.tokenize(canon[k]);
        ev.fits_vocab = toks.has_value() &&
                        static_cast<int>(toks->size()) + 1 <= cfg_.max_smiles_len;
      }
    };
    size_t n_workers = std::min<size_t>(std::max(cfg_.threads, 1), std::max<size_t>(canon.size(), 1));
    if (n_workers <= 1) {
      work(0, canon.size());
      return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_workers);
    size_t chunk = (canon.size() + n_workers - 1) / n_workers;
    for (size_t w = 0; w < n_workers; ++w) {
      size_t lo = w * chunk, hi = std::min(canon.size(), lo + chunk);
      pool.emplace_back([&, lo, hi, w] {
        try {
          work(lo, hi);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

  // Returns false when interrupted before the step ran.
  bool step_chemical(int i, int j, const PhaseSpec& phase) {
    if (const json* e = replay_peek("chemical_cycle")) {
      if (e->at("affinity_cycle").get<int>() != i || e->at("chemical_cycle").get<int>() != j)
        throw std::runtime_error("engine: ledger chemical cycle out of order at event " +
                                 std::to_string(replay_pos_));
      for (const auto& s : e->at("added")) accumulated_.insert(s.get<std::string>());
      note_weights(e->at("weights"), &current_, &current_path_, &current_hash_);
      replay_advance();
      return true;
    }
    if (check_interrupt()) return false;

    std::set<std::string> snapshot = cumulative();
    auto sampled = vae::sample(current(), vocab_, static_cast<size_t>(phase.gen_size),
                               seed_for(cfg_.seed, "engine.sample", i, j), cfg_.max_smiles_len);
    auto stats = metrics::generation_stats(sampled, snapshot);

    const std::vector<std::string>& canon = stats.novel_canonical;
    auto evals = evaluate_candidates(canon);

    size_t after_motifs = 0, after_prop = 0, after_ta = 0, after_smarts = 0;
    std::vector<std::string> added;
    for (size_t k = 0; k < canon.size(); ++k) {
      const CandEval& ev = evals[k];
      if (!ev.motif) continue;
      ++after_motifs;
      if (!ev.prop) continue;
      ++after_prop;
      double max_sim = 0.0;
      for (const auto& m : snapshot) max_sim = std::max(max_sim, fp::tanimoto(ev.fpr, fp_of(m)));
      if (!(max_sim < phase.ta_threshold)) continue;
      ++after_ta;
      if (!ev.smarts2) continue;
      ++after_smarts;
      if (!ev.fits_vocab) continue;  // canonical form must fine-tune later
      added.push_back(canon[k]);
    }
    std::sort(added.begin(), added.end());
    for (const auto& s : added) {
      accumulated_.insert(s);
      fp_memo_.emplace(s, evals[std::find(canon.begin(), canon.end(), s) - canon.begin()].fpr);
    }

    auto result = vae::finetune(general(), training_corpus(), vocab_,
                                tcfg(cfg_.epochs_finetune,
                                     seed_for(cfg_.seed, "engine.finetune.chem", i, j)));
    current_ = std::move(result.params);
    char rel[64];
    std::snprintf(rel, sizeof rel, "weights/c_%03d_%02d.ckpt", i, j);
    json w = save_weights(*current_, rel);
    current_path_ = w.at("path").get<std::string>();
    current_hash_ = parse_hex16(w.at("hash").get<std::string>());

    json ev;
    ev["type"] = "chemical_cycle";
    ev["affinity_cycle"] = i;
    ev["chemical_cycle"] = j;
    ev["gen_size"] = phase.gen_size;
    ev["ta_threshold"] = phase.ta_threshold;
    json st;
    st["n_gen"] = stats.n_gen;
    st["n_val"] = stats.n_val;
    st["n_uni"] = stats.n_uni;
    st["n_unk"] = stats.n_unk;
    st["validity"] = stats.validity ? json(*stats.validity) : json(nullptr);
    st["uniqueness"] = stats.uniqueness ? json(*stats.uniqueness) : json(nullptr);
    st["novelty"] = stats.novelty ? json(*stats.novelty) : json(nullptr);
    ev["stats"] = std::move(st);
    json counts;
    counts["after_motifs"] = after_motifs;
    counts["after_properties"] = after_prop;
    counts["after_ta"] = after_ta;
    counts["after_smarts"] = after_smarts;
    counts["added"] = added.size();
    ev["counts"] = std::move(counts);
    ev["added"] = added;
    ev["accumulated_size"] = accumulated_.size();
    ev["cumulative_size"] = fixed_.size() + accumulated_.size();
    ev["weights"] = std::move(w);
    writer_->append(std::move(ev));
    return true;
  }

  AffinityStepResult step_affinity(int i) {
    if (const json* e = replay_peek("affinity_cycle")) {
      if (e->at("cycle").get<int>() != i)
        throw std::runtime_error("engine: ledger affinity cycle out of order at event " +
                                 std::to_string(replay_pos_));
      auto updated = e->at("updated").get<std::vector<std::string>>();
      accumulated_ = std::set<std::string>(updated.begin(), updated.end());
      st_.t_g_milli = e->at("t_global_after_milli").get<long long>();
      st_.t_ind_milli = e->at("t_ind_after_milli").get<long long>();
      st_.counter = e->at("counter").get<int>();
      st_.cycle = i;
      note_weights(e->at("weights"), &current_, &current_path_, &current_hash_);
      bool stop = e->at("stop").get<bool>();
      replay_advance();
      return {stop, false};
    }
    if (check_interrupt()) return {false, true};

    std::vector<std::string> pool(accumulated_.begin(), accumulated_.end());
    auto records = affinity::score_all(*oracle_, cache_, pool, targets_);
    std::vector<std::string> updated;
    for (const auto& rec : records)
      if (affinity::evaluate(rec, st_)) updated.push_back(rec.smiles);

    auto dec = affinity::decay(st_, static_cast<int>(updated.size()));
    auto pat = affinity::update_patience(dec.state, dec.decayed);

    json ev;
    ev["type"] = "affinity_cycle";
    ev["cycle"] = i;
    ev["n_scored"] = pool.size();
    ev["n_passed"] = updated.size();
    ev["t_global_before_milli"] = st_.t_g_milli;
    ev["t_ind_before_milli"] = st_.t_ind_milli;
    ev["decayed"] = dec.decayed;
    ev["t_global_after_milli"] = pat.state.t_g_milli;
    ev["t_ind_after_milli"] = pat.state.t_ind_milli;
    ev["counter"] = pat.state.counter;
    ev["stop"] = pat.stop;
    ev["updated"] = updated;

    st_ = pat.state;
    accumulated_ = std::set<std::string>(updated.begin(), updated.end());

    auto result = vae::finetune(general(), training_corpus(), vocab_,
                                tcfg(cfg_.epochs_finetune,
                                     seed_for(cfg_.seed, "engine.finetune.affinity", i)));
    current_ = std::move(result.params);
    char rel[64];
    std::snprintf(rel, sizeof rel, "weights/a_%03d.ckpt", i);
    json w = save_weights(*current_, rel);
    current_path_ = w.at("path").get<std::string>();
    current_hash_ = parse_hex16(w.at("hash").get<std::string>());
    ev["weights"] = std::move(w);

    cache_.save_csv((out_ / "scores.csv").string());
    writer_->append(std::move(ev));
    return {pat.stop, false};
  }

  void step_end(const std::string& reason, int cycles) {
    json ev;
    ev["type"] = "end";
    ev["reason"] = reason;
    ev["affinity_cycles"] = cycles;
    writer_->append(std::move(ev));
  }

  RunResult drive() {
    RunResult result;
    result.out_dir = out_.string();

    // A finished ledger only needs its reports rebuilt.
    if (!replay_.empty() && replay_.back().at("type").get<std::string>() == "end") {
      const json& end = replay_.back();
      result.stop_reason = end.at("reason").get<std::string>();
      result.affinity_cycles = end.at("affinity_cycles").get<int>();
      result.candidates = build_reports(out_);
      return result;
    }

    step_header();
    step_general_weights();
    if (!interrupted_) step_fixed_set();
    if (!interrupted_) step_initial_finetune();

    int i = 1;
    std::string reason;
    while (!interrupted_) {
      const PhaseSpec& phase =
          cfg_.phases[std::min<size_t>(static_cast<size_t>(i) - 1, cfg_.phases.size() - 1)];
      for (int j = 1; j <= phase.n_chemical; ++j)
        if (!step_chemical(i, j, phase)) break;
      if (interrupted_) break;
      auto aff = step_affinity(i);
      if (aff.interrupted) break;
      if (aff.stop) {
        reason = "patience";
        break;
      }
      if (i >= cfg_.max_affinity_cycles) {
        reason = "max_cycles";
        break;
      }
      if (!cfg_.repeat_last_phase && static_cast<size_t>(i) >= cfg_.phases.size()) {
        reason = "phases_done";
        break;
      }
      ++i;
    }

    if (interrupted_) {
      result.interrupted = true;
      result.affinity_cycles = st_.cycle;
      return result;
    }
    step_end(reason, i);
    result.stop_reason = reason;
    result.affinity_cycles = i;
    result.candidates = build_reports(out_);
    return result;
  }
};

}  // namespace

RunResult run_workflow(const RunConfig& cfg, const std::string& out_dir,
                       const InterruptFn& interrupt) {
  cfg.validate();
  fs::path out = out_dir;
  if (fs::exists(out / "ledger.jsonl"))
    throw std::runtime_error("engine: " + out.string() +
                             " already contains a ledger; resume it instead");
  fs::create_directories(out);
  Workflow w(cfg, out, interrupt);
  return w.fresh();
}

RunResult resume_workflow(const std::string& out_dir, const InterruptFn& interrupt) {
  fs::path out = out_dir;
  auto led = read_ledger((out / "ledger.jsonl").string());
  if (led.events.empty()) throw std::runtime_error("engine: ledger is empty");
  const json& header = led.events.front();
  if (header.at("type").get<std::string>() != "header")
    throw std::runtime_error("engine: first ledger event is not a header");
  RunConfig cfg = RunConfig::parse(header.at("config").get<std::string>());
  Workflow w(std::move(cfg), out, interrupt);
  return w.resume(std::move(led));
}

size_t write_reports(const std::string& out_dir) { return build_reports(out_dir); }

}  // namespace mtgen::engine
