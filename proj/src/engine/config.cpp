#include "mtgen/engine/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace mtgen::engine {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for '" + key + "': " + v);
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for '" + key + "': " + v);
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("config: bad unsigned integer for '" + key + "': " + v);
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad bool for '" + key + "': " + v);
}

std::vector<PhaseSpec> parse_phases(const std::string& v, int default_gen) {
  std::vector<PhaseSpec> out;
  for (const auto& item : split(v, ',')) {
    if (item.empty()) continue;
    auto parts = split(item, ':');
    if (parts.size() < 2 || parts.size() > 3)
      throw std::invalid_argument("config: phase '" + item + "' is not n:ta or n:ta:gen");
    PhaseSpec p;
    p.n_chemical = static_cast<int>(parse_int("phases", parts[0]));
    p.ta_threshold = parse_double("phases", parts[1]);
    p.gen_size = parts.size() == 3 ? static_cast<int>(parse_int("phases", parts[2])) : default_gen;
    out.push_back(p);
  }
  if (out.empty()) throw std::invalid_argument("config: phases is empty");
  return out;
}

std::vector<std::pair<double, double>> parse_pairs(const std::string& v) {
  std::vector<std::pair<double, double>> out;
  for (const auto& item : split(v, ',')) {
    if (item.empty()) continue;
    auto parts = split(item, '/');
    if (parts.size() != 2)
      throw std::invalid_argument("config: report threshold '" + item + "' is not g/i");
    out.emplace_back(parse_double("report_thresholds", parts[0]),
                     parse_double("report_thresholds", parts[1]));
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ','))
    if (!item.empty()) out.push_back(parse_double(key, item));
  return out;
}

// Shortest round-trip decimal form, so parse(to_text()) is exact.
std::string fmt(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("config: number format failed");
  return std::string(buf, p);
}

std::string fmt_phases(const std::vector<PhaseSpec>& phases) {
  std::string out;
  for (const auto& p : phases) {
    if (!out.empty()) out += ',';
    out += std::to_string(p.n_chemical) + ':' + fmt(p.ta_threshold) + ':' +
           std::to_string(p.gen_size);
  }
  return out;
}

std::string fmt_pairs(const std::vector<std::pair<double, double>>& pairs) {
  std::string out;
  for (const auto& [g, i] : pairs) {
    if (!out.empty()) out += ',';
    out += fmt(g) + '/' + fmt(i);
  }
  return out;
}

std::string fmt_doubles(const std::vector<double>& xs) {
  std::string out;
  for (double x : xs) {
    if (!out.empty()) out += ',';
    out += fmt(x);
  }
  return out;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int default_gen = cfg.phases.front().gen_size;
  std::string phases_raw;  // applied last so gen_size can set the phase default
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (key == "phases") phases_raw = val;
    else if (key == "max_affinity_cycles") cfg.max_affinity_cycles = static_cast<int>(parse_int(key, val));
    else if (key == "repeat_last_phase") cfg.repeat_last_phase = parse_bool(key, val);
    else if (key == "gen_size") default_gen = static_cast<int>(parse_int(key, val));
    else if (key == "qed_min") cfg.qed_min = parse_double(key, val);
    else if (key == "sa_max") cfg.sa_max = parse_double(key, val);
    else if (key == "smarts_stage") cfg.smarts_stage = val;
    else if (key == "stage1_catalogues") cfg.stage1_catalogues = val;
    else if (key == "stage2_catalogues") cfg.stage2_catalogues = val;
    else if (key == "t_global_start") cfg.t_global_start = parse_double(key, val);
    else if (key == "t_ind_start") cfg.t_ind_start = parse_double(key, val);
    else if (key == "delta") cfg.delta = parse_double(key, val);
    else if (key == "n_min") cfg.n_min = static_cast<int>(parse_int(key, val));
    else if (key == "patience") cfg.patience = static_cast<int>(parse_int(key, val));
    else if (key == "fixed_threshold") cfg.fixed_threshold = parse_double(key, val);
    else if (key == "vae_hidden") cfg.vae_hidden = static_cast<int>(parse_int(key, val));
    else if (key == "vae_latent") cfg.vae_latent = static_cast<int>(parse_int(key, val));
    else if (key == "vae_fc") cfg.vae_fc = static_cast<int>(parse_int(key, val));
    else if (key == "epochs_general") cfg.epochs_general = static_cast<int>(parse_int(key, val));
    else if (key == "epochs_finetune") cfg.epochs_finetune = static_cast<int>(parse_int(key, val));
    else if (key == "max_smiles_len") cfg.max_smiles_len = static_cast<int>(parse_int(key, val));
    else if (key == "seed") cfg.seed = parse_u64(key, val);
    else if (key == "threads") cfg.threads = static_cast<int>(parse_int(key, val));
    else if (key == "data_dir") cfg.data_dir = val;
    else if (key == "targets_file") cfg.targets_file = val;
    else if (key == "general_corpus") cfg.general_corpus = val;
    else if (key == "fixed_pool") cfg.fixed_pool = val;
    else if (key == "fixed_set_file") cfg.fixed_set_file = val;
    else if (key == "general_weights") cfg.general_weights = val;
    else if (key == "report_thresholds") cfg.report_thresholds = parse_pairs(val);
    else if (key == "cluster_epsilons") cfg.cluster_epsilons = parse_doubles(key, val);
    else if (key == "cluster_min_pts") cfg.cluster_min_pts = static_cast<int>(parse_int(key, val));
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  if (!phases_raw.empty()) {
    cfg.phases = parse_phases(phases_raw, default_gen);
  } else {
    for (auto& p : cfg.phases) p.gen_size = default_gen;
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "phases = " << fmt_phases(phases) << '\n'
      << "max_affinity_cycles = " << max_affinity_cycles << '\n'
      << "repeat_last_phase = " << (repeat_last_phase ? "true" : "false") << '\n'
      << "qed_min = " << fmt(qed_min) << '\n'
      << "sa_max = " << fmt(sa_max) << '\n'
      << "smarts_stage = " << smarts_stage << '\n'
      << "stage1_catalogues = " << stage1_catalogues << '\n'
      << "stage2_catalogues = " << stage2_catalogues << '\n'
      << "t_global_start = " << fmt(t_global_start) << '\n'
      << "t_ind_start = " << fmt(t_ind_start) << '\n'
      << "delta = " << fmt(delta) << '\n'
      << "n_min = " << n_min << '\n'
      << "patience = " << patience << '\n'
      << "fixed_threshold = " << fmt(fixed_threshold) << '\n'
      << "vae_hidden = " << vae_hidden << '\n'
      << "vae_latent = " << vae_latent << '\n'
      << "vae_fc = " << vae_fc << '\n'
      << "epochs_general = " << epochs_general << '\n'
      << "epochs_finetune = " << epochs_finetune << '\n'
      << "max_smiles_len = " << max_smiles_len << '\n'
      << "seed = " << seed << '\n'
      << "threads = " << threads << '\n'
      << "data_dir = " << data_dir << '\n'
      << "targets_file = " << targets_file << '\n'
      << "general_corpus = " << general_corpus << '\n'
      << "fixed_pool = " << fixed_pool << '\n'
      << "fixed_set_file = " << fixed_set_file << '\n'
      << "general_weights = " << general_weights << '\n'
      << "report_thresholds = " << fmt_pairs(report_thresholds) << '\n'
      << "cluster_epsilons = " << fmt_doubles(cluster_epsilons) << '\n'
      << "cluster_min_pts = " << cluster_min_pts << '\n';
  return out.str();
}

void RunConfig::validate() const {
  if (phases.empty()) throw std::invalid_argument("config: phases is empty");
  for (const auto& p : phases) {
    if (p.n_chemical < 1) throw std::invalid_argument("config: phase n_chemical must be >= 1");
    if (p.gen_size < 1) throw std::invalid_argument("config: phase gen_size must be >= 1");
    if (!(p.ta_threshold > 0.0 && p.ta_threshold <= 1.0))
      throw std::invalid_argument("config: phase ta_threshold must be in (0, 1]");
  }
  if (max_affinity_cycles < 1) throw std::invalid_argument("config: max_affinity_cycles must be >= 1");
  if (smarts_stage != "in_loop" && smarts_stage != "post_generation" && smarts_stage != "off")
    throw std::invalid_argument("config: smarts_stage must be in_loop, post_generation or off");
  if (delta < 0.0) throw std::invalid_argument("config: delta must be >= 0");
  if (n_min < 0) throw std::invalid_argument("config: n_min must be >= 0");
  if (patience < 1) throw std::invalid_argument("config: patience must be >= 1");
  if (vae_hidden < 1 || vae_latent < 1 || vae_fc < 1)
    throw std::invalid_argument("config: vae dimensions must be >= 1");
  if (epochs_general < 0 || epochs_finetune < 0)
    throw std::invalid_argument("config: epoch counts must be >= 0");
  if (max_smiles_len < 2) throw std::invalid_argument("config: max_smiles_len must be >= 2");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (cluster_min_pts < 1) throw std::invalid_argument("config: cluster_min_pts must be >= 1");
  for (double e : cluster_epsilons)
    if (!(e > 0.0)) throw std::invalid_argument("config: cluster epsilons must be > 0");
}

}  // namespace mtgen::engine
