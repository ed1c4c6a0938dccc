#include "mtgen/engine/ledger.hpp"

#include <stdexcept>

#include "mtgen/util/hash.hpp"

namespace mtgen::engine {
namespace {

std::string hex16(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

uint64_t from_hex16(const std::string& s) {
  if (s.size() != 16) throw std::runtime_error("ledger: chain field is not 16 hex digits");
  uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<uint64_t>(c - 'a' + 10);
    else throw std::runtime_error("ledger: chain field is not 16 hex digits");
  }
  return v;
}

}  // namespace

uint64_t ledger_chain_seed() { return util::fnv1a64("mtgen-ledger-v1"); }

LedgerWriter::LedgerWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::trunc), chain_(ledger_chain_seed()) {
  if (!out_) throw std::runtime_error("ledger: cannot open " + path + " for writing");
}

LedgerWriter::LedgerWriter(const std::string& path, int next_seq, uint64_t chain)
    : out_(path, std::ios::binary | std::ios::app), next_seq_(next_seq), chain_(chain) {
  if (!out_) throw std::runtime_error("ledger: cannot open " + path + " for append");
}

void LedgerWriter::append(json event) {
  if (!event.contains("type")) throw std::runtime_error("ledger: event without type");
  json line;
  line["seq"] = next_seq_;
  for (auto& [k, v] : event.items()) line[k] = std::move(v);
  chain_ = util::fnv1a64(line.dump(), chain_);
  line["chain"] = hex16(chain_);
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("ledger: write failed");
  ++next_seq_;
}

LedgerContents read_ledger(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ledger: cannot open " + path);
  LedgerContents out;
  out.chain = ledger_chain_seed();
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.empty()) continue;
    json line;
    try {
      line = json::parse(raw);
    } catch (const json::exception& e) {
      throw std::runtime_error("ledger line " + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    if (!line.is_object() || !line.contains("seq") || !line.contains("type") || !line.contains("chain"))
      throw std::runtime_error("ledger line " + std::to_string(line_no) + ": missing seq/type/chain");
    uint64_t claimed = from_hex16(line["chain"].get<std::string>());
    line.erase("chain");
    if (line["seq"].get<int>() != out.next_seq)
      throw std::runtime_error("ledger line " + std::to_string(line_no) + ": sequence break (expected " +
                               std::to_string(out.next_seq) + ")");
    uint64_t expect = util::fnv1a64(line.dump(), out.chain);
    if (expect != claimed)
      throw std::runtime_error("ledger line " + std::to_string(line_no) + ": chain mismatch (tampered or corrupt)");
    out.chain = expect;
    out.events.push_back(std::move(line));
    ++out.next_seq;
  }
  return out;
}

}  // namespace mtgen::engine
