#include "mtgen/vae/vocab.hpp"

#include <stdexcept>

namespace mtgen::vae {

Vocabulary::Vocabulary() {
  tokens_ = {
      "<pad>", "<bos>", "<eos>",
      // punctuation: branches, brackets, bonds, charge, ring-closure escape
      "(", ")", "[", "]", "=", "#", ":", "-", "+", "%",
      // digits: ring closures, bracket H counts, charge magnitudes
      "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
      // organic-subset elements
      "B", "C", "N", "O", "P", "S", "F", "I", "Cl", "Br",
      // aromatic forms
      "b", "c", "n", "o", "p", "s",
      // bracket-atom hydrogen count
      "H",
  };
  while (tokens_.size() < kSize) tokens_.push_back("<reserved_" + std::to_string(tokens_.size()) + ">");
  if (tokens_.size() != kSize) throw std::logic_error("vocabulary must have exactly 50 entries");
}

int Vocabulary::index_of(std::string_view token) const {
  for (size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i] == token) return static_cast<int>(i);
  return -1;
}

std::optional<std::vector<int>> Vocabulary::tokenize(std::string_view smiles) const {
  std::vector<int> out;
  out.reserve(smiles.size());
  size_t i = 0;
  while (i < smiles.size()) {
    int idx = -1;
    if (i + 1 < smiles.size()) idx = index_of(smiles.substr(i, 2));
    size_t step = 2;
    if (idx < 0) {
      idx = index_of(smiles.substr(i, 1));
      step = 1;
    }
    if (idx < 0) return std::nullopt;
    out.push_back(idx);
    i += step;
  }
  return out;
}

std::string Vocabulary::detokenize(const std::vector<int>& tokens) const {
  std::string out;
  for (int t : tokens) {
    if (t < 0 || t >= kSize) continue;
    const std::string& tok = tokens_[t];
    if (tok.size() >= 2 && tok.front() == '<') continue;  // specials/reserved
    out += tok;
  }
  return out;
}

}  // namespace mtgen::vae
