// Fixed 50-symbol SMILES token vocabulary: character-level with two-character
// tokens for Cl/Br, three specials (PAD/BOS/EOS) and reserved spare slots so
// the one-hot width stays stable across versions.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtgen::vae {

class Vocabulary {
 public:
  static constexpr int kSize = 50;
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary();

  int size() const { return kSize; }

  // Token index, or -1 when the symbol is not in the vocabulary.
  int index_of(std::string_view token) const;
  const std::string& token_at(int index) const { return tokens_[index]; }

  // Greedy left-to-right tokenization (Cl/Br before single characters).
  // nullopt when the string contains a symbol outside the vocabulary.
  std::optional<std::vector<int>> tokenize(std::string_view smiles) const;

  // Inverse of tokenize; PAD/BOS/EOS and reserved slots render as nothing.
  std::string detokenize(const std::vector<int>& tokens) const;

 private:
  std::vector<std::string> tokens_;
};

}  // namespace mtgen::vae
