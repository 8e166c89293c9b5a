#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tpt/tensor.hpp"

namespace tpt {

// Whitespace tokenizer: lowercases, strips punctuation (any character that is
// not a letter or digit becomes a separator).
std::vector<std::string> tokenize(const std::string& text);

// Closed vocabulary with reserved ids 0 (padding) and 1 (unknown).
class Vocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  // Builds from a token list (deduplicated, order-preserving); PAD/UNK are
  // prepended automatically.
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  // File format: one token per line, line number = id; lines 0 and 1 hold the
  // reserved PAD/UNK markers.
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  int id(const std::string& token) const;  // kUnkId when absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  // tokenize() then map; never fails (unknown words become UNK).
  std::vector<int> encode(const std::string& text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Plain-text embedding vectors: one token per line, the token followed by
// exactly table.cols() decimal floats. Rows of `table` whose token appears in
// the file are replaced; other rows keep their initialization. Returns the
// number of rows replaced.
int load_embedding_vectors(const std::string& path, const Vocab& vocab, Mat<float>& table);

}  // namespace tpt
