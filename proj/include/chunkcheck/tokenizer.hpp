#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace chunkcheck {

// Word-level vocabulary with a fixed special-token convention shared by every
// model component. Special ids never depend on the corpus.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;  // non-specials; index = id - 5

  int size() const { return kNumSpecials + static_cast<int>(id_to_token.size()); }
  int id_of(const std::string& token) const;
  const std::string& token_of(int id) const;
};

// Lowercase, split on whitespace and punctuation boundaries; punctuation
// characters become their own tokens.
std::vector<std::string> normalize_tokens(const std::string& text);

// Split on '.', '!', '?' followed by whitespace or end of text; the
// terminator stays with its sentence. Abbreviations are not special-cased.
std::vector<std::string> split_sentences(const std::string& text);

Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t max_size);

std::vector<int> encode(const Vocab& v, const std::string& text);
std::string decode(const Vocab& v, const std::vector<int>& ids);

// One token per line, line number = id - 5. UTF-8.
void save_vocab(const Vocab& v, const std::string& path);
Vocab load_vocab(const std::string& path);

}  // namespace chunkcheck
