#include "chunkcheck/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace chunkcheck {

int Vocab::id_of(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  static const std::string specials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                         "[MASK]"};
  if (id < 0 || id >= size())
    throw std::out_of_range("token id " + std::to_string(id) +
                            " outside vocab of size " + std::to_string(size()));
  if (id < kNumSpecials) return specials[id];
  return id_to_token[id - kNumSpecials];
}

std::vector<std::string> normalize_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      flush();
    } else if (ch < 128 && !std::isalnum(ch) && ch != '\'') {
      flush();
      out.push_back(std::string(1, static_cast<char>(ch)));
    } else {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    cur.push_back(text[i]);
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      const bool at_end = i + 1 == text.size();
      if (at_end || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
        // trim surrounding whitespace
        std::size_t a = cur.find_first_not_of(" \t\n\r");
        std::size_t b = cur.find_last_not_of(" \t\n\r");
        if (a != std::string::npos) out.push_back(cur.substr(a, b - a + 1));
        cur.clear();
      }
    }
  }
  std::size_t a = cur.find_first_not_of(" \t\n\r");
  if (a != std::string::npos)
    out.push_back(cur.substr(a, cur.find_last_not_of(" \t\n\r") - a + 1));
  return out;
}

Vocab build_vocab(const std::vector<std::string>& corpus,
                  std::size_t max_size) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  if (max_size <= Vocab::kNumSpecials)
    throw std::invalid_argument("build_vocab: max_size must exceed " +
                                std::to_string(Vocab::kNumSpecials));
  // std::map keeps tie-breaking lexicographic and the build deterministic.
  std::map<std::string, std::size_t> freq;
  for (const auto& text : corpus)
    for (auto& tok : normalize_tokens(text)) ++freq[tok];

  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(),
                                                           freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });

  Vocab v;
  const std::size_t budget = max_size - Vocab::kNumSpecials;
  for (std::size_t i = 0; i < entries.size() && i < budget; ++i) {
    v.token_to_id[entries[i].first] = static_cast<int>(v.id_to_token.size()) +
                                      Vocab::kNumSpecials;
    v.id_to_token.push_back(entries[i].first);
  }
  return v;
}

std::vector<int> encode(const Vocab& v, const std::string& text) {
  std::vector<int> ids;
  for (auto& tok : normalize_tokens(text)) ids.push_back(v.id_of(tok));
  return ids;
}

std::string decode(const Vocab& v, const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += v.token_of(ids[i]);
  }
  return out;
}

void save_vocab(const Vocab& v, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write vocab file: " + path);
  for (const auto& tok : v.id_to_token) f << tok << '\n';
}

Vocab load_vocab(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read vocab file: " + path);
  Vocab v;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    v.token_to_id[line] =
        static_cast<int>(v.id_to_token.size()) + Vocab::kNumSpecials;
    v.id_to_token.push_back(line);
  }
  return v;
}

}  // namespace chunkcheck
