#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pidet {

inline constexpr std::int32_t kPadIndex = 0;
inline constexpr std::int32_t kUnkIndex = 1;

namespace detail {

// Minimal UTF-8 decode: returns the codepoint at `i` and advances `i`.
// Malformed bytes decode as U+FFFD one byte at a time.
inline std::uint32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  std::size_t len = 0;
  std::uint32_t cp = 0;
  if (b0 < 0x80) {
    len = 1;
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k < len; ++k) {
    if ((byte(i + k) & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (byte(i + k) & 0x3F);
  }
  i += len;
  return cp;
}

// Accented Latin letters (Latin-1 Supplement letters and Latin Extended-A/B).
// These are treated as droppable fragments of a word rather than separators,
// so "Héllo" collapses to "hllo" instead of splitting into two tokens.
inline bool is_latin_letter(std::uint32_t cp) {
  return cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7;
}

}  // namespace detail

// Canonical text form shared by every feature path: newlines/tabs become
// spaces, non-ASCII is stripped (accented Latin letters dropped in place,
// any other non-ASCII codepoint acts as a separator), whitespace runs
// collapse, ASCII uppercase folds to lowercase, ends trimmed. Idempotent.
inline std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char b = static_cast<unsigned char>(text[i]);
    if (b < 0x80) {
      ++i;
      if (b == ' ' || b == '\n' || b == '\r' || b == '\t') {
        pending_space = true;
        continue;
      }
      if (b < 0x20 || b == 0x7F) continue;  // other control chars vanish
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(b >= 'A' && b <= 'Z' ? static_cast<char>(b + 32) : static_cast<char>(b));
      continue;
    }
    const std::uint32_t cp = detail::next_codepoint(text, i);
    if (!detail::is_latin_letter(cp)) pending_space = true;
  }
  return out;
}

// Maximal runs of [a-z0-9]; everything else separates. Expects normalized text.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (const char ch : text) {
    if ((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9')) {
      cur.push_back(ch);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// Token table for the network input alphabet. Indices 0 and 1 are reserved
// for PAD and UNK; real tokens start at 2 and stay dense.
struct Vocabulary {
  std::unordered_map<std::string, std::int32_t> token_to_index;
  std::vector<std::string> index_to_token;  // [0]=PAD, [1]=UNK
  std::size_t max_size = 0;

  std::size_t size() const { return index_to_token.size(); }

  std::int32_t lookup(const std::string& token) const {
    const auto it = token_to_index.find(token);
    return it == token_to_index.end() ? kUnkIndex : it->second;
  }
};

// Top max_size tokens by total frequency, ties broken lexicographically;
// indices assigned in (frequency desc, token asc) order starting at 2.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                                   std::size_t max_size) {
  if (max_size < 1) throw std::invalid_argument("build_vocabulary: max_size must be >= 1");
  if (docs.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++freq[tok];

  std::vector<std::pair<std::string, std::uint64_t>> order(freq.begin(), freq.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (order.size() > max_size) order.resize(max_size);

  Vocabulary vocab;
  vocab.max_size = max_size;
  vocab.index_to_token = {"<pad>", "<unk>"};
  vocab.index_to_token.reserve(order.size() + 2);
  for (const auto& [tok, _] : order) {
    vocab.token_to_index.emplace(tok, static_cast<std::int32_t>(vocab.index_to_token.size()));
    vocab.index_to_token.push_back(tok);
  }
  return vocab;
}

// Fixed-length integer encoding: UNK for out-of-vocabulary tokens, truncation
// to the first max_len tokens, right padding with PAD.
inline std::vector<std::int32_t> encode_sequence(const std::vector<std::string>& tokens,
                                                 const Vocabulary& vocab,
                                                 std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("encode_sequence: max_len must be >= 1");
  std::vector<std::int32_t> seq(max_len, kPadIndex);
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) seq[i] = vocab.lookup(tokens[i]);
  return seq;
}

}  // namespace pidet
