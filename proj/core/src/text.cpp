#include "hcap/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "hcap/error.hpp"

namespace hcap::text {

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : sentence) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || (std::ispunct(c) && c != '\'')) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Vocabulary::Vocabulary() : words_{"<pad>", "<bos>", "<eos>", "<unk>"} {
  for (int i = 0; i < static_cast<int>(words_.size()); ++i) index_[words_[static_cast<std::size_t>(i)]] = i;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& captions) {
  std::set<std::string> words;
  for (const auto& c : captions) {
    for (auto& t : tokenize(c)) words.insert(std::move(t));
  }
  Vocabulary v;
  for (const auto& w : words) {
    if (v.index_.count(w)) continue;
    v.index_[w] = static_cast<int>(v.words_.size());
    v.words_.push_back(w);
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(words_.size()));
  }
  return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view caption) const {
  std::vector<int> ids;
  for (const auto& t : tokenize(caption)) ids.push_back(id(t));
  ids.push_back(kEos);
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos || i == kUnk) continue;
    out.push_back(word(i));
  }
  return join(out);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write vocabulary " + path.string());
  for (std::size_t i = 4; i < words_.size(); ++i) os << words_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot read vocabulary " + path.string());
  Vocabulary v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (v.index_.count(line)) throw FormatError(path.string() + ": duplicate word '" + line + "'");
    v.index_[line] = static_cast<int>(v.words_.size());
    v.words_.push_back(line);
  }
  return v;
}

}  // namespace hcap::text
