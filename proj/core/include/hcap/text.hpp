#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hcap::text {

// Lowercased tokens split on whitespace and ASCII punctuation.
std::vector<std::string> tokenize(std::string_view sentence);
std::string join(const std::vector<std::string>& tokens);

/// Closed caption vocabulary. Ids 0..3 are <pad>, <bos>, <eos>, <unk>;
/// words follow in sorted order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary();
  static Vocabulary build(const std::vector<std::string>& captions);

  std::size_t size() const { return words_.size(); }
  int id(const std::string& word) const;
  const std::string& word(int id) const;

  // Token ids of the caption followed by <eos>.
  std::vector<int> encode(std::string_view caption) const;
  // Words up to (excluding) the first <eos>; specials are skipped.
  std::string decode(const std::vector<int>& ids) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

}  // namespace hcap::text
