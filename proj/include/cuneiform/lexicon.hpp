#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cuneiform::lexicon {

struct LexiconEntry {
  std::vector<std::string> signs;
  std::string akkadian;
  std::string english;
  std::string arabic_translit;
  std::string arabic;
  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

class Lexicon {
 public:
  Lexicon() = default;
  // Throws InputError on an empty or duplicated sign sequence.
  explicit Lexicon(std::vector<LexiconEntry> entries);

  void add(LexiconEntry entry);

  const std::vector<LexiconEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t longest() const noexcept { return longest_; }

  const LexiconEntry* find(std::span<const std::string> signs) const;

  friend bool operator==(const Lexicon& a, const Lexicon& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<LexiconEntry> entries_;
  std::map<std::vector<std::string>, std::size_t, std::less<>> index_;
  std::size_t longest_ = 0;
};

// TSV with columns signs (comma-joined), akkadian, english, arabic_translit,
// arabic; the last two may be omitted. '#' lines and blank lines are
// skipped, and a first row starting with "signs" is taken as a header.
// With a catalog, unknown sign names are rejected. Errors name the line.
Lexicon parse_lexicon(const std::string& text, const std::string& origin = "lexicon",
                      const std::set<std::string>* catalog = nullptr);
Lexicon load_lexicon(const std::filesystem::path& path, const std::set<std::string>* catalog = nullptr);

std::string format_lexicon(const Lexicon& lexicon);
void save_lexicon(const std::filesystem::path& path, const Lexicon& lexicon);

struct Word {
  std::size_t position = 0;  // index of the first sign in the input
  std::vector<std::string> signs;
  std::string akkadian;
  std::string english;
  friend bool operator==(const Word&, const Word&) = default;
};

struct Unmatched {
  std::size_t position = 0;
  std::string sign;
  friend bool operator==(const Unmatched&, const Unmatched&) = default;
};

struct TranslationResult {
  std::vector<Word> words;
  std::vector<Unmatched> unmatched;

  // Matched sequences and unmatched singles merged back by position.
  std::vector<std::string> reconstruct() const;
  std::vector<std::string> glosses() const;
  friend bool operator==(const TranslationResult&, const TranslationResult&) = default;
};

// Greedy left-to-right longest match.
TranslationResult translate_sequence(std::span<const std::string> signs, const Lexicon& lexicon);

// TSV: kind (word/unmatched), position, signs, akkadian, english.
std::string format_translation(const TranslationResult& result);

// Positional matches over max(len(predicted), len(truth)). Throws
// InputError when both are empty.
double relative_accuracy(std::span<const std::string> predicted, std::span<const std::string> truth);
std::size_t positional_matches(std::span<const std::string> predicted, std::span<const std::string> truth);

// Sign names separated by whitespace or commas; '#' starts a comment.
std::vector<std::string> parse_sign_list(const std::string& text);
std::vector<std::string> load_ground_truth(const std::filesystem::path& path,
                                           const std::set<std::string>* catalog = nullptr);

}  // namespace cuneiform::lexicon
