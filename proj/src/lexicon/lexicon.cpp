#include "cuneiform/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cuneiform/detail/text.hpp"
#include "cuneiform/error.hpp"

namespace cuneiform::lexicon {

namespace {

std::string read_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + what + " '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool clean_field(const std::string& s) { return s.find_first_of("\t\r\n") == std::string::npos; }

}  // namespace

Lexicon::Lexicon(std::vector<LexiconEntry> entries) {
  for (auto& e : entries) add(std::move(e));
}

void Lexicon::add(LexiconEntry entry) {
  if (entry.signs.empty()) throw InputError("lexicon entry has no signs");
  for (const auto& s : entry.signs) {
    if (s.empty() || s.find_first_of(", \t\r\n") != std::string::npos) {
      throw InputError("invalid sign name '" + s + "' in lexicon entry");
    }
  }
  for (const auto* f : {&entry.akkadian, &entry.english, &entry.arabic_translit, &entry.arabic}) {
    if (!clean_field(*f)) throw InputError("lexicon field contains a tab or newline");
  }
  if (index_.contains(entry.signs)) throw InputError("duplicate sign sequence " + join(entry.signs, ','));
  index_.emplace(entry.signs, entries_.size());
  longest_ = std::max(longest_, entry.signs.size());
  entries_.push_back(std::move(entry));
}

const LexiconEntry* Lexicon::find(std::span<const std::string> signs) const {
  const std::vector<std::string> key(signs.begin(), signs.end());
  const auto it = index_.find(key);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

Lexicon parse_lexicon(const std::string& text, const std::string& origin, const std::set<std::string>* catalog) {
  Lexicon lex;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line(detail::strip_cr(raw));
    if (line.empty() || line[0] == '#') continue;
    auto fields = detail::split(line, '\t');
    const bool header = first && fields[0] == "signs";
    first = false;
    if (header) continue;
    const auto where = origin + " line " + std::to_string(lineno);
    if (fields.size() < 3 || fields.size() > 5) {
      throw FormatError(where + ": expected 3 to 5 tab-separated fields, got " + std::to_string(fields.size()));
    }
    fields.resize(5);
    LexiconEntry e;
    e.signs = detail::split(fields[0], ',');
    e.akkadian = fields[1];
    e.english = fields[2];
    e.arabic_translit = fields[3];
    e.arabic = fields[4];
    if (catalog) {
      for (const auto& s : e.signs) {
        if (!catalog->contains(s)) throw InputError(where + ": unknown sign name '" + s + "'");
      }
    }
    try {
      lex.add(std::move(e));
    } catch (const InputError& err) {
      throw InputError(where + ": " + err.what());
    }
  }
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path, const std::set<std::string>* catalog) {
  return parse_lexicon(read_text(path, "lexicon"), path.string(), catalog);
}

std::string format_lexicon(const Lexicon& lexicon) {
  std::string out = "signs\takkadian\tenglish\tarabic_translit\tarabic\n";
  for (const auto& e : lexicon.entries()) {
    out += join(e.signs, ',') + '\t' + e.akkadian + '\t' + e.english + '\t' + e.arabic_translit + '\t' + e.arabic + '\n';
  }
  return out;
}

void save_lexicon(const std::filesystem::path& path, const Lexicon& lexicon) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write lexicon '" + path.string() + "'");
  out << format_lexicon(lexicon);
  if (!out) throw IoError("failed writing lexicon '" + path.string() + "'");
}

std::vector<std::string> TranslationResult::reconstruct() const {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> pieces;
  for (const auto& w : words) pieces.emplace_back(w.position, w.signs);
  for (const auto& u : unmatched) pieces.emplace_back(u.position, std::vector<std::string>{u.sign});
  std::sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (auto& [_, signs] : pieces) out.insert(out.end(), signs.begin(), signs.end());
  return out;
}

std::vector<std::string> TranslationResult::glosses() const {
  std::vector<std::string> out;
  for (const auto& w : words) out.push_back(w.english);
  return out;
}

TranslationResult translate_sequence(std::span<const std::string> signs, const Lexicon& lexicon) {
  TranslationResult r;
  std::size_t i = 0;
  while (i < signs.size()) {
    const LexiconEntry* hit = nullptr;
    std::size_t len = std::min(lexicon.longest(), signs.size() - i);
    for (; len > 0; --len) {
      hit = lexicon.find(signs.subspan(i, len));
      if (hit) break;
    }
    if (hit) {
      r.words.push_back({i, hit->signs, hit->akkadian, hit->english});
      i += len;
    } else {
      r.unmatched.push_back({i, signs[i]});
      ++i;
    }
  }
  return r;
}

std::string format_translation(const TranslationResult& result) {
  std::string out = "kind\tposition\tsigns\takkadian\tenglish\n";
  std::size_t w = 0, u = 0;
  while (w < result.words.size() || u < result.unmatched.size()) {
    const bool take_word = u == result.unmatched.size() ||
                           (w < result.words.size() && result.words[w].position < result.unmatched[u].position);
    if (take_word) {
      const auto& x = result.words[w++];
      out += "word\t" + std::to_string(x.position) + '\t' + join(x.signs, ',') + '\t' + x.akkadian + '\t' + x.english +
             '\n';
    } else {
      const auto& x = result.unmatched[u++];
      out += "unmatched\t" + std::to_string(x.position) + '\t' + x.sign + "\t\t\n";
    }
  }
  return out;
}

std::size_t positional_matches(std::span<const std::string> predicted, std::span<const std::string> truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(predicted.size(), truth.size()); ++i) hits += predicted[i] == truth[i];
  return hits;
}

double relative_accuracy(std::span<const std::string> predicted, std::span<const std::string> truth) {
  const auto n = std::max(predicted.size(), truth.size());
  if (n == 0) throw InputError("relative accuracy of two empty sequences is undefined");
  return static_cast<double>(positional_matches(predicted, truth)) / static_cast<double>(n);
}

std::vector<std::string> parse_sign_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream words(line);
    std::string w;
    while (words >> w) out.push_back(w);
  }
  return out;
}

std::vector<std::string> load_ground_truth(const std::filesystem::path& path, const std::set<std::string>* catalog) {
  auto signs = parse_sign_list(read_text(path, "ground truth"));
  if (catalog) {
    for (std::size_t i = 0; i < signs.size(); ++i) {
      if (!catalog->contains(signs[i])) {
        throw InputError(path.string() + ": unknown sign name '" + signs[i] + "' at position " + std::to_string(i));
      }
    }
  }
  return signs;
}

}  // namespace cuneiform::lexicon
