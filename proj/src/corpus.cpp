#include "mctm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "mctm/error.hpp"

namespace mctm {

Vocabulary::Vocabulary(std::vector<std::string> terms) {
  terms_.reserve(terms.size());
  for (auto& t : terms) {
    if (contains(t)) throw ValidationError("duplicate vocabulary term '" + t + "'");
    add(t);
  }
}

WordId Vocabulary::add(std::string_view term) {
  if (auto it = index_.find(term); it != index_.end()) return it->second;
  const auto id = static_cast<WordId>(terms_.size());
  terms_.emplace_back(term);
  index_.emplace(terms_.back(), id);
  return id;
}

std::int64_t Vocabulary::find(std::string_view term) const {
  auto it = index_.find(term);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : terms_) {
    for (unsigned char c : t) mix(c);
    mix('\n');
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Segment::Segment(std::vector<WordId> positions) : positions_(std::move(positions)) {
  std::vector<WordId> sorted(positions_);
  std::sort(sorted.begin(), sorted.end());
  for (WordId w : sorted) {
    if (!counts_.empty() && counts_.back().word == w) {
      ++counts_.back().count;
    } else {
      counts_.push_back({w, 1});
    }
  }
}

std::size_t Document::num_words() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.size();
  return n;
}

std::size_t Corpus::num_segments() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.segments.size();
  return n;
}

std::size_t Corpus::num_words() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.num_words();
  return n;
}

std::int64_t Corpus::find(std::string_view label) const {
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (documents[i].label == label) return static_cast<std::int64_t>(i);
  }
  return -1;
}

void Corpus::validate() const {
  if (documents.empty()) throw ValidationError("corpus has no documents");
  if (vocabulary.empty()) throw ValidationError("corpus vocabulary is empty");
  const auto W = vocabulary.size();
  for (const auto& d : documents) {
    if (d.segments.empty()) throw ValidationError("document '" + d.label + "' has no segments");
    for (const auto& s : d.segments) {
      if (s.size() == 0) throw ValidationError("document '" + d.label + "' has an empty segment");
      for (WordId w : s.positions()) {
        if (w >= W) {
          throw ValidationError("document '" + d.label + "' uses word id " + std::to_string(w) +
                                " outside the vocabulary (W=" + std::to_string(W) + ")");
        }
      }
    }
  }
}

void PreprocessConfig::validate() const {
  if (min_term_frequency < 1) throw ValidationError("min-term-frequency must be >= 1");
  if (min_segment_length < 1) throw ValidationError("min-segment-length must be >= 1");
}

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> paragraphs;
  std::string current;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    const bool blank = std::all_of(line.begin(), line.end(),
                                   [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    if (blank) {
      if (!current.empty()) paragraphs.push_back(std::move(current));
      current.clear();
    } else {
      if (!current.empty()) current.push_back('\n');
      current.append(line);
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  if (!current.empty()) paragraphs.push_back(std::move(current));
  return paragraphs;
}

std::vector<std::string> read_stopwords(const std::filesystem::path& path, bool lowercase) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read stopword list " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    // A stopword entry goes through the same tokenizer as the text, so
    // "don't" removes both "don" and "t".
    for (auto& t : tokenize(line, lowercase)) words.push_back(std::move(t));
  }
  return words;
}

Corpus build_corpus(std::vector<RawDocument> raw, const PreprocessConfig& config,
                    IngestStats* stats) {
  config.validate();
  IngestStats local;

  std::unordered_set<std::string> stopwords;
  for (const auto& p : config.stopword_lists) {
    for (auto& w : read_stopwords(p, config.lowercase)) stopwords.insert(std::move(w));
  }

  std::unordered_set<std::string> seen_terms;
  for (auto& doc : raw) {
    for (auto& seg : doc.segments) {
      for (const auto& t : seg) seen_terms.insert(t);
      if (!stopwords.empty()) {
        std::erase_if(seg, [&](const std::string& t) { return stopwords.contains(t); });
      }
    }
  }

  for (bool changed = true; changed;) {
    changed = false;
    if (config.min_term_frequency > 1) {
      std::unordered_map<std::string, std::size_t> tf;
      for (const auto& doc : raw) {
        for (const auto& seg : doc.segments) {
          for (const auto& t : seg) ++tf[t];
        }
      }
      for (auto& doc : raw) {
        for (auto& seg : doc.segments) {
          const auto before = seg.size();
          std::erase_if(seg, [&](const std::string& t) { return tf[t] < config.min_term_frequency; });
          changed |= seg.size() != before;
        }
      }
    }
    for (auto& doc : raw) {
      const auto before = doc.segments.size();
      std::erase_if(doc.segments,
                    [&](const auto& seg) { return seg.size() < config.min_segment_length; });
      local.dropped_segments += before - doc.segments.size();
      changed |= doc.segments.size() != before;
    }
  }

  Corpus corpus;
  for (auto& doc : raw) {
    if (doc.segments.empty()) {
      ++local.dropped_documents;
      continue;
    }
    Document out{std::move(doc.label), {}};
    out.segments.reserve(doc.segments.size());
    for (const auto& seg : doc.segments) {
      std::vector<WordId> ids;
      ids.reserve(seg.size());
      for (const auto& t : seg) ids.push_back(corpus.vocabulary.add(t));
      out.segments.emplace_back(std::move(ids));
    }
    corpus.documents.push_back(std::move(out));
  }
  local.dropped_terms = seen_terms.size() - corpus.vocabulary.size();
  if (stats) *stats = local;
  if (corpus.documents.empty()) throw ValidationError("corpus is empty after filtering");
  return corpus;
}

namespace {

std::vector<std::filesystem::path> expand_inputs(std::span<const std::filesystem::path> inputs) {
  std::vector<std::filesystem::path> files;
  for (const auto& p : inputs) {
    std::error_code ec;
    if (std::filesystem::is_directory(p, ec)) {
      std::vector<std::filesystem::path> entries;
      for (const auto& e : std::filesystem::directory_iterator(p)) {
        if (e.is_regular_file()) entries.push_back(e.path());
      }
      std::sort(entries.begin(), entries.end());
      files.insert(files.end(), entries.begin(), entries.end());
    } else if (std::filesystem::is_regular_file(p, ec)) {
      files.push_back(p);
    } else {
      throw IoError("cannot read input " + p.string());
    }
  }
  return files;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read input " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Corpus ingest_text(std::span<const std::filesystem::path> inputs, const PreprocessConfig& config,
                   IngestStats* stats) {
  config.validate();
  std::vector<RawDocument> raw;
  for (const auto& file : expand_inputs(inputs)) {
    RawDocument doc{file.filename().string(), {}};
    for (const auto& para : split_paragraphs(slurp(file))) {
      auto tokens = tokenize(para, config.lowercase);
      if (!tokens.empty()) doc.segments.push_back(std::move(tokens));
    }
    raw.push_back(std::move(doc));
  }
  return build_corpus(std::move(raw), config, stats);
}

namespace {

// RFC 4180 style: commas separate fields, double quotes protect commas and
// escape themselves by doubling.
std::vector<std::string> split_csv_line(std::string_view line, const std::string& source,
                                        std::size_t lineno) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back().push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back().push_back(c);
    }
  }
  if (quoted) throw ParseError(source, lineno, "unterminated quoted field");
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, long long& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

struct TripOrder {
  bool operator()(const std::string& a, const std::string& b) const {
    long long x = 0, y = 0;
    if (parse_int(a, x) && parse_int(b, y)) return x < y;
    return a < b;
  }
};

}  // namespace

Corpus ingest_baskets_stream(std::istream& in, const std::string& source,
                             const PreprocessConfig& config, IngestStats* stats) {
  config.validate();
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    auto header = split_csv_line(line, source, lineno);
    for (auto& h : header) h = std::string(trim(h));
    if (header != std::vector<std::string>{"customer", "trip", "category"}) {
      throw ParseError(source, lineno, "expected header 'customer,trip,category'");
    }
  }

  std::vector<std::string> customer_order;
  std::unordered_map<std::string, std::map<std::string, std::vector<std::string>, TripOrder>> trips;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, source, lineno);
    if (fields.size() != 3) {
      throw ParseError(source, lineno,
                       "expected 3 fields, found " + std::to_string(fields.size()));
    }
    const std::string customer(trim(fields[0]));
    const std::string trip(trim(fields[1]));
    const std::string category(trim(fields[2]));
    if (customer.empty() || trip.empty() || category.empty()) {
      throw ParseError(source, lineno, "empty field");
    }
    auto [it, inserted] = trips.try_emplace(customer);
    if (inserted) customer_order.push_back(customer);
    it->second[trip].push_back(category);
  }

  std::vector<RawDocument> raw;
  raw.reserve(customer_order.size());
  for (const auto& c : customer_order) {
    RawDocument doc{c, {}};
    for (auto& [trip, items] : trips[c]) doc.segments.push_back(std::move(items));
    raw.push_back(std::move(doc));
  }
  PreprocessConfig basket_config = config;
  basket_config.stopword_lists.clear();
  return build_corpus(std::move(raw), basket_config, stats);
}

Corpus ingest_baskets(const std::filesystem::path& csv, const PreprocessConfig& config,
                      IngestStats* stats) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot read input " + csv.string());
  return ingest_baskets_stream(in, csv.string(), config, stats);
}

CorpusSplit split_corpus(const Corpus& corpus, const std::set<std::string>& heldout_labels) {
  for (const auto& label : heldout_labels) {
    if (corpus.find(label) < 0) throw ValidationError("unknown document label '" + label + "'");
  }
  CorpusSplit split;
  std::vector<const Document*> train_docs;
  std::vector<const Document*> heldout_docs;
  for (const auto& d : corpus.documents) {
    (heldout_labels.contains(d.label) ? heldout_docs : train_docs).push_back(&d);
  }

  // Training vocabulary keeps the original relative order of surviving terms.
  std::vector<std::int64_t> remap(corpus.vocabulary.size(), -1);
  std::vector<bool> used(corpus.vocabulary.size(), false);
  for (const auto* d : train_docs) {
    for (const auto& s : d->segments) {
      for (WordId w : s.positions()) used[w] = true;
    }
  }
  for (std::size_t w = 0; w < used.size(); ++w) {
    if (used[w]) remap[w] = split.train.vocabulary.add(corpus.vocabulary.term(static_cast<WordId>(w)));
  }
  split.heldout.vocabulary = split.train.vocabulary;

  auto translate = [&](const Document& d, std::size_t* dropped_words) {
    Document out{d.label, {}};
    for (const auto& s : d.segments) {
      std::vector<WordId> ids;
      for (WordId w : s.positions()) {
        if (remap[w] >= 0) {
          ids.push_back(static_cast<WordId>(remap[w]));
        } else if (dropped_words) {
          ++*dropped_words;
        }
      }
      if (!ids.empty()) out.segments.emplace_back(std::move(ids));
    }
    return out;
  };

  for (const auto* d : train_docs) split.train.documents.push_back(translate(*d, nullptr));
  for (const auto* d : heldout_docs) {
    auto out = translate(*d, &split.dropped_heldout_words);
    if (out.segments.empty()) {
      ++split.dropped_heldout_documents;
    } else {
      split.heldout.documents.push_back(std::move(out));
    }
  }
  return split;
}

Corpus merge_segments(const Corpus& corpus) {
  Corpus merged;
  merged.vocabulary = corpus.vocabulary;
  merged.documents.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) {
    std::vector<WordId> all;
    for (const auto& s : d.segments) all.insert(all.end(), s.positions().begin(), s.positions().end());
    Document out{d.label, {}};
    out.segments.emplace_back(std::move(all));
    merged.documents.push_back(std::move(out));
  }
  return merged;
}

}  // namespace mctm
