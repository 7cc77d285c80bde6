#pragma once

// Segmented bag-of-words corpus: documents made of segments made of word ids.
// Text documents are split into paragraphs; basket data maps each customer to a
// document and each shopping trip to a segment.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mctm {

using WordId = std::uint32_t;

struct WordCount {
  WordId word;
  std::uint32_t count;

  friend bool operator==(const WordCount&, const WordCount&) = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);

  /// Returns the id of `term`, appending it if new.
  WordId add(std::string_view term);
  /// Id of `term`, or -1 if absent.
  std::int64_t find(std::string_view term) const;
  bool contains(std::string_view term) const { return find(term) >= 0; }

  const std::string& term(WordId id) const { return terms_.at(id); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }

  /// FNV-1a 64 over the newline-joined terms, as 16 lowercase hex digits.
  std::string hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.terms_ == b.terms_; }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> terms_;
  std::unordered_map<std::string, WordId, StringHash, std::equal_to<>> index_;
};

/// A sequence of word positions plus its sparse count map (sorted by word id).
class Segment {
 public:
  Segment() = default;
  explicit Segment(std::vector<WordId> positions);

  std::span<const WordId> positions() const noexcept { return positions_; }
  std::span<const WordCount> counts() const noexcept { return counts_; }
  std::size_t size() const noexcept { return positions_.size(); }
  std::size_t unique_words() const noexcept { return counts_.size(); }

  friend bool operator==(const Segment& a, const Segment& b) { return a.positions_ == b.positions_; }

 private:
  std::vector<WordId> positions_;
  std::vector<WordCount> counts_;
};

struct Document {
  std::string label;
  std::vector<Segment> segments;

  std::size_t num_words() const;
  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<Document> documents;
  Vocabulary vocabulary;

  std::size_t num_documents() const noexcept { return documents.size(); }
  std::size_t num_segments() const;
  std::size_t num_words() const;
  /// Index of the document with `label`, or -1.
  std::int64_t find(std::string_view label) const;

  /// Throws ValidationError unless D >= 1, W >= 1, every segment is non-empty
  /// and every word id is below W.
  void validate() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct PreprocessConfig {
  std::size_t min_term_frequency = 1;
  std::size_t min_segment_length = 1;
  std::vector<std::filesystem::path> stopword_lists;
  bool lowercase = true;

  void validate() const;
};

/// Splits on non-alphanumeric ASCII characters. Bytes >= 0x80 are kept inside
/// tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text, bool lowercase);

/// Paragraphs are blocks of lines separated by one or more blank lines.
std::vector<std::string> split_paragraphs(std::string_view text);

/// One document as token strings per segment, before vocabulary assignment.
struct RawDocument {
  std::string label;
  std::vector<std::vector<std::string>> segments;
};

struct IngestStats {
  std::size_t dropped_segments = 0;
  std::size_t dropped_documents = 0;
  std::size_t dropped_terms = 0;
};

/// Stopwords, then corpus-wide minimum term frequency, then minimum segment
/// length, then empty documents. The frequency and length filters repeat until
/// nothing changes so the result is a fixed point. Throws ValidationError if
/// nothing survives.
Corpus build_corpus(std::vector<RawDocument> raw, const PreprocessConfig& config,
                    IngestStats* stats = nullptr);

/// Each file (or each regular file of a directory, in sorted order) is one
/// document labelled by its file name; paragraphs become segments.
Corpus ingest_text(std::span<const std::filesystem::path> inputs, const PreprocessConfig& config,
                   IngestStats* stats = nullptr);

/// CSV with header `customer,trip,category`. Customers appear in first-seen
/// order, trips are ordered by id (numerically when both ids are integers).
Corpus ingest_baskets(const std::filesystem::path& csv, const PreprocessConfig& config,
                      IngestStats* stats = nullptr);
Corpus ingest_baskets_stream(std::istream& in, const std::string& source_name,
                             const PreprocessConfig& config, IngestStats* stats = nullptr);

struct CorpusSplit {
  Corpus train;
  Corpus heldout;
  std::size_t dropped_heldout_documents = 0;
  std::size_t dropped_heldout_words = 0;

  /// Both sides must hold at least one document.
  bool valid() const noexcept {
    return !train.documents.empty() && !heldout.documents.empty();
  }
};

/// Moves the labelled documents into the held-out side. Both sides use the
/// vocabulary of the training side; held-out words outside it are dropped, and
/// held-out segments or documents left empty are dropped and counted.
CorpusSplit split_corpus(const Corpus& corpus, const std::set<std::string>& heldout_labels);

/// Every segment of a document concatenated into one.
Corpus merge_segments(const Corpus& corpus);

/// Canonical format: JSON lines `{"label": str, "segments": [[id, ...], ...]}`
/// plus a sidecar vocabulary with one term per line (line number = id).
void write_corpus(const Corpus& corpus, const std::filesystem::path& jsonl,
                  const std::filesystem::path& vocab);
Corpus read_corpus(const std::filesystem::path& jsonl, const std::filesystem::path& vocab);
/// `corpus.jsonl` -> `corpus.vocab`
std::filesystem::path default_vocab_path(const std::filesystem::path& jsonl);

std::vector<std::string> read_stopwords(const std::filesystem::path& path, bool lowercase);

}  // namespace mctm
