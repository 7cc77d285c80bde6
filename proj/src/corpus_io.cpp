#include <fstream>

#include <json.hpp>

#include "mctm/corpus.hpp"
#include "mctm/error.hpp"

namespace mctm {

using nlohmann::json;

std::filesystem::path default_vocab_path(const std::filesystem::path& jsonl) {
  auto p = jsonl;
  p.replace_extension(".vocab");
  return p;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& jsonl,
                  const std::filesystem::path& vocab) {
  std::ofstream out(jsonl, std::ios::binary);
  if (!out) throw IoError("cannot write " + jsonl.string());
  for (const auto& d : corpus.documents) {
    json segments = json::array();
    for (const auto& s : d.segments) {
      segments.push_back(std::vector<WordId>(s.positions().begin(), s.positions().end()));
    }
    out << json{{"label", d.label}, {"segments", std::move(segments)}}.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + jsonl.string());

  std::ofstream vout(vocab, std::ios::binary);
  if (!vout) throw IoError("cannot write " + vocab.string());
  for (const auto& t : corpus.vocabulary.terms()) vout << t << '\n';
  if (!vout) throw IoError("failed writing " + vocab.string());
}

Corpus read_corpus(const std::filesystem::path& jsonl, const std::filesystem::path& vocab) {
  Corpus corpus;
  {
    std::ifstream vin(vocab, std::ios::binary);
    if (!vin) throw IoError("cannot read vocabulary " + vocab.string());
    std::vector<std::string> terms;
    std::string line;
    while (std::getline(vin, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      terms.push_back(std::move(line));
    }
    corpus.vocabulary = Vocabulary(std::move(terms));
  }

  std::ifstream in(jsonl, std::ios::binary);
  if (!in) throw IoError("cannot read corpus " + jsonl.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      Document d{j.at("label").get<std::string>(), {}};
      for (const auto& seg : j.at("segments")) {
        d.segments.emplace_back(seg.get<std::vector<WordId>>());
      }
      corpus.documents.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw ParseError(jsonl.string(), lineno, e.what());
    }
  }
  corpus.validate();
  return corpus;
}

}  // namespace mctm
