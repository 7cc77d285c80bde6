#include "mctm/structure_graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mctm/error.hpp"
#include "mctm/eval.hpp"

namespace mctm {
namespace {

std::vector<std::string> frequent_terms(const std::vector<const Segment*>& segments,
                                        const Vocabulary& vocab, std::size_t n) {
  std::map<WordId, std::size_t> freq;
  for (const auto* s : segments) {
    for (const auto& wc : s->counts()) freq[wc.word] += wc.count;
  }
  std::vector<std::pair<WordId, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.push_back(vocab.term(ranked[i].first));
  return out;
}

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

// Escaped terms joined by `sep`, which is emitted verbatim.
std::string join(const std::vector<std::string>& terms, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += sep;
    out += dot_escape(terms[i]);
  }
  return out;
}

}  // namespace

StructureGraph export_structure_graph(const ModelParams& params, const DocumentState& state,
                                      const Document& doc, const Vocabulary& vocab,
                                      double threshold, std::size_t top_n) {
  validate_document_state(params, doc, state);
  StructureGraph g;
  g.label = doc.label;
  g.threshold = threshold;
  std::set<int> linked;

  auto connect = [&](const GraphNode& node) {
    for (std::size_t k = 0; k < node.proportions.size(); ++k) {
      if (node.proportions[k] > threshold) {
        g.edges.emplace_back(node.id, static_cast<int>(k));
        linked.insert(static_cast<int>(k));
      }
    }
  };

  std::vector<const Segment*> all;
  for (const auto& s : doc.segments) all.push_back(&s);
  g.document = {"doc", to_vector(topic_proportions(state, Level::Document)),
                frequent_terms(all, vocab, top_n)};
  connect(g.document);

  for (std::size_t s = 0; s < doc.segments.size(); ++s) {
    GraphNode p{"p" + std::to_string(s), to_vector(topic_proportions(state, Level::Segment, s)),
                frequent_terms({&doc.segments[s]}, vocab, top_n)};
    connect(p);
    g.paragraphs.push_back(std::move(p));
  }
  for (int k : linked) {
    g.topics.push_back({"t" + std::to_string(k), {}, top_words(params, vocab, k, top_n)});
  }
  return g;
}

std::string to_json(const StructureGraph& graph) {
  auto node = [](const GraphNode& n) {
    return nlohmann::json{{"id", n.id}, {"proportions", n.proportions}, {"top_terms", n.top_terms}};
  };
  nlohmann::json j;
  j["label"] = graph.label;
  j["threshold"] = graph.threshold;
  j["document"] = node(graph.document);
  j["paragraphs"] = nlohmann::json::array();
  for (const auto& p : graph.paragraphs) j["paragraphs"].push_back(node(p));
  j["topics"] = nlohmann::json::array();
  for (const auto& t : graph.topics) j["topics"].push_back(node(t));
  j["edges"] = nlohmann::json::array();
  for (const auto& [id, k] : graph.edges) j["edges"].push_back({id, k});
  return j.dump(2);
}

std::string to_dot(const StructureGraph& graph) {
  std::ostringstream out;
  out << "graph \"" << dot_escape(graph.label) << "\" {\n";
  out << "  node [fontsize=10];\n";
  out << "  \"doc\" [shape=doubleoctagon, label=\"" << dot_escape(graph.label) << "\\n"
      << join(graph.document.top_terms, " ") << "\"];\n";
  for (const auto& p : graph.paragraphs) {
    out << "  \"" << p.id << "\" [shape=ellipse, label=\"" << p.id << "\\n"
        << join(p.top_terms, "\\n") << "\"];\n";
  }
  for (const auto& t : graph.topics) {
    out << "  \"" << t.id << "\" [shape=box, label=\"" << t.id << "\\n"
        << join(t.top_terms, "\\n") << "\"];\n";
  }
  for (const auto& [id, k] : graph.edges) out << "  \"" << id << "\" -- \"t" << k << "\";\n";
  out << "}\n";
  return out.str();
}

}  // namespace mctm
