#pragma once

// Document / paragraph / topic graph: the document and each of its segments
// are linked to every topic whose proportion exceeds a threshold.

#include <string>
#include <utility>
#include <vector>

#include "mctm/params.hpp"

namespace mctm {

struct GraphNode {
  std::string id;              // "doc", "p<segment>", "t<topic>"
  std::vector<double> proportions;  // empty for topic nodes
  std::vector<std::string> top_terms;
};

struct StructureGraph {
  std::string label;
  double threshold = 0.01;
  GraphNode document;
  std::vector<GraphNode> paragraphs;  // one per segment, in order
  std::vector<GraphNode> topics;      // topics with at least one edge, ascending id
  std::vector<std::pair<std::string, int>> edges;  // (node id, topic id)
};

/// Paragraph and document nodes list their most frequent terms (ties to the
/// smaller id); topic nodes list their top beta terms. An edge (node, k) is
/// present iff the node's proportion of topic k is strictly above `threshold`.
StructureGraph export_structure_graph(const ModelParams& params, const DocumentState& state,
                                      const Document& doc, const Vocabulary& vocab,
                                      double threshold = 0.01, std::size_t top_n = 5);

/// {"document": node, "paragraphs": [node...], "topics": [node...],
///  "edges": [[node-id, topic-id]...]} with node = {"id", "proportions", "top_terms"},
/// plus "label" and "threshold".
std::string to_json(const StructureGraph& graph);

/// Undirected graph: topics as boxes, paragraphs as ellipses, the document as
/// a double octagon.
std::string to_dot(const StructureGraph& graph);

}  // namespace mctm
