// mctm: ingest corpora, fit the multilayer correlated topic model, evaluate
// held-out perplexity, and export topic tables and document structure graphs.
//
// Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or validation error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mctm/checkpoint.hpp"
#include "mctm/corpus.hpp"
#include "mctm/error.hpp"
#include "mctm/eval.hpp"
#include "mctm/kernels.hpp"
#include "mctm/structure_graph.hpp"
#include "mctm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public mctm::ValidationError {
 public:
  using ValidationError::ValidationError;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("mctm");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("MCTM_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

void require_input(const fs::path& p) {
  std::error_code ec;
  if (!fs::exists(p, ec)) throw UsageError("input not found: " + p.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mctm::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw mctm::IoError("failed writing " + path.string());
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(path, j.dump(2) + "\n");
  }
}

mctm::Corpus load_corpus(const fs::path& jsonl, const std::string& vocab) {
  require_input(jsonl);
  const fs::path v = vocab.empty() ? mctm::default_vocab_path(jsonl) : fs::path(vocab);
  require_input(v);
  return mctm::read_corpus(jsonl, v);
}

mctm::Checkpoint load_model(const fs::path& path) {
  require_input(path);
  return mctm::load_checkpoint(path);
}

void check_vocab(const mctm::Checkpoint& model, const mctm::Corpus& corpus) {
  if (model.vocab_hash != corpus.vocabulary.hash()) {
    throw mctm::ValidationError("vocabulary hash mismatch: model " + model.vocab_hash +
                                ", corpus " + corpus.vocabulary.hash());
  }
}

// --- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string csv;
  std::size_t min_tf = 1;
  std::size_t min_seg_len = 1;
  std::string stopwords;
  bool no_lowercase = false;
  std::string output;
  std::string vocab;
  std::string heldout;
  std::string heldout_file;
  std::string heldout_output;
};

void add_common_ingest(CLI::App* cmd, IngestArgs& a) {
  cmd->add_option("--min-tf", a.min_tf, "Drop terms occurring fewer times corpus-wide")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--min-seg-len", a.min_seg_len, "Drop segments with fewer words")
      ->check(CLI::PositiveNumber);
  cmd->add_option("-o,--output", a.output, "Corpus JSON-lines output")->required();
  cmd->add_option("--vocab", a.vocab, "Vocabulary output (default: <output>.vocab)");
  cmd->add_option("--heldout", a.heldout, "Comma-separated labels to move to a held-out corpus");
  cmd->add_option("--heldout-file", a.heldout_file, "File with one held-out label per line");
  cmd->add_option("--heldout-output", a.heldout_output, "Held-out corpus output");
}

int emit_corpus(const mctm::Corpus& corpus, const IngestArgs& a, const mctm::IngestStats& stats) {
  std::set<std::string> labels;
  for (auto& l : split_list(a.heldout)) labels.insert(l);
  if (!a.heldout_file.empty()) {
    require_input(a.heldout_file);
    std::ifstream in(a.heldout_file);
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) labels.insert(line);
    }
  }
  const fs::path out = a.output;
  const fs::path vocab = a.vocab.empty() ? mctm::default_vocab_path(out) : fs::path(a.vocab);
  json summary;
  if (labels.empty() && a.heldout_output.empty()) {
    mctm::write_corpus(corpus, out, vocab);
    summary = {{"documents", corpus.num_documents()},
               {"segments", corpus.num_segments()},
               {"words", corpus.num_words()},
               {"vocabulary", corpus.vocabulary.size()}};
  } else {
    if (a.heldout_output.empty()) throw UsageError("--heldout requires --heldout-output");
    auto split = mctm::split_corpus(corpus, labels);
    if (!split.valid()) throw mctm::ValidationError("split leaves one side empty");
    mctm::write_corpus(split.train, out, vocab);
    mctm::write_corpus(split.heldout, a.heldout_output,
                       mctm::default_vocab_path(a.heldout_output));
    summary = {{"train", {{"documents", split.train.num_documents()},
                          {"segments", split.train.num_segments()},
                          {"words", split.train.num_words()}}},
               {"heldout", {{"documents", split.heldout.num_documents()},
                            {"segments", split.heldout.num_segments()},
                            {"words", split.heldout.num_words()},
                            {"dropped_documents", split.dropped_heldout_documents},
                            {"dropped_words", split.dropped_heldout_words}}},
               {"vocabulary", split.train.vocabulary.size()}};
  }
  summary["dropped_segments"] = stats.dropped_segments;
  summary["dropped_documents"] = stats.dropped_documents;
  std::cout << summary.dump(2) << '\n';
  return 0;
}

// --- fit ------------------------------------------------------------------

struct FitArgs {
  std::string corpus;
  std::string vocab;
  std::string config;
  int topics = 10;
  double rel_tol = 1e-6;
  int max_iters = 500;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string output;
  std::string report;
  bool checkpoint_each_iter = false;
};

int run_fit(const FitArgs& a, const CLI::App& cmd) {
  const auto corpus = load_corpus(a.corpus, a.vocab);
  mctm::TrainConfig cfg;
  if (!a.config.empty()) {
    require_input(a.config);
    cfg = mctm::load_train_config(a.config);
  }
  if (cmd.count("--topics")) cfg.num_topics = a.topics;
  if (cmd.count("--rel-tol")) cfg.rel_tol = a.rel_tol;
  if (cmd.count("--max-iters")) cfg.max_em_iters = a.max_iters;
  if (cmd.count("--seed")) cfg.seed = a.seed;
  if (cmd.count("--threads")) cfg.threads = a.threads;
  cfg.validate();

  spdlog::info("fitting K={} on D={} documents, {} segments, {} words, W={} ({} kernels)",
               cfg.num_topics, corpus.num_documents(), corpus.num_segments(), corpus.num_words(),
               corpus.vocabulary.size(), mctm::kernels::isa_name(mctm::kernels::active_isa()));
  mctm::IterationCallback on_iter;
  if (a.checkpoint_each_iter) {
    on_iter = [&](int, const mctm::ModelParams& p, double) {
      mctm::save_checkpoint(a.output, p, corpus.vocabulary);
    };
  }
  auto result = mctm::fit(corpus, cfg, on_iter);
  mctm::save_checkpoint(a.output, result.params, corpus.vocabulary);

  const auto& r = result.report;
  const json report{{"num_topics", cfg.num_topics},
                    {"num_words", corpus.vocabulary.size()},
                    {"seed", cfg.seed},
                    {"rel_tol", cfg.rel_tol},
                    {"em_iters", r.em_iters},
                    {"converged", r.converged},
                    {"monotone", r.monotone},
                    {"estep_warnings", r.estep_warnings},
                    {"degenerate_topic_events", r.degenerate_topic_events},
                    {"sigma_ridges", r.sigma_ridges},
                    {"final_bound", r.bound_trajectory.empty() ? 0.0 : r.bound_trajectory.back()},
                    {"bound_trajectory", r.bound_trajectory}};
  const std::string report_path =
      a.report.empty() ? fs::path(a.output).replace_extension(".report.json").string() : a.report;
  write_json(report_path, report);
  spdlog::info("{} after {} iterations, bound {:.10g}",
               r.converged ? "converged" : "stopped", r.em_iters,
               r.bound_trajectory.empty() ? 0.0 : r.bound_trajectory.back());
  if (!r.monotone) {
    std::cerr << "bound trajectory is not monotone:\n";
    for (std::size_t i = 0; i < r.bound_trajectory.size(); ++i) {
      std::cerr << "  " << i + 1 << '\t' << std::setprecision(17) << r.bound_trajectory[i] << '\n';
    }
    return kExitRuntime;
  }
  return 0;
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string corpus;
  std::string vocab;
  std::size_t samples = 2000;
  double observed_fraction = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string output;
};

int run_eval(const EvalArgs& a) {
  const auto model = load_model(a.model);
  const auto corpus = load_corpus(a.corpus, a.vocab);
  check_vocab(model, corpus);
  mctm::PerplexityConfig cfg;
  cfg.samples = a.samples;
  cfg.observed_fraction = a.observed_fraction;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  const auto rep = mctm::perplexity(model.params, corpus, cfg);
  json docs = json::array();
  for (const auto& d : rep.documents) {
    docs.push_back({{"label", d.label},
                    {"log_likelihood", d.log_likelihood},
                    {"std_error", d.std_error},
                    {"scored_words", d.scored_words}});
  }
  write_json(a.output, {{"perplexity", rep.perplexity},
                        {"se", rep.std_error},
                        {"scored_words", rep.scored_words},
                        {"samples", cfg.samples},
                        {"observed_fraction", cfg.observed_fraction},
                        {"seed", cfg.seed},
                        {"documents", std::move(docs)}});
  return 0;
}

// --- topics ---------------------------------------------------------------

int run_topics(const std::string& model_path, std::size_t top, const std::string& output) {
  const auto model = load_model(model_path);
  const int K = model.params.num_topics();
  std::vector<std::vector<std::string>> cols;
  for (int k = 0; k < K; ++k) cols.push_back(mctm::top_words(model.params, model.vocabulary, k, top));
  std::ostringstream out;
  for (int k = 0; k < K; ++k) out << (k ? "\t" : "") << "topic " << k;
  out << '\n';
  const std::size_t rows = cols.empty() ? 0 : cols.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (int k = 0; k < K; ++k) out << (k ? "\t" : "") << cols[k][r];
    out << '\n';
  }
  if (output.empty() || output == "-") {
    std::cout << out.str();
  } else {
    write_text(output, out.str());
  }
  return 0;
}

// --- graph ----------------------------------------------------------------

struct GraphArgs {
  std::string model;
  std::string corpus;
  std::string vocab;
  std::string doc;
  double threshold = 0.01;
  std::size_t top = 5;
  std::string output;
  std::string json_output;
};

int run_graph(const GraphArgs& a) {
  const auto model = load_model(a.model);
  const auto corpus = load_corpus(a.corpus, a.vocab);
  check_vocab(model, corpus);
  const auto idx = corpus.find(a.doc);
  if (idx < 0) throw mctm::ValidationError("unknown document label '" + a.doc + "'");
  const auto& doc = corpus.documents[static_cast<std::size_t>(idx)];
  const auto inf = mctm::infer_heldout(model.params, doc, mctm::EStepSchedule{}, 1.0, 0);
  const auto graph = mctm::export_structure_graph(model.params, inf.state, doc, corpus.vocabulary,
                                                  a.threshold, a.top);
  const fs::path dot = a.output;
  const fs::path js = a.json_output.empty() ? fs::path(dot).replace_extension(".json")
                                            : fs::path(a.json_output);
  write_text(dot, mctm::to_dot(graph));
  write_text(js, mctm::to_json(graph) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Multilayer correlated topic model"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Build a corpus from text files or basket records");
  ingest->require_subcommand(1);
  auto* text = ingest->add_subcommand("text", "One document per file, one segment per paragraph");
  text->add_option("inputs", ingest_args.inputs, "Files or directories")->required();
  text->add_option("--stopwords", ingest_args.stopwords, "Comma-separated stopword list files");
  text->add_flag("--no-lowercase", ingest_args.no_lowercase, "Keep token case");
  add_common_ingest(text, ingest_args);
  auto* baskets = ingest->add_subcommand("baskets", "CSV customer,trip,category");
  baskets->add_option("csv", ingest_args.csv, "Order records")->required();
  add_common_ingest(baskets, ingest_args);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit the model with variational EM");
  fit->add_option("corpus", fit_args.corpus, "Corpus JSON lines")->required();
  fit->add_option("--vocab", fit_args.vocab, "Vocabulary (default: <corpus>.vocab)");
  fit->add_option("--config", fit_args.config, "JSON training config");
  fit->add_option("-k,--topics", fit_args.topics, "Number of topics")->check(CLI::PositiveNumber);
  fit->add_option("--rel-tol", fit_args.rel_tol, "Relative bound change to stop at")
      ->check(CLI::PositiveNumber);
  fit->add_option("--max-iters", fit_args.max_iters, "Maximum EM iterations")
      ->check(CLI::PositiveNumber);
  fit->add_option("--seed", fit_args.seed, "Random seed");
  fit->add_option("--threads", fit_args.threads, "Worker threads (default: all cores)");
  fit->add_option("-o,--output", fit_args.output, "Checkpoint output")->required();
  fit->add_option("--report", fit_args.report, "Fit report JSON (default: output path with extension .report.json)");
  fit->add_flag("--checkpoint-each-iter", fit_args.checkpoint_each_iter,
                "Rewrite the checkpoint after every EM iteration");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Held-out perplexity");
  eval->add_option("model", eval_args.model, "Checkpoint")->required();
  eval->add_option("corpus", eval_args.corpus, "Held-out corpus JSON lines")->required();
  eval->add_option("--vocab", eval_args.vocab, "Vocabulary (default: <corpus>.vocab)");
  eval->add_option("--samples", eval_args.samples, "Posterior samples per document")
      ->check(CLI::Range(std::size_t{100}, std::numeric_limits<std::size_t>::max()));
  eval->add_option("--observed-fraction", eval_args.observed_fraction,
                   "Fraction of each segment to condition on; the rest is scored")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--seed", eval_args.seed, "Random seed");
  eval->add_option("--threads", eval_args.threads, "Worker threads (default: all cores)");
  eval->add_option("-o,--output", eval_args.output, "Report JSON (default: stdout)");

  std::string topics_model, topics_output;
  std::size_t topics_top = 10;
  auto* topics = app.add_subcommand("topics", "Top words per topic as TSV");
  topics->add_option("model", topics_model, "Checkpoint")->required();
  topics->add_option("--top", topics_top, "Words per topic")->check(CLI::PositiveNumber);
  topics->add_option("-o,--output", topics_output, "TSV output (default: stdout)");

  GraphArgs graph_args;
  auto* graph = app.add_subcommand("graph", "Document structure graph as DOT and JSON");
  graph->add_option("model", graph_args.model, "Checkpoint")->required();
  graph->add_option("corpus", graph_args.corpus, "Corpus JSON lines")->required();
  graph->add_option("--vocab", graph_args.vocab, "Vocabulary (default: <corpus>.vocab)");
  graph->add_option("--doc", graph_args.doc, "Document label")->required();
  graph->add_option("--threshold", graph_args.threshold, "Minimum topic proportion for an edge")
      ->check(CLI::Range(0.0, 1.0));
  graph->add_option("--top", graph_args.top, "Terms per node")->check(CLI::PositiveNumber);
  graph->add_option("-o,--output", graph_args.output, "DOT output")->required();
  graph->add_option("--json", graph_args.json_output, "JSON output (default: <output>.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*ingest) {
      mctm::PreprocessConfig cfg;
      cfg.min_term_frequency = ingest_args.min_tf;
      cfg.min_segment_length = ingest_args.min_seg_len;
      mctm::IngestStats stats;
      mctm::Corpus corpus;
      if (*text) {
        std::vector<fs::path> inputs;
        for (const auto& i : ingest_args.inputs) {
          require_input(i);
          inputs.emplace_back(i);
        }
        for (const auto& s : split_list(ingest_args.stopwords)) {
          require_input(s);
          cfg.stopword_lists.emplace_back(s);
        }
        cfg.lowercase = !ingest_args.no_lowercase;
        corpus = mctm::ingest_text(inputs, cfg, &stats);
      } else {
        require_input(ingest_args.csv);
        corpus = mctm::ingest_baskets(ingest_args.csv, cfg, &stats);
      }
      return emit_corpus(corpus, ingest_args, stats);
    }
    if (*fit) return run_fit(fit_args, *fit);
    if (*eval) return run_eval(eval_args);
    if (*topics) return run_topics(topics_model, topics_top, topics_output);
    if (*graph) return run_graph(graph_args);
  } catch (const mctm::ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const mctm::ParseError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
