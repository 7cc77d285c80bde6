#pragma once

// Held-out inference, harmonic-mean perplexity and topic summaries.

#include <cstdint>
#include <string>
#include <vector>

#include "mctm/estep.hpp"
#include "mctm/params.hpp"

namespace mctm {

/// Result of fitting the variational state of one held-out document with the
/// hyperparameters frozen.
struct HeldoutInference {
  Document observed;             // positions the state was fitted on
  std::vector<Segment> scored;   // positions to score, aligned with observed.segments
  DocumentState state;
  EStepResult estep;             // .state is moved into `state`
};

/// Keeps ceil(observed_fraction * N_ds) positions of every segment, chosen by
/// a seeded shuffle, and runs estep_document on them from
/// init_document_state. With observed_fraction == 1 every position is both
/// observed and scored; otherwise the complement is scored.
HeldoutInference infer_heldout(const ModelParams& params, const Document& doc,
                               const EStepSchedule& schedule, double observed_fraction,
                               std::uint64_t seed);

struct PerplexityConfig {
  std::size_t samples = 2000;
  EStepSchedule schedule;
  double observed_fraction = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 0;

  void validate() const;
};

struct DocumentLikelihood {
  std::string label;
  double log_likelihood = 0.0;  // harmonic-mean estimate of log P(scored words)
  double std_error = 0.0;       // delta-method standard error of log_likelihood
  std::size_t scored_words = 0;
};

struct PerplexityReport {
  double perplexity = 0.0;
  double std_error = 0.0;  // standard error of perplexity
  std::size_t scored_words = 0;
  std::vector<DocumentLikelihood> documents;
};

/// Harmonic-mean estimate of log P(scored | params) from `samples` draws
/// eta_ds ~ N(xi_ds, diag(m2_ds)):
///   log P = log T - logsumexp_t( -sum_s sum_n log sum_k f_k(eta_ds^t) beta_{w_n,k} )
DocumentLikelihood harmonic_mean_likelihood(const ModelParams& params,
                                            std::span<const Segment> scored,
                                            const DocumentState& state, std::size_t samples,
                                            std::uint64_t seed);

/// exp(-sum_d log P_d / sum_d N_d) over the scored words of every document.
/// Documents are seeded by their index, so results do not depend on threads.
PerplexityReport perplexity(const ModelParams& params, const Corpus& heldout,
                            const PerplexityConfig& config);

/// Ids of the n largest entries of beta(., topic); ties go to the smaller id.
std::vector<WordId> top_word_ids(const ModelParams& params, int topic, std::size_t n);
std::vector<std::string> top_words(const ModelParams& params, const Vocabulary& vocab, int topic,
                                   std::size_t n);

enum class Level { Document, Segment };

/// f(lambda_d) at document level, f(xi_ds) at segment level.
Vector topic_proportions(const DocumentState& state, Level level, std::size_t segment = 0);

/// Seed for the i-th independent stream derived from `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mctm
