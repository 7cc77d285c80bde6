#include "mctm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mctm/error.hpp"
#include "mctm/kernels.hpp"
#include "mctm/parallel.hpp"

namespace mctm {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void PerplexityConfig::validate() const {
  if (samples < 100) throw ValidationError("perplexity needs at least 100 samples");
  if (!(observed_fraction > 0.0 && observed_fraction <= 1.0)) {
    throw ValidationError("observed fraction must lie in (0, 1]");
  }
  schedule.validate();
}

HeldoutInference infer_heldout(const ModelParams& params, const Document& doc,
                               const EStepSchedule& schedule, double observed_fraction,
                               std::uint64_t seed) {
  if (!(observed_fraction > 0.0 && observed_fraction <= 1.0)) {
    throw ValidationError("observed fraction must lie in (0, 1]");
  }
  if (doc.segments.empty() || doc.num_words() == 0) {
    throw ValidationError("document '" + doc.label + "' has no words to observe");
  }
  HeldoutInference out;
  out.observed.label = doc.label;
  std::mt19937_64 rng(seed);
  for (const auto& seg : doc.segments) {
    if (seg.size() == 0) throw ValidationError("document '" + doc.label + "' has an empty segment");
    if (observed_fraction >= 1.0) {
      out.observed.segments.push_back(seg);
      out.scored.push_back(seg);
      continue;
    }
    const auto n = seg.size();
    const auto keep = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::ceil(observed_fraction * static_cast<double>(n))));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> is_observed(n, 0);
    for (std::size_t i = 0; i < keep; ++i) is_observed[order[i]] = 1;
    std::vector<WordId> obs, rest;
    for (std::size_t i = 0; i < n; ++i) (is_observed[i] ? obs : rest).push_back(seg.positions()[i]);
    out.observed.segments.emplace_back(std::move(obs));
    out.scored.emplace_back(std::move(rest));
  }
  out.estep = estep_document(params, out.observed, init_document_state(params, out.observed),
                             schedule);
  out.state = std::move(out.estep.state);
  return out;
}

DocumentLikelihood harmonic_mean_likelihood(const ModelParams& params,
                                            std::span<const Segment> scored,
                                            const DocumentState& state, std::size_t samples,
                                            std::uint64_t seed) {
  if (samples == 0) throw ValidationError("need at least one sample");
  if (scored.size() != state.segments.size()) throw ValidationError("scored segments mismatch");
  const auto K = params.num_topics();
  DocumentLikelihood out;
  for (const auto& s : scored) out.scored_words += s.size();
  if (out.scored_words == 0) return out;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> neg_loglik(samples);
  std::vector<Vector> sd(scored.size());
  for (std::size_t s = 0; s < scored.size(); ++s) sd[s] = state.segments[s].m2.cwiseSqrt();
  Vector eta(K);
  for (std::size_t t = 0; t < samples; ++t) {
    double ll = 0.0;
    for (std::size_t s = 0; s < scored.size(); ++s) {
      // Every segment draws, even one with nothing to score, so the random
      // stream does not depend on which positions were held out.
      for (int k = 0; k < K; ++k) eta[k] = state.segments[s].xi[k] + sd[s][k] * normal(rng);
      if (scored[s].size() == 0) continue;
      const Vector theta = softmax(as_span(eta));
      for (const auto& wc : scored[s].counts()) {
        ll += wc.count * std::log(kernels::dot(as_span(theta), params.beta_row(wc.word)));
      }
    }
    neg_loglik[t] = -ll;
  }
  const double shift = *std::max_element(neg_loglik.begin(), neg_loglik.end());
  double mean = 0.0;
  for (double v : neg_loglik) mean += std::exp(v - shift);
  mean /= static_cast<double>(samples);
  double var = 0.0;
  for (double v : neg_loglik) {
    const double r = std::exp(v - shift) - mean;
    var += r * r;
  }
  var /= static_cast<double>(samples > 1 ? samples - 1 : 1);
  // log P = -log( mean_t exp(-L_t) )
  out.log_likelihood = -(shift + std::log(mean));
  out.std_error = std::sqrt(var / static_cast<double>(samples)) / mean;
  return out;
}

PerplexityReport perplexity(const ModelParams& params, const Corpus& heldout,
                            const PerplexityConfig& config) {
  config.validate();
  if (heldout.documents.empty()) throw ValidationError("held-out corpus is empty");
  if (heldout.vocabulary.size() != static_cast<std::size_t>(params.num_words())) {
    throw ValidationError("held-out vocabulary does not match the model");
  }
  const auto D = heldout.documents.size();
  PerplexityReport report;
  report.documents.resize(D);
  parallel_for(D, config.threads, [&](std::size_t d) {
    const auto& doc = heldout.documents[d];
    auto inf = infer_heldout(params, doc, config.schedule, config.observed_fraction,
                             derive_seed(config.seed, 2 * d));
    auto r = harmonic_mean_likelihood(params, inf.scored, inf.state, config.samples,
                                      derive_seed(config.seed, 2 * d + 1));
    r.label = doc.label;
    if (!std::isfinite(r.log_likelihood)) {
      throw NumericError("document '" + doc.label + "': non-finite log-likelihood estimate over " +
                         std::to_string(r.scored_words) + " words");
    }
    report.documents[d] = std::move(r);
  });
  double total = 0.0;
  double var = 0.0;
  for (const auto& r : report.documents) {
    total += r.log_likelihood;
    var += r.std_error * r.std_error;
    report.scored_words += r.scored_words;
  }
  if (report.scored_words == 0) throw ValidationError("no held-out words to score");
  const double n = static_cast<double>(report.scored_words);
  report.perplexity = std::exp(-total / n);
  report.std_error = report.perplexity * std::sqrt(var) / n;
  if (!std::isfinite(report.perplexity)) throw NumericError("perplexity is not finite");
  return report;
}

std::vector<WordId> top_word_ids(const ModelParams& params, int topic, std::size_t n) {
  if (topic < 0 || topic >= params.num_topics()) {
    throw ValidationError("topic " + std::to_string(topic) + " out of range");
  }
  std::vector<WordId> ids(static_cast<std::size_t>(params.num_words()));
  std::iota(ids.begin(), ids.end(), 0);
  const auto& beta = params.beta();
  const auto take = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    [&](WordId a, WordId b) {
                      const double x = beta(a, topic), y = beta(b, topic);
                      return x != y ? x > y : a < b;
                    });
  ids.resize(take);
  return ids;
}

std::vector<std::string> top_words(const ModelParams& params, const Vocabulary& vocab, int topic,
                                   std::size_t n) {
  std::vector<std::string> out;
  for (WordId w : top_word_ids(params, topic, n)) out.push_back(vocab.term(w));
  return out;
}

Vector topic_proportions(const DocumentState& state, Level level, std::size_t segment) {
  if (level == Level::Document) return softmax(as_span(state.lambda));
  if (segment >= state.segments.size()) throw ValidationError("segment index out of range");
  return softmax(as_span(state.segments[segment].xi));
}

}  // namespace mctm
