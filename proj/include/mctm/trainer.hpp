#pragma once

// Variational EM driver, parameter initialization and the synthetic generator.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "mctm/estep.hpp"
#include "mctm/mstep.hpp"
#include "mctm/params.hpp"

namespace mctm {

/// beta columns are drawn from Dirichlet(alpha) with
/// alpha_w = dirichlet_scale * ((1 - empirical_weight) + empirical_weight * W * f_w),
/// f the corpus-wide word frequencies. As the scale grows the columns approach
/// (1 - empirical_weight) * uniform + empirical_weight * f.
struct InitConfig {
  double dirichlet_scale = 1.0;
  double empirical_weight = 0.1;
};

struct TrainConfig {
  int num_topics = 10;
  double rel_tol = 1e-6;
  int max_em_iters = 500;
  EStepSchedule estep;
  std::uint64_t seed = 1;
  InitConfig init;
  unsigned threads = 0;  // 0 = hardware concurrency
  double monotone_slack = 1e-8;

  void validate() const;
};

/// Reads a JSON object whose keys mirror TrainConfig (num_topics, rel_tol,
/// max_em_iters, seed, threads, monotone_slack, estep{newton_tol,
/// newton_max_iter, rel_tol, max_sweeps}, init{dirichlet_scale,
/// empirical_weight}). Missing keys keep the values in `base`.
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

struct FitReport {
  std::vector<double> bound_trajectory;  // B after each EM iteration
  int em_iters = 0;
  bool converged = false;
  bool monotone = true;  // no decrease beyond monotone_slack * |B|
  std::size_t estep_warnings = 0;
  std::size_t degenerate_topic_events = 0;
  std::size_t sigma_ridges = 0;
};

struct FitResult {
  ModelParams params;
  VarState state;
  FitReport report;
};

/// mu = 0, Sigma = I, beta as described in InitConfig, seeded.
ModelParams init_params(const Corpus& corpus, const TrainConfig& config);

VarState init_state(const ModelParams& params, const Corpus& corpus);

struct EStepSummary {
  double bound = 0.0;
  std::size_t newton_warnings = 0;
  std::size_t unconverged_documents = 0;
};

/// estep_document on every document, in parallel, warm-started from `state`.
/// The bound is summed in document order.
EStepSummary run_estep(const ModelParams& params, const Corpus& corpus, VarState& state,
                       const EStepSchedule& schedule, unsigned threads);

/// Called after every EM iteration with (iteration, params, bound).
using IterationCallback = std::function<void(int, const ModelParams&, double)>;

/// Alternates E-step and M-step from init_params until the relative change of
/// B falls below rel_tol or max_em_iters is reached. Every E-step after the
/// first starts from the previous iteration's state, which keeps the bound
/// trajectory monotone.
FitResult fit(const Corpus& corpus, const TrainConfig& config, const IterationCallback& on_iter = {});

struct GroundTruth {
  std::vector<Vector> gamma;                           // per document
  std::vector<std::vector<Vector>> eta;                // per segment
  std::vector<std::vector<std::vector<int>>> topics;   // per position
};

struct GeneratedCorpus {
  Corpus corpus;
  GroundTruth truth;
};

/// Samples D documents from the generative model. Segment counts and segment
/// lengths are Poisson draws conditioned on being >= 1. The vocabulary is
/// "w0" ... "w{W-1}".
GeneratedCorpus generate(const ModelParams& params, const GenerativeConfig& gen, std::size_t D);

}  // namespace mctm
