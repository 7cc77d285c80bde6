#include "mctm/trainer.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "mctm/error.hpp"
#include "mctm/parallel.hpp"

namespace mctm {

void TrainConfig::validate() const {
  if (num_topics < 1) throw ValidationError("number of topics must be >= 1");
  if (!(rel_tol > 0.0)) throw ValidationError("rel-tol must be > 0");
  if (max_em_iters < 1) throw ValidationError("max-em-iters must be >= 1");
  if (!(init.dirichlet_scale > 0.0)) throw ValidationError("dirichlet scale must be > 0");
  if (!(init.empirical_weight >= 0.0 && init.empirical_weight <= 1.0)) {
    throw ValidationError("empirical weight must lie in [0, 1]");
  }
  estep.validate();
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig c) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    c.num_topics = j.value("num_topics", c.num_topics);
    c.rel_tol = j.value("rel_tol", c.rel_tol);
    c.max_em_iters = j.value("max_em_iters", c.max_em_iters);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.monotone_slack = j.value("monotone_slack", c.monotone_slack);
    if (j.contains("estep")) {
      const auto& e = j.at("estep");
      c.estep.newton_tol = e.value("newton_tol", c.estep.newton_tol);
      c.estep.newton_max_iter = e.value("newton_max_iter", c.estep.newton_max_iter);
      c.estep.rel_tol = e.value("rel_tol", c.estep.rel_tol);
      c.estep.max_sweeps = e.value("max_sweeps", c.estep.max_sweeps);
      c.estep.monotone_slack = e.value("monotone_slack", c.estep.monotone_slack);
    }
    if (j.contains("init")) {
      const auto& i = j.at("init");
      c.init.dirichlet_scale = i.value("dirichlet_scale", c.init.dirichlet_scale);
      c.init.empirical_weight = i.value("empirical_weight", c.init.empirical_weight);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

ModelParams init_params(const Corpus& corpus, const TrainConfig& config) {
  config.validate();
  const auto W = static_cast<Eigen::Index>(corpus.vocabulary.size());
  const Eigen::Index K = config.num_topics;
  if (W < 1) throw ValidationError("empty vocabulary");

  Vector freq = Vector::Zero(W);
  for (const auto& d : corpus.documents) {
    for (const auto& s : d.segments) {
      for (const auto& wc : s.counts()) freq[wc.word] += wc.count;
    }
  }
  if (freq.sum() > 0.0) freq /= freq.sum();

  const double rho = config.init.empirical_weight;
  const double scale = config.init.dirichlet_scale;
  std::mt19937_64 rng(config.seed);
  RowMatrix beta(W, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    double total = 0.0;
    for (Eigen::Index w = 0; w < W; ++w) {
      const double alpha = scale * ((1.0 - rho) + rho * static_cast<double>(W) * freq[w]);
      const double g = alpha > 0.0 ? std::gamma_distribution<double>(alpha, 1.0)(rng) : 0.0;
      beta(w, k) = g;
      total += g;
    }
    if (!(total > 0.0)) {
      beta.col(k).setConstant(1.0 / static_cast<double>(W));
    } else {
      beta.col(k) /= total;
    }
  }
  // Tiny Dirichlet concentrations can underflow individual draws to zero.
  beta = beta.cwiseMax(kBetaFloor);
  for (Eigen::Index k = 0; k < K; ++k) beta.col(k) /= beta.col(k).sum();
  return ModelParams(Vector::Zero(K), Matrix::Identity(K, K), std::move(beta));
}

VarState init_state(const ModelParams& params, const Corpus& corpus) {
  VarState st;
  st.documents.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) st.documents.push_back(init_document_state(params, d));
  return st;
}

EStepSummary run_estep(const ModelParams& params, const Corpus& corpus, VarState& state,
                       const EStepSchedule& schedule, unsigned threads) {
  const auto D = corpus.documents.size();
  if (state.documents.size() != D) throw ValidationError("state does not match corpus");
  std::vector<double> bounds(D);
  std::vector<int> warnings(D);
  std::vector<char> converged(D);
  parallel_for(D, threads, [&](std::size_t d) {
    auto r = estep_document(params, corpus.documents[d], std::move(state.documents[d]), schedule);
    state.documents[d] = std::move(r.state);
    bounds[d] = r.bound;
    warnings[d] = r.newton_warnings;
    converged[d] = r.converged;
  });
  EStepSummary s;
  for (std::size_t d = 0; d < D; ++d) {
    s.bound += bounds[d];
    s.newton_warnings += static_cast<std::size_t>(warnings[d]);
    s.unconverged_documents += converged[d] ? 0 : 1;
  }
  return s;
}

FitResult fit(const Corpus& corpus, const TrainConfig& config, const IterationCallback& on_iter) {
  config.validate();
  corpus.validate();
  if (corpus.vocabulary.size() < static_cast<std::size_t>(config.num_topics)) {
    spdlog::warn("vocabulary size {} is smaller than the number of topics {}",
                 corpus.vocabulary.size(), config.num_topics);
  }
  FitResult result{init_params(corpus, config), {}, {}};
  auto& params = result.params;
  auto& report = result.report;
  result.state = init_state(params, corpus);

  for (int it = 1; it <= config.max_em_iters; ++it) {
    EStepSummary es;
    MStepReport ms;
    double bound = 0.0;
    try {
      es = run_estep(params, corpus, result.state, config.estep, config.threads);
      ms = mstep(params, corpus, result.state);
      bound = elbo_bound(params, result.state, corpus);
    } catch (const NumericError& e) {
      throw NumericError("EM iteration " + std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(bound)) {
      throw NumericError("EM iteration " + std::to_string(it) + ": bound is not finite");
    }
    report.estep_warnings += es.newton_warnings;
    report.degenerate_topic_events += ms.degenerate_topics.size();
    report.sigma_ridges += ms.sigma_ridged ? 1 : 0;
    for (int k : ms.degenerate_topics) {
      spdlog::warn("EM iteration {}: topic {} received no mass; column reset to uniform", it, k);
    }
    report.bound_trajectory.push_back(bound);
    report.em_iters = it;
    spdlog::debug("EM iteration {}: bound {:.10g}", it, bound);
    if (on_iter) on_iter(it, params, bound);

    if (it > 1) {
      const double prev = report.bound_trajectory[report.bound_trajectory.size() - 2];
      if (bound < prev - config.monotone_slack * std::abs(prev)) {
        report.monotone = false;
        spdlog::warn("EM iteration {}: bound decreased from {:.12g} to {:.12g}", it, prev, bound);
      }
      if (std::abs(bound - prev) < config.rel_tol * std::abs(prev)) {
        report.converged = true;
        break;
      }
    }
  }
  return result;
}

namespace {

int truncated_poisson(double rate, std::mt19937_64& rng) {
  std::poisson_distribution<int> pois(rate);
  for (;;) {
    const int v = pois(rng);
    if (v >= 1) return v;
  }
}

}  // namespace

GeneratedCorpus generate(const ModelParams& params, const GenerativeConfig& gen, std::size_t D) {
  gen.validate();
  const auto K = params.num_topics();
  const auto W = params.num_words();
  std::mt19937_64 rng(gen.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix L = params.sigma_cholesky();
  auto mvn = [&](const Vector& mean) {
    Vector z(K);
    for (int k = 0; k < K; ++k) z[k] = normal(rng);
    return Vector(mean + L * z);
  };

  // Per-topic word samplers.
  std::vector<std::discrete_distribution<int>> words;
  words.reserve(K);
  for (int k = 0; k < K; ++k) {
    std::vector<double> col(W);
    for (int w = 0; w < W; ++w) col[w] = params.beta()(w, k);
    words.emplace_back(col.begin(), col.end());
  }

  GeneratedCorpus out;
  for (int w = 0; w < W; ++w) out.corpus.vocabulary.add("w" + std::to_string(w));
  out.truth.gamma.reserve(D);
  for (std::size_t d = 0; d < D; ++d) {
    const int S = truncated_poisson(gen.upsilon_s, rng);
    Vector gamma = mvn(params.mu());
    Document doc{"doc" + std::to_string(d), {}};
    std::vector<Vector> etas;
    std::vector<std::vector<int>> topics;
    for (int s = 0; s < S; ++s) {
      Vector eta = mvn(gamma);
      const Vector theta = softmax(as_span(eta));
      std::discrete_distribution<int> topic(theta.data(), theta.data() + K);
      const int N = truncated_poisson(gen.upsilon_n, rng);
      std::vector<WordId> positions(N);
      std::vector<int> z(N);
      for (int n = 0; n < N; ++n) {
        z[n] = topic(rng);
        positions[n] = static_cast<WordId>(words[z[n]](rng));
      }
      doc.segments.emplace_back(std::move(positions));
      etas.push_back(std::move(eta));
      topics.push_back(std::move(z));
    }
    out.corpus.documents.push_back(std::move(doc));
    out.truth.gamma.push_back(std::move(gamma));
    out.truth.eta.push_back(std::move(etas));
    out.truth.topics.push_back(std::move(topics));
  }
  return out;
}

}  // namespace mctm
