#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mctm/error.hpp"
#include "mctm/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mctm;

namespace {

Vector word_frequencies(const Corpus& c) {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(c.vocabulary.size()));
  for (const auto& d : c.documents)
    for (const auto& s : d.segments)
      for (auto w : s.positions()) f[w] += 1.0;
  return f / f.sum();
}

GeneratedCorpus separated_corpus(int K, int block, std::size_t D, std::uint64_t seed) {
  GenerativeConfig gen;
  gen.upsilon_s = 3;
  gen.upsilon_n = 40;
  gen.seed = seed;
  const ModelParams truth(Vector::Zero(K), Matrix::Identity(K, K), fixtures::block_beta(K, block, 0.95));
  return generate(truth, gen, D);
}

}  // namespace

TEST(InitParams, ValidSeededAndReproducible) {
  std::mt19937_64 rng(71);
  const auto c = fixtures::random_corpus(20, 5, 3, 10, rng);
  TrainConfig cfg;
  cfg.num_topics = 4;
  const auto a = init_params(c, cfg);
  const auto b = init_params(c, cfg);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.mu(), Vector::Zero(4));
  EXPECT_EQ(a.sigma(), Matrix::Identity(4, 4));
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(a.beta().col(k).sum(), 1.0, 1e-12);
  EXPECT_GT(a.beta().minCoeff(), 0.0);
  cfg.seed = 2;
  EXPECT_NE(init_params(c, cfg).fingerprint(), a.fingerprint());
}

TEST(InitParams, LargeConcentrationApproachesMixture) {
  std::mt19937_64 rng(72);
  const auto c = fixtures::random_corpus(15, 8, 3, 20, rng);
  TrainConfig cfg;
  cfg.num_topics = 3;
  cfg.init.dirichlet_scale = 1e8;
  cfg.init.empirical_weight = 0.3;
  const auto p = init_params(c, cfg);
  const Vector f = word_frequencies(c);
  const Vector target = 0.7 * Vector::Constant(15, 1.0 / 15) + 0.3 * f;
  for (int k = 0; k < 3; ++k) EXPECT_LT((p.beta().col(k) - target).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(TrainConfig, ValidationAndFile) {
  TrainConfig bad;
  bad.num_topics = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  const auto path = std::filesystem::temp_directory_path() / "mctm_train_config.json";
  std::ofstream(path) << R"({"num_topics": 7, "rel_tol": 1e-5, "estep": {"max_sweeps": 9}})";
  const auto cfg = load_train_config(path);
  EXPECT_EQ(cfg.num_topics, 7);
  EXPECT_DOUBLE_EQ(cfg.rel_tol, 1e-5);
  EXPECT_EQ(cfg.estep.max_sweeps, 9);
  EXPECT_EQ(cfg.max_em_iters, TrainConfig{}.max_em_iters);
  std::ofstream(path) << R"({"num_topics": "many"})";
  EXPECT_THROW(load_train_config(path), ValidationError);
  std::ofstream(path) << R"({"num_topics": -1})";
  EXPECT_THROW(load_train_config(path), ValidationError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_train_config(path), IoError);
}

TEST(Fit, SingleTopicRecoversWordFrequencies) {
  std::mt19937_64 rng(73);
  const auto c = fixtures::random_corpus(10, 6, 3, 15, rng);
  TrainConfig cfg;
  cfg.num_topics = 1;
  const auto r = fit(c, cfg);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LT((r.params.beta().col(0) - word_frequencies(c)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fit, MonotoneAndDeterministic) {
  const auto g = separated_corpus(3, 8, 30, 5);
  TrainConfig cfg;
  cfg.num_topics = 3;
  cfg.max_em_iters = 40;
  cfg.threads = 1;
  const auto a = fit(g.corpus, cfg);
  EXPECT_TRUE(a.report.monotone);
  const auto& t = a.report.bound_trajectory;
  ASSERT_EQ(t.size(), static_cast<std::size_t>(a.report.em_iters));
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_GE(t[i], t[i - 1] - 1e-8 * std::abs(t[i - 1]));
  EXPECT_DOUBLE_EQ(t.back(), elbo_bound(a.params, a.state, g.corpus));

  cfg.threads = 3;
  int calls = 0;
  const auto b = fit(g.corpus, cfg, [&](int it, const ModelParams&, double bound) {
    ++calls;
    EXPECT_EQ(bound, t[it - 1]);
  });
  EXPECT_EQ(calls, a.report.em_iters);
  EXPECT_EQ(a.params.fingerprint(), b.params.fingerprint());
}

TEST(Fit, DifferentSeedsAgreeUpToPermutation) {
  const auto g = separated_corpus(3, 10, 80, 9);
  TrainConfig cfg;
  cfg.num_topics = 3;
  cfg.max_em_iters = 150;
  cfg.seed = 1;
  const auto a = fit(g.corpus, cfg);
  cfg.seed = 2;
  const auto b = fit(g.corpus, cfg);
  EXPECT_LE(oracle::matched_tv(Matrix(a.params.beta()), Matrix(b.params.beta())), 0.1);
}

TEST(Fit, RejectsBadInputs) {
  Corpus empty;
  TrainConfig cfg;
  EXPECT_THROW(fit(empty, cfg), ValidationError);
}

TEST(Generate, ShapesAndTruncation) {
  const ModelParams p(Vector::Zero(2), Matrix::Identity(2, 2), fixtures::block_beta(2, 3, 0.9));
  GenerativeConfig gen;
  gen.upsilon_s = 0.3;  // most untruncated draws would be zero
  gen.upsilon_n = 0.3;
  const auto g = generate(p, gen, 200);
  ASSERT_EQ(g.corpus.num_documents(), 200u);
  EXPECT_NO_THROW(g.corpus.validate());
  EXPECT_EQ(g.corpus.vocabulary.term(5), "w5");
  for (std::size_t d = 0; d < 200; ++d) {
    ASSERT_GE(g.corpus.documents[d].segments.size(), 1u);
    ASSERT_EQ(g.truth.eta[d].size(), g.corpus.documents[d].segments.size());
    for (std::size_t s = 0; s < g.truth.eta[d].size(); ++s) {
      EXPECT_GE(g.corpus.documents[d].segments[s].size(), 1u);
      EXPECT_EQ(g.truth.topics[d][s].size(), g.corpus.documents[d].segments[s].size());
    }
  }
  gen.upsilon_s = 0.0;
  EXPECT_THROW(generate(p, gen, 1), ValidationError);
}

TEST(Generate, SegmentCountFollowsZeroTruncatedPoisson) {
  const ModelParams p(Vector::Zero(2), Matrix::Identity(2, 2), fixtures::block_beta(2, 2, 0.9));
  GenerativeConfig gen;
  gen.upsilon_s = 5;
  gen.upsilon_n = 1;
  gen.seed = 17;
  const std::size_t D = 10000;
  const auto g = generate(p, gen, D);
  double sum = 0, sum2 = 0;
  for (const auto& d : g.corpus.documents) {
    const double s = static_cast<double>(d.segments.size());
    sum += s;
    sum2 += s * s;
  }
  const double mean = sum / D;
  const double se = std::sqrt((sum2 / D - mean * mean) / D);
  EXPECT_NEAR(mean, oracle::truncated_poisson_mean(5.0), 3 * se);
}

TEST(Generate, DegenerateCovarianceGivesTopicFrequenciesOfMu) {
  const Vector mu(Eigen::Vector3d(0.5, -0.5, 0.0));
  const ModelParams p(mu, 1e-12 * Matrix::Identity(3, 3), fixtures::block_beta(3, 2, 0.9));
  GenerativeConfig gen;
  gen.seed = 4;
  const auto g = generate(p, gen, 300);
  Vector freq = Vector::Zero(3);
  for (const auto& d : g.truth.topics)
    for (const auto& s : d)
      for (int z : s) freq[z] += 1;
  const double n = freq.sum();
  freq /= n;
  const Vector f = softmax(as_span(mu));
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(freq[k], f[k], 4 * std::sqrt(f[k] * (1 - f[k]) / n));
  for (const auto& d : g.truth.eta)
    for (const auto& e : d) EXPECT_LT((e - mu).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Generate, IdentityBetaMakesWordsTheTopics) {
  const ModelParams p(Vector::Zero(3), Matrix::Identity(3, 3), RowMatrix::Identity(3, 3));
  GenerativeConfig gen;
  gen.upsilon_s = 2;
  gen.upsilon_n = 3000;
  const auto g = generate(p, gen, 5);
  for (std::size_t d = 0; d < 5; ++d) {
    for (std::size_t s = 0; s < g.truth.eta[d].size(); ++s) {
      const auto& seg = g.corpus.documents[d].segments[s];
      ASSERT_EQ(seg.positions().size(), g.truth.topics[d][s].size());
      for (std::size_t n = 0; n < seg.size(); ++n) {
        EXPECT_EQ(static_cast<int>(seg.positions()[n]), g.truth.topics[d][s][n]);
      }
      Vector hist = Vector::Zero(3);
      for (auto w : seg.positions()) hist[w] += 1;
      hist /= hist.sum();
      EXPECT_LT(oracle::total_variation(hist, softmax(as_span(g.truth.eta[d][s]))), 0.05);
    }
  }
}
