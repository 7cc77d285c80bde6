#include <gtest/gtest.h>

#include <random>

#include "mctm/error.hpp"
#include "mctm/mstep.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mctm;

namespace {

// beta from a loop over every word position.
RowMatrix position_level_beta(const Corpus& c, const VarState& st, int K) {
  RowMatrix acc = RowMatrix::Zero(static_cast<Eigen::Index>(c.vocabulary.size()), K);
  for (std::size_t d = 0; d < c.documents.size(); ++d) {
    for (std::size_t s = 0; s < c.documents[d].segments.size(); ++s) {
      const auto& seg = c.documents[d].segments[s];
      for (auto w : seg.positions()) {
        acc.row(w) += st.documents[d].segments[s].phi.row(oracle::phi_row(seg, w));
      }
    }
  }
  for (int k = 0; k < K; ++k) {
    acc.col(k) = acc.col(k).cwiseMax(kBetaFloor);
    acc.col(k) /= acc.col(k).sum();
  }
  return acc;
}

struct Fitted {
  ModelParams params;
  Corpus corpus;
  VarState state;
};

Fitted after_mstep(int K, std::mt19937_64& rng) {
  auto p = fixtures::random_params(K, 12, rng);
  auto c = fixtures::random_corpus(12, 6, 3, 15, rng);
  auto st = fixtures::random_var_state(p, c, rng);
  mstep(p, c, st);
  return {std::move(p), std::move(c), std::move(st)};
}

}  // namespace

TEST(MStepBeta, SingleTopicGivesEmpiricalFrequencies) {
  Corpus c;
  c.vocabulary = Vocabulary({"a", "b"});
  c.documents = {{"d", {Segment({0, 0, 1})}}};
  VarState st{{DocumentState{Vector::Zero(1), Vector::Ones(1),
                             {SegmentState{Vector::Zero(1), Vector::Ones(1), 1.0,
                                           RowMatrix::Ones(2, 1)}}}}};
  const auto b = mstep_beta(c, st, 1);
  EXPECT_NEAR(b.beta(0, 0), 2.0 / 3, 1e-15);
  EXPECT_NEAR(b.beta(1, 0), 1.0 / 3, 1e-15);
  EXPECT_TRUE(b.degenerate_topics.empty());
}

TEST(MStepBeta, EmptyTopicBecomesUniform) {
  Corpus c;
  c.vocabulary = Vocabulary({"a", "b", "c"});
  c.documents = {{"d", {Segment({0, 0, 1})}}};
  RowMatrix phi(2, 2);
  phi << 1, 0, 1, 0;
  VarState st{{DocumentState{Vector::Zero(2), Vector::Ones(2),
                             {SegmentState{Vector::Zero(2), Vector::Ones(2), 1.0, phi}}}}};
  const auto b = mstep_beta(c, st, 2);
  EXPECT_NEAR(b.beta(0, 0), 2.0 / 3, 1e-11);
  EXPECT_NEAR(b.beta(1, 0), 1.0 / 3, 1e-11);
  EXPECT_NEAR(b.beta(2, 0), kBetaFloor / (2.0 + 1.0 + kBetaFloor), 1e-20);
  for (int w = 0; w < 3; ++w) EXPECT_DOUBLE_EQ(b.beta(w, 1), 1.0 / 3);
  EXPECT_EQ(b.degenerate_topics, std::vector<int>{1});
}

TEST(MStepBeta, MatchesPositionLevelOracle) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const int K = 2 + trial % 4;
    const auto p = fixtures::random_params(K, 9, rng);
    const auto c = fixtures::random_corpus(9, 4, 3, 12, rng);
    const auto st = fixtures::random_var_state(p, c, rng);
    const auto b = mstep_beta(c, st, K);
    EXPECT_LT((b.beta - position_level_beta(c, st, K)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(MStepMu, Examples) {
  const std::vector<Vector> one{Eigen::Vector2d(0.3, -2)};
  EXPECT_EQ(mstep_mu(one), one[0]);
  const std::vector<Vector> two{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  EXPECT_EQ(mstep_mu(two), Vector(Eigen::Vector2d(0.5, 0.5)));
  EXPECT_THROW(mstep_mu(std::span<const Vector>{}), ValidationError);
}

TEST(MStepSigma, OuterProductsVanish) {
  VarState st{{DocumentState{Vector::Zero(3), Vector::Ones(3),
                             {SegmentState{Vector::Zero(3), Vector::Ones(3), 1.0, {}}}}}};
  const auto s = mstep_sigma(st, Vector::Zero(3));
  EXPECT_EQ(s.sigma, Matrix(1.5 * Matrix::Identity(3, 3)));
  EXPECT_FALSE(s.ridged);
}

TEST(MStepSigma, SymmetricAndRidgedWhenSingular) {
  std::mt19937_64 rng(62);
  const auto f = after_mstep(4, rng);
  EXPECT_EQ(f.params.sigma(), f.params.sigma().transpose());

  // Zero variances and identical means leave a zero matrix.
  VarState flat{{DocumentState{Vector::Zero(2), Vector::Zero(2),
                               {SegmentState{Vector::Zero(2), Vector::Zero(2), 1.0, {}}}}}};
  const auto s = mstep_sigma(flat, Vector::Zero(2));
  EXPECT_TRUE(s.ridged);
  EXPECT_EQ(s.sigma, Matrix(kSigmaRidge * Matrix::Identity(2, 2)));
}

TEST(MStep, UpdatesAreCoordinateMaxima) {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 5; ++trial) {
    const int K = 3;
    const auto f = after_mstep(K, rng);
    const double at = elbo_bound(f.params, f.state, f.corpus);

    auto mu_at = [&](const Vector& mu) {
      ModelParams p = f.params;
      p.set_mu(mu);
      return elbo_bound(p, f.state, f.corpus);
    };
    for (int k = 0; k < K; ++k) {
      EXPECT_LT(std::abs(oracle::derivative(mu_at, f.params.mu(), k, 1e-4)), 1e-6);
    }

    for (int i = 0; i < K; ++i) {
      for (int j = i; j < K; ++j) {
        for (double e : {1e-4, -1e-4}) {
          Matrix s = f.params.sigma();
          s(i, j) += e;
          if (i != j) s(j, i) += e;
          ModelParams p = f.params;
          p.set_sigma(s);
          EXPECT_LE(elbo_bound(p, f.state, f.corpus), at);
        }
      }
    }

    for (int k = 0; k < K; ++k) {
      for (int w = 0; w + 1 < f.params.num_words(); ++w) {
        // Interior entries only; floored entries sit on the boundary.
        if (f.params.beta()(w, k) < 2e-3 || f.params.beta()(w + 1, k) < 2e-3) continue;
        for (double e : {1e-3, -1e-3}) {
          RowMatrix b = f.params.beta();
          b(w, k) += e;
          b(w + 1, k) -= e;
          ModelParams p = f.params;
          p.set_beta(b);
          EXPECT_LE(elbo_bound(p, f.state, f.corpus), at);
        }
      }
    }
  }
}

TEST(MStep, KeepsParameterInvariantsAndIgnoresGrouping) {
  std::mt19937_64 rng(64);
  auto f = after_mstep(5, rng);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(f.params.beta().col(k).sum(), 1.0, 1e-12);
  EXPECT_TRUE(Eigen::LLT<Matrix>(f.params.sigma()).info() == Eigen::Success);

  // Reordering positions inside a segment changes nothing.
  Corpus shuffled = f.corpus;
  for (auto& d : shuffled.documents) {
    for (auto& s : d.segments) {
      std::vector<WordId> pos(s.positions().begin(), s.positions().end());
      std::reverse(pos.begin(), pos.end());
      s = Segment(std::move(pos));
    }
  }
  EXPECT_EQ(mstep_beta(shuffled, f.state, 5).beta, mstep_beta(f.corpus, f.state, 5).beta);
}
