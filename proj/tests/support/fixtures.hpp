#pragma once

// Random and synthetic instances shared by the unit and acceptance tests.

#include <random>
#include <vector>

#include "mctm/corpus.hpp"
#include "mctm/params.hpp"
#include "mctm/trainer.hpp"

namespace fixtures {

using mctm::Matrix;
using mctm::ModelParams;
using mctm::RowMatrix;
using mctm::Vector;

inline Vector normal_vector(int K, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Vector v(K);
  for (int k = 0; k < K; ++k) v[k] = z(rng);
  return v;
}

inline Vector uniform_vector(int K, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(K);
  for (int k = 0; k < K; ++k) v[k] = u(rng);
  return v;
}

/// Well-conditioned random covariance A A^T / K + 0.5 I.
inline Matrix random_sigma(int K, std::mt19937_64& rng) {
  Matrix a(K, K);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) a(i, j) = z(rng);
  Matrix s = a * a.transpose() / K + 0.5 * Matrix::Identity(K, K);
  return 0.5 * (s + s.transpose());
}

inline RowMatrix random_beta(int W, int K, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  RowMatrix b(W, K);
  for (int k = 0; k < K; ++k) {
    for (int w = 0; w < W; ++w) b(w, k) = g(rng) + 1e-3;
    b.col(k) /= b.col(k).sum();
  }
  return b;
}

inline ModelParams random_params(int K, int W, std::mt19937_64& rng) {
  return ModelParams(normal_vector(K, rng, 0.5), random_sigma(K, rng), random_beta(W, K, rng));
}

inline mctm::Document random_document(int W, int S, int max_words, std::mt19937_64& rng,
                                      std::string label = "d") {
  std::uniform_int_distribution<int> len(1, max_words);
  std::uniform_int_distribution<int> word(0, W - 1);
  mctm::Document d{std::move(label), {}};
  for (int s = 0; s < S; ++s) {
    std::vector<mctm::WordId> pos(len(rng));
    for (auto& p : pos) p = static_cast<mctm::WordId>(word(rng));
    d.segments.emplace_back(std::move(pos));
  }
  return d;
}

inline mctm::Corpus random_corpus(int W, int D, int max_segments, int max_words,
                                  std::mt19937_64& rng) {
  mctm::Corpus c;
  for (int w = 0; w < W; ++w) c.vocabulary.add("w" + std::to_string(w));
  std::uniform_int_distribution<int> segs(1, max_segments);
  for (int d = 0; d < D; ++d) {
    c.documents.push_back(random_document(W, segs(rng), max_words, rng, "doc" + std::to_string(d)));
  }
  return c;
}

/// Arbitrary interior point of the variational family (not an optimum).
inline mctm::DocumentState random_state(const ModelParams& p, const mctm::Document& doc,
                                        std::mt19937_64& rng) {
  const int K = p.num_topics();
  mctm::DocumentState st;
  st.lambda = normal_vector(K, rng);
  st.v2 = uniform_vector(K, rng, 0.2, 2.0);
  std::gamma_distribution<double> g(1.0, 1.0);
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  for (const auto& seg : doc.segments) {
    mctm::SegmentState q;
    q.xi = normal_vector(K, rng);
    q.m2 = uniform_vector(K, rng, 0.1, 2.0);
    q.zeta = (q.xi + 0.5 * q.m2).array().exp().sum() * scale(rng);
    q.phi.resize(static_cast<Eigen::Index>(seg.unique_words()), K);
    for (Eigen::Index u = 0; u < q.phi.rows(); ++u) {
      for (int k = 0; k < K; ++k) q.phi(u, k) = g(rng) + 0.05;
      q.phi.row(u) /= q.phi.row(u).sum();
    }
    st.segments.push_back(std::move(q));
  }
  return st;
}

inline mctm::VarState random_var_state(const ModelParams& p, const mctm::Corpus& c,
                                       std::mt19937_64& rng) {
  mctm::VarState st;
  for (const auto& d : c.documents) st.documents.push_back(random_state(p, d, rng));
  return st;
}

/// K topics over W = K * block words; topic k puts `mass` on its own block
/// and spreads the rest uniformly over the other words. Any two columns are at
/// total variation mass - (1 - mass) / (K - 1).
inline RowMatrix block_beta(int K, int block, double mass) {
  const int W = K * block;
  RowMatrix b(W, K);
  const double off = (1.0 - mass) / (W - block);
  for (int k = 0; k < K; ++k) {
    for (int w = 0; w < W; ++w) b(w, k) = (w / block == k) ? mass / block : off;
  }
  return b;
}

}  // namespace fixtures
