#include "mctm/params.hpp"

#include <cmath>
#include <string>

#include "mctm/error.hpp"

namespace mctm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

ModelParams::ModelParams(Vector mu, Matrix sigma, RowMatrix beta) {
  if (mu.size() < 1) throw ValidationError("model needs at least one topic");
  mu_ = std::move(mu);
  set_sigma(std::move(sigma));
  set_beta(std::move(beta));
}

void ModelParams::set_mu(Vector mu) {
  if (mu.size() != mu_.size()) throw ValidationError("mu has wrong dimension");
  if (!mu.allFinite()) throw NumericError("mu has non-finite entries");
  mu_ = std::move(mu);
}

void ModelParams::set_sigma(Matrix sigma) {
  const auto K = mu_.size();
  if (sigma.rows() != K || sigma.cols() != K) {
    throw ValidationError("sigma must be " + std::to_string(K) + "x" + std::to_string(K));
  }
  if (!sigma.allFinite()) throw NumericError("sigma has non-finite entries");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericError("sigma is not symmetric");
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericError("sigma is not positive definite");
  const Matrix L = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(L(k, k) > 0.0)) throw NumericError("sigma is not positive definite");
    log_det += 2.0 * std::log(L(k, k));
  }
  Matrix inv = llt.solve(Matrix::Identity(K, K));
  inv = 0.5 * (inv + inv.transpose()).eval();
  if (!inv.allFinite()) throw NumericError("sigma is numerically singular");

  sigma_ = std::move(sigma);
  llt_ = std::move(llt);
  sigma_inv_ = std::move(inv);
  sigma_inv_diag_ = sigma_inv_.diagonal();
  log_det_sigma_ = log_det;
}

void ModelParams::set_beta(RowMatrix beta) {
  if (beta.cols() != mu_.size()) throw ValidationError("beta must have K columns");
  if (beta.rows() < 1) throw ValidationError("beta must have at least one row");
  if (!beta.allFinite() || beta.minCoeff() < 0.0) {
    throw ValidationError("beta entries must be finite and non-negative");
  }
  for (Eigen::Index k = 0; k < beta.cols(); ++k) {
    const double s = beta.col(k).sum();
    if (std::abs(s - 1.0) > 1e-10) {
      throw ValidationError("beta column " + std::to_string(k) + " sums to " + std::to_string(s));
    }
  }
  beta_ = std::move(beta);
  log_beta_ = beta_.array().log().matrix();
}

std::uint64_t ModelParams::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(mu_.data(), sizeof(double) * mu_.size(), h);
  h = fnv1a(sigma_.data(), sizeof(double) * sigma_.size(), h);
  h = fnv1a(beta_.data(), sizeof(double) * beta_.size(), h);
  return h;
}

void GenerativeConfig::validate() const {
  if (!(upsilon_s > 0.0) || !(upsilon_n > 0.0)) throw ValidationError("Poisson rates must be > 0");
}

Vector softmax(std::span<const double> eta) {
  Vector out(static_cast<Eigen::Index>(eta.size()));
  if (eta.empty()) return out;
  double m = -INFINITY;
  for (double e : eta) {
    if (!std::isfinite(e)) throw NumericError("softmax of non-finite input");
    m = std::max(m, e);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < eta.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = std::exp(eta[k] - m);
    total += out[static_cast<Eigen::Index>(k)];
  }
  return out / total;
}

void validate_document_state(const ModelParams& params, const Document& doc,
                             const DocumentState& state) {
  const auto K = params.num_topics();
  auto fail = [&](const std::string& what) {
    throw ValidationError("state for document '" + doc.label + "': " + what);
  };
  if (state.lambda.size() != K || state.v2.size() != K) fail("lambda/v2 dimension");
  if (state.segments.size() != doc.segments.size()) fail("segment count");
  for (std::size_t s = 0; s < doc.segments.size(); ++s) {
    const auto& seg = state.segments[s];
    if (seg.xi.size() != K || seg.m2.size() != K) fail("xi/m2 dimension");
    if (seg.phi.cols() != K ||
        seg.phi.rows() != static_cast<Eigen::Index>(doc.segments[s].unique_words())) {
      fail("phi shape");
    }
    for (const auto& wc : doc.segments[s].counts()) {
      if (wc.word >= static_cast<WordId>(params.num_words())) fail("word id outside beta");
    }
  }
}

// Per segment (d, s), with N = N_ds and Phi = sum_n phi_dsn:
//
//   -1/2 log|Sigma| - K/2 log 2pi - 1/2 Tr(diag(v2_d + m2_ds) Sigma^-1)
//   - 1/2 (xi - lambda)^T Sigma^-1 (xi - lambda)
//   + xi . Phi - N [ zeta^-1 sum_k exp(xi_k + m2_k / 2) - 1 + log zeta ]
//   + sum_n sum_k phi_nk (log beta_{w_n,k} - log phi_nk)
//   + 1/2 sum_k (log m2_k + log 2pi + 1)
//
// The eta entropy is counted once per (d, s, k), not once per word: the entropy
// of q(eta_ds) does not depend on N_ds. There is no -sum_n sum_k phi_nk term;
// on the simplex it is the constant -N_ds and does not come out of the
// expectations.
double segment_bound(const ModelParams& params, const Segment& segment, const DocumentState& doc,
                     const SegmentState& state) {
  const auto K = params.num_topics();
  const Matrix& sinv = params.sigma_inv();
  const double N = static_cast<double>(segment.size());

  double b = -0.5 * params.log_det_sigma() - 0.5 * K * kLog2Pi;
  b -= 0.5 * (doc.v2 + state.m2).dot(params.sigma_inv_diag());
  const Vector diff = state.xi - doc.lambda;
  b -= 0.5 * diff.dot(sinv * diff);

  double normalizer = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) normalizer += std::exp(state.xi[k] + 0.5 * state.m2[k]);
  b -= N * (normalizer / state.zeta - 1.0 + std::log(state.zeta));

  const auto counts = segment.counts();
  double words = 0.0;
  for (std::size_t u = 0; u < counts.size(); ++u) {
    const double* phi = state.phi.data() + u * K;
    const auto log_beta = params.log_beta_row(counts[u].word);
    double acc = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double p = phi[k];
      if (p > 0.0) acc += p * (state.xi[k] + log_beta[k] - std::log(p));
    }
    words += counts[u].count * acc;
  }
  b += words;

  for (Eigen::Index k = 0; k < K; ++k) b += 0.5 * (std::log(state.m2[k]) + kLog2Pi + 1.0);
  return b;
}

// Per document d:
//
//   -1/2 log|Sigma| - K/2 log 2pi - 1/2 Tr(diag(v2_d) Sigma^-1)
//   - 1/2 (lambda - mu)^T Sigma^-1 (lambda - mu) + 1/2 sum_k (log v2_k + log 2pi + 1)
//
// The trace term belongs to each document; it is summed over d here.
double document_bound(const ModelParams& params, const Document& doc, const DocumentState& state) {
  const auto K = params.num_topics();
  double b = -0.5 * params.log_det_sigma() - 0.5 * K * kLog2Pi;
  b -= 0.5 * state.v2.dot(params.sigma_inv_diag());
  const Vector diff = state.lambda - params.mu();
  b -= 0.5 * diff.dot(params.sigma_inv() * diff);
  for (Eigen::Index k = 0; k < K; ++k) b += 0.5 * (std::log(state.v2[k]) + kLog2Pi + 1.0);
  for (std::size_t s = 0; s < doc.segments.size(); ++s) {
    b += segment_bound(params, doc.segments[s], state, state.segments[s]);
  }
  return b;
}

double elbo_bound(const ModelParams& params, const VarState& state, const Corpus& corpus) {
  if (state.documents.size() != corpus.documents.size()) {
    throw ValidationError("state has " + std::to_string(state.documents.size()) +
                          " documents, corpus has " + std::to_string(corpus.documents.size()));
  }
  if (static_cast<std::size_t>(params.num_words()) != corpus.vocabulary.size()) {
    throw ValidationError("beta has " + std::to_string(params.num_words()) +
                          " rows, vocabulary has " + std::to_string(corpus.vocabulary.size()));
  }
  double b = 0.0;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    validate_document_state(params, corpus.documents[d], state.documents[d]);
    b += document_bound(params, corpus.documents[d], state.documents[d]);
  }
  return b;
}

}  // namespace mctm
