#pragma once

// Model hyperparameters, the mean-field variational state, the logistic-normal
// link and the tractable lower bound B on the evidence.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "mctm/corpus.hpp"

namespace mctm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

/// Logistic-normal hyperparameters (mu, Sigma) and the topic-word matrix beta.
///
/// beta is W x K and row-major so that the K topic probabilities of one word
/// are contiguous: beta(w, k) = Pr(word w | topic k), each column sums to 1.
/// The Cholesky factor of Sigma, its inverse, log|Sigma| and log(beta) are
/// cached and refreshed by the setters.
class ModelParams {
 public:
  ModelParams(Vector mu, Matrix sigma, RowMatrix beta);

  int num_topics() const noexcept { return static_cast<int>(mu_.size()); }
  int num_words() const noexcept { return static_cast<int>(beta_.rows()); }

  const Vector& mu() const noexcept { return mu_; }
  const Matrix& sigma() const noexcept { return sigma_; }
  const RowMatrix& beta() const noexcept { return beta_; }

  std::span<const double> beta_row(WordId w) const {
    return {beta_.data() + static_cast<std::size_t>(w) * beta_.cols(),
            static_cast<std::size_t>(beta_.cols())};
  }
  std::span<const double> log_beta_row(WordId w) const {
    return {log_beta_.data() + static_cast<std::size_t>(w) * log_beta_.cols(),
            static_cast<std::size_t>(log_beta_.cols())};
  }

  const Matrix& sigma_inv() const noexcept { return sigma_inv_; }
  const Vector& sigma_inv_diag() const noexcept { return sigma_inv_diag_; }
  double log_det_sigma() const noexcept { return log_det_sigma_; }
  /// Lower Cholesky factor L with Sigma = L L^T.
  Matrix sigma_cholesky() const { return llt_.matrixL(); }

  void set_mu(Vector mu);
  /// Throws NumericError if sigma is not symmetric positive definite.
  void set_sigma(Matrix sigma);
  /// Throws ValidationError unless every column is a probability vector.
  void set_beta(RowMatrix beta);

  /// FNV-1a over the raw bytes of mu, Sigma and beta.
  std::uint64_t fingerprint() const;

 private:
  Vector mu_;
  Matrix sigma_;
  RowMatrix beta_;
  RowMatrix log_beta_;
  Eigen::LLT<Matrix> llt_;
  Matrix sigma_inv_;
  Vector sigma_inv_diag_;
  double log_det_sigma_ = 0.0;
};

/// Variational factors of one segment. phi has one row per distinct word of
/// the segment, aligned with Segment::counts(); repeated positions of a word
/// share a row because the optimal assignment depends only on the word type.
struct SegmentState {
  Vector xi;  // mean of eta_ds
  Vector m2;  // variances of eta_ds
  double zeta = 1.0;
  RowMatrix phi;
};

struct DocumentState {
  Vector lambda;  // mean of gamma_d
  Vector v2;      // variances of gamma_d
  std::vector<SegmentState> segments;
};

struct VarState {
  std::vector<DocumentState> documents;
};

/// Poisson rates of the synthetic generator.
struct GenerativeConfig {
  double upsilon_s = 4.0;  // segments per document
  double upsilon_n = 50.0; // words per segment
  std::uint64_t seed = 1;

  void validate() const;
};

/// exp(eta_k) / sum_j exp(eta_j), evaluated after subtracting max(eta).
Vector softmax(std::span<const double> eta);

/// Throws ValidationError when the state does not match params and doc.
void validate_document_state(const ModelParams& params, const Document& doc,
                             const DocumentState& state);

/// Contribution of one segment to B: the eta_ds Gaussian cross-entropy and
/// entropy, and for each word the zeta-linearized normalizer bound, the
/// phi log beta term and the assignment entropy.
double segment_bound(const ModelParams& params, const Segment& segment, const DocumentState& doc,
                     const SegmentState& state);

/// Contribution of one document to B (its gamma_d terms plus its segments).
double document_bound(const ModelParams& params, const Document& doc, const DocumentState& state);

/// The lower bound B summed over documents in order.
double elbo_bound(const ModelParams& params, const VarState& state, const Corpus& corpus);

}  // namespace mctm
