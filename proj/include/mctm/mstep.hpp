#pragma once

// Closed-form maximization of B over (beta, mu, Sigma) given the variational state.

#include <span>
#include <vector>

#include "mctm/params.hpp"

namespace mctm {

inline constexpr double kBetaFloor = 1e-12;
inline constexpr double kSigmaRidge = 1e-8;
inline constexpr double kSigmaMinEigen = 1e-10;

struct BetaUpdate {
  RowMatrix beta;
  /// Topics that received no mass at all; their columns are set uniform.
  std::vector<int> degenerate_topics;
};

/// beta_wk proportional to sum_{d,s} count_ds(w) phi_dsw,k. Entries below
/// kBetaFloor are raised to it before each column is normalized.
BetaUpdate mstep_beta(const Corpus& corpus, const VarState& state, int num_topics);

Vector mstep_mu(std::span<const Vector> lambdas);
Vector mstep_mu(const VarState& state);

struct SigmaUpdate {
  Matrix sigma;
  bool ridged = false;
};

/// (D + sum_d S_d)^-1 [ sum_d diag(v2_d) + sum_{d,s} diag(v2_d + m2_ds)
///   + sum_d (lambda_d - mu)(lambda_d - mu)^T + sum_{d,s} (xi_ds - lambda_d)(xi_ds - lambda_d)^T ]
/// The result is exactly symmetric; kSigmaRidge * I is added when its
/// smallest eigenvalue is below kSigmaMinEigen.
SigmaUpdate mstep_sigma(const VarState& state, const Vector& mu);

struct MStepReport {
  std::vector<int> degenerate_topics;
  bool sigma_ridged = false;
};

/// beta, then mu, then Sigma at the new mu, written into `params`.
MStepReport mstep(ModelParams& params, const Corpus& corpus, const VarState& state);

}  // namespace mctm
