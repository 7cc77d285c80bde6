#pragma once

// Coordinate-ascent E-step. zeta, phi, lambda and v2 have closed-form
// maximizers; xi and m2 are found by damped Newton iterations on B.

#include <span>

#include "mctm/params.hpp"

namespace mctm {

struct EStepSchedule {
  double newton_tol = 1e-8;  // sup-norm of the gradient
  int newton_max_iter = 50;
  double rel_tol = 1e-6;     // relative improvement of the document's bound per sweep
  int max_sweeps = 100;
  double monotone_slack = 1e-8;

  void validate() const;
};

/// sum_k exp(xi_k + m2_k / 2), accumulated after shifting by the largest
/// exponent. Throws NumericError on overflow.
double update_zeta(std::span<const double> xi, std::span<const double> m2);

/// phi_k = beta_{w,k} exp(xi_k) / sum_j beta_{w,j} exp(xi_j).
/// Throws DegenerateWordError when every numerator is zero.
Vector update_phi(std::span<const double> beta_row, std::span<const double> xi);

/// Same as update_phi with exp(xi - max xi) precomputed, writing into `out`.
void update_phi_shifted(std::span<const double> beta_row, std::span<const double> exp_xi,
                        std::span<double> out);

/// (S_d + 1)^-1 (sum_s xi_ds + mu)
Vector update_lambda(std::span<const Vector> xis, const Vector& mu);

/// v2_dk = 1 / ((S_d + 1) (Sigma^-1)_kk). This is the stationary point of B in
/// the variance v2_dk (not the standard deviation).
Vector update_v2(const Vector& sigma_inv_diag, std::size_t num_segments);

/// Everything the xi_ds sub-problem depends on.
struct XiContext {
  const Matrix& sigma_inv;
  const Vector& lambda;
  const Vector& m2;
  double zeta;
  double num_words;      // N_ds
  const Vector& phi_sum; // sum_n phi_dsn
};

/// Terms of B that depend on xi_ds.
double xi_objective(const XiContext& ctx, const Vector& xi);
/// -Sigma^-1 (xi - lambda) + sum_n phi_n - (N / zeta) exp(xi + m2 / 2)
Vector xi_gradient(const XiContext& ctx, const Vector& xi);
/// -Sigma^-1 - (N / zeta) diag(exp(xi + m2 / 2))
Matrix xi_hessian(const XiContext& ctx, const Vector& xi);

/// Everything the m2_ds sub-problem depends on. The objective separates over k.
struct M2Context {
  const Vector& sigma_inv_diag;
  double zeta;
  double num_words;
  const Vector& xi;
};

double m2_objective(const M2Context& ctx, const Vector& m2);
/// -(Sigma^-1)_kk / 2 - (N / 2 zeta) exp(xi_k + m2_k / 2) + 1 / (2 m2_k)
Vector m2_gradient(const M2Context& ctx, const Vector& m2);
/// -(N / 4 zeta) exp(xi_k + m2_k / 2) - 1 / (2 m2_k^2), always negative.
Vector m2_second_derivative(const M2Context& ctx, const Vector& m2);

struct NewtonResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;  // sup-norm at the returned point
};

/// Newton steps on the negative-definite Hessian system, halving the step
/// until the objective does not decrease. Not converging within max_iter is
/// reported through `converged`, not thrown.
NewtonResult newton_xi(const XiContext& ctx, const Vector& xi0, double tol, int max_iter);

/// Coordinate-wise damped Newton. A step that would leave m2 non-positive is
/// halved first; the objective tends to -inf as m2 -> 0+ so this is safe.
NewtonResult newton_m2(const M2Context& ctx, const Vector& m2_0, double tol, int max_iter);

/// lambda = xi = mu, m2 = 1, v2 and zeta and phi at their closed forms.
DocumentState init_document_state(const ModelParams& params, const Document& doc);

struct EStepResult {
  DocumentState state;
  double bound = 0.0;        // document_bound at the returned state
  double bound_delta = 0.0;  // bound - bound at state0
  int sweeps = 0;
  int newton_warnings = 0;   // Newton solves that stopped above tolerance
  bool converged = false;
};

/// Sweeps [per segment: zeta, phi, xi, m2, zeta; then lambda, v2] until a sweep
/// improves the document bound by less than rel_tol relative, or max_sweeps.
/// A sweep that lowers the bound by more than monotone_slack * |B| throws
/// NumericError.
EStepResult estep_document(const ModelParams& params, const Document& doc, DocumentState state0,
                           const EStepSchedule& schedule);

}  // namespace mctm
