#include "mctm/estep.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "mctm/error.hpp"
#include "mctm/kernels.hpp"

namespace mctm {

void EStepSchedule::validate() const {
  if (!(newton_tol > 0.0)) throw ValidationError("newton tolerance must be > 0");
  if (newton_max_iter < 1) throw ValidationError("newton max-iter must be >= 1");
  if (!(rel_tol > 0.0)) throw ValidationError("sweep rel-tol must be > 0");
  if (max_sweeps < 1) throw ValidationError("max-sweeps must be >= 1");
  if (!(monotone_slack >= 0.0)) throw ValidationError("monotone slack must be >= 0");
}

double update_zeta(std::span<const double> xi, std::span<const double> m2) {
  double shift = -INFINITY;
  for (std::size_t k = 0; k < xi.size(); ++k) shift = std::max(shift, xi[k] + 0.5 * m2[k]);
  double acc = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) acc += std::exp(xi[k] + 0.5 * m2[k] - shift);
  const double zeta = std::exp(shift) * acc;
  if (!std::isfinite(zeta) || !(zeta > 0.0)) {
    throw NumericError("zeta overflow (largest exponent " + std::to_string(shift) + ")");
  }
  return zeta;
}

void update_phi_shifted(std::span<const double> beta_row, std::span<const double> exp_xi,
                        std::span<double> out) {
  kernels::mul(beta_row, exp_xi, out);
  const double total = kernels::sum(out);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateWordError("word has zero probability under every topic");
  }
  kernels::scale(1.0 / total, out);
}

Vector update_phi(std::span<const double> beta_row, std::span<const double> xi) {
  const auto K = static_cast<Eigen::Index>(xi.size());
  Vector e(K);
  const double m = kernels::max(xi);
  for (Eigen::Index k = 0; k < K; ++k) e[k] = std::exp(xi[k] - m);
  Vector phi(K);
  update_phi_shifted(beta_row, as_span(e), as_span(phi));
  return phi;
}

Vector update_lambda(std::span<const Vector> xis, const Vector& mu) {
  Vector acc = mu;
  for (const auto& xi : xis) acc += xi;
  return acc / static_cast<double>(xis.size() + 1);
}

Vector update_v2(const Vector& sigma_inv_diag, std::size_t num_segments) {
  if (sigma_inv_diag.size() > 0 && !(sigma_inv_diag.minCoeff() > 0.0)) {
    throw NumericError("non-positive diagonal of Sigma^-1");
  }
  return (static_cast<double>(num_segments + 1) * sigma_inv_diag).cwiseInverse();
}

double xi_objective(const XiContext& ctx, const Vector& xi) {
  const Vector diff = xi - ctx.lambda;
  const double normalizer = (xi + 0.5 * ctx.m2).array().exp().sum();
  return -0.5 * diff.dot(ctx.sigma_inv * diff) + xi.dot(ctx.phi_sum) -
         ctx.num_words / ctx.zeta * normalizer;
}

Vector xi_gradient(const XiContext& ctx, const Vector& xi) {
  const Vector e = (xi + 0.5 * ctx.m2).array().exp().matrix();
  return -(ctx.sigma_inv * (xi - ctx.lambda)) + ctx.phi_sum - (ctx.num_words / ctx.zeta) * e;
}

Matrix xi_hessian(const XiContext& ctx, const Vector& xi) {
  const Vector e = (xi + 0.5 * ctx.m2).array().exp().matrix();
  Matrix h = -ctx.sigma_inv;
  h.diagonal() -= (ctx.num_words / ctx.zeta) * e;
  return h;
}

NewtonResult newton_xi(const XiContext& ctx, const Vector& xi0, double tol, int max_iter) {
  NewtonResult r{xi0, 0, false, 0.0};
  Vector g = xi_gradient(ctx, r.x);
  double f = xi_objective(ctx, r.x);
  for (; r.iterations < max_iter; ++r.iterations) {
    r.grad_norm = g.cwiseAbs().maxCoeff();
    if (r.grad_norm <= tol) {
      r.converged = true;
      return r;
    }
    // -H is symmetric positive definite.
    const Eigen::LLT<Matrix> llt(-xi_hessian(ctx, r.x));
    if (llt.info() != Eigen::Success) throw NumericError("xi Hessian is not negative definite");
    const Vector step = llt.solve(g);

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      Vector candidate = r.x + t * step;
      const double fc = xi_objective(ctx, candidate);
      const bool tie = std::abs(fc - f) <= 1e-14 * std::max(1.0, std::abs(f)) &&
                       xi_gradient(ctx, candidate).cwiseAbs().maxCoeff() < g.cwiseAbs().maxCoeff();
      if (std::isfinite(fc) && (fc >= f || tie)) {
        r.x = std::move(candidate);
        f = fc;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no representable ascent step left
    g = xi_gradient(ctx, r.x);
  }
  r.grad_norm = g.cwiseAbs().maxCoeff();
  r.converged = r.grad_norm <= tol;
  if (!r.x.allFinite()) throw NumericError("xi Newton produced non-finite values");
  return r;
}

namespace {

struct M2Coordinate {
  double sinv_kk;
  double rate;  // N / zeta
  double xi_k;

  double value(double m) const {
    return -0.5 * sinv_kk * m - rate * std::exp(xi_k + 0.5 * m) + 0.5 * std::log(m);
  }
  double gradient(double m) const {
    return -0.5 * sinv_kk - 0.5 * rate * std::exp(xi_k + 0.5 * m) + 0.5 / m;
  }
  double curvature(double m) const {
    return -0.25 * rate * std::exp(xi_k + 0.5 * m) - 0.5 / (m * m);
  }
};

}  // namespace

double m2_objective(const M2Context& ctx, const Vector& m2) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < m2.size(); ++k) {
    acc += M2Coordinate{ctx.sigma_inv_diag[k], ctx.num_words / ctx.zeta, ctx.xi[k]}.value(m2[k]);
  }
  return acc;
}

Vector m2_gradient(const M2Context& ctx, const Vector& m2) {
  Vector g(m2.size());
  for (Eigen::Index k = 0; k < m2.size(); ++k) {
    g[k] = M2Coordinate{ctx.sigma_inv_diag[k], ctx.num_words / ctx.zeta, ctx.xi[k]}.gradient(m2[k]);
  }
  return g;
}

Vector m2_second_derivative(const M2Context& ctx, const Vector& m2) {
  Vector h(m2.size());
  for (Eigen::Index k = 0; k < m2.size(); ++k) {
    h[k] = M2Coordinate{ctx.sigma_inv_diag[k], ctx.num_words / ctx.zeta, ctx.xi[k]}.curvature(m2[k]);
  }
  return h;
}

NewtonResult newton_m2(const M2Context& ctx, const Vector& m2_0, double tol, int max_iter) {
  if (m2_0.size() > 0 && !(m2_0.minCoeff() > 0.0)) throw ValidationError("m2 start must be > 0");
  NewtonResult r{m2_0, 0, true, 0.0};
  for (Eigen::Index k = 0; k < m2_0.size(); ++k) {
    const M2Coordinate c{ctx.sigma_inv_diag[k], ctx.num_words / ctx.zeta, ctx.xi[k]};
    double m = m2_0[k];
    double f = c.value(m);
    double g = c.gradient(m);
    int it = 0;
    for (; it < max_iter && std::abs(g) > tol; ++it) {
      double step = -g / c.curvature(m);
      while (m + step <= 0.0) step *= 0.5;
      bool accepted = false;
      for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
        const double candidate = m + step;
        const double fc = c.value(candidate);
        // Near the root the value changes by less than rounding, so a smaller
        // gradient also counts as progress.
        const bool tie = std::abs(fc - f) <= 1e-14 * std::max(1.0, std::abs(f)) &&
                         std::abs(c.gradient(candidate)) < std::abs(g);
        if (std::isfinite(fc) && (fc >= f || tie)) {
          m = candidate;
          f = fc;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      g = c.gradient(m);
    }
    if (!std::isfinite(m) || !(m > 0.0)) throw NumericError("m2 Newton left the positive half-line");
    r.x[k] = m;
    r.iterations = std::max(r.iterations, it);
    r.grad_norm = std::max(r.grad_norm, std::abs(g));
    r.converged = r.converged && std::abs(g) <= tol;
  }
  return r;
}

namespace {

// exp(xi - max xi), shared by every word of the segment.
Vector shifted_exp(const Vector& xi) {
  const double m = xi.maxCoeff();
  return (xi.array() - m).exp().matrix();
}

void refresh_phi(const ModelParams& params, const Segment& segment, const Vector& xi,
                 RowMatrix& phi, Vector& phi_sum) {
  const auto K = params.num_topics();
  const Vector e = shifted_exp(xi);
  const auto counts = segment.counts();
  phi.resize(static_cast<Eigen::Index>(counts.size()), K);
  phi_sum.setZero(K);
  for (std::size_t u = 0; u < counts.size(); ++u) {
    std::span<double> row(phi.data() + u * K, static_cast<std::size_t>(K));
    update_phi_shifted(params.beta_row(counts[u].word), as_span(e), row);
    kernels::axpy(static_cast<double>(counts[u].count), row, as_span(phi_sum));
  }
}

}  // namespace

DocumentState init_document_state(const ModelParams& params, const Document& doc) {
  const auto K = params.num_topics();
  DocumentState st;
  st.lambda = params.mu();
  st.v2 = update_v2(params.sigma_inv_diag(), doc.segments.size());
  st.segments.resize(doc.segments.size());
  Vector phi_sum(K);
  for (std::size_t s = 0; s < doc.segments.size(); ++s) {
    auto& seg = st.segments[s];
    seg.xi = params.mu();
    seg.m2 = Vector::Ones(K);
    seg.zeta = update_zeta(as_span(seg.xi), as_span(seg.m2));
    refresh_phi(params, doc.segments[s], seg.xi, seg.phi, phi_sum);
  }
  return st;
}

EStepResult estep_document(const ModelParams& params, const Document& doc, DocumentState state0,
                           const EStepSchedule& schedule) {
  validate_document_state(params, doc, state0);
  EStepResult out;
  out.state = std::move(state0);
  auto& st = out.state;
  const double initial = document_bound(params, doc, st);
  double bound = initial;
  Vector phi_sum(params.num_topics());
  std::vector<Vector> xis(doc.segments.size());

  for (out.sweeps = 1; out.sweeps <= schedule.max_sweeps; ++out.sweeps) {
    for (std::size_t s = 0; s < doc.segments.size(); ++s) {
      const auto& segment = doc.segments[s];
      auto& seg = st.segments[s];
      const double N = static_cast<double>(segment.size());

      seg.zeta = update_zeta(as_span(seg.xi), as_span(seg.m2));
      refresh_phi(params, segment, seg.xi, seg.phi, phi_sum);

      const XiContext xc{params.sigma_inv(), st.lambda, seg.m2, seg.zeta, N, phi_sum};
      auto xr = newton_xi(xc, seg.xi, schedule.newton_tol, schedule.newton_max_iter);
      if (!xr.converged) ++out.newton_warnings;
      seg.xi = std::move(xr.x);

      const M2Context mc{params.sigma_inv_diag(), seg.zeta, N, seg.xi};
      auto mr = newton_m2(mc, seg.m2, schedule.newton_tol, schedule.newton_max_iter);
      if (!mr.converged) ++out.newton_warnings;
      seg.m2 = std::move(mr.x);

      seg.zeta = update_zeta(as_span(seg.xi), as_span(seg.m2));
      xis[s] = seg.xi;
    }
    st.lambda = update_lambda(xis, params.mu());
    st.v2 = update_v2(params.sigma_inv_diag(), doc.segments.size());

    const double next = document_bound(params, doc, st);
    if (!std::isfinite(next)) {
      throw NumericError("document '" + doc.label + "': bound became non-finite in sweep " +
                         std::to_string(out.sweeps));
    }
    if (next < bound - schedule.monotone_slack * std::abs(bound)) {
      throw NumericError("document '" + doc.label + "': bound decreased in sweep " +
                         std::to_string(out.sweeps) + " from " + std::to_string(bound) + " to " +
                         std::to_string(next));
    }
    const double gain = next - bound;
    bound = next;
    if (gain < schedule.rel_tol * std::abs(bound)) {
      out.converged = true;
      break;
    }
  }
  if (out.sweeps > schedule.max_sweeps) out.sweeps = schedule.max_sweeps;
  out.bound = bound;
  out.bound_delta = bound - initial;
  return out;
}

}  // namespace mctm
