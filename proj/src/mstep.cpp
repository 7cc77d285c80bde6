#include "mctm/mstep.hpp"

#include <Eigen/Eigenvalues>

#include "mctm/error.hpp"
#include "mctm/kernels.hpp"

namespace mctm {

BetaUpdate mstep_beta(const Corpus& corpus, const VarState& state, int num_topics) {
  const auto W = static_cast<Eigen::Index>(corpus.vocabulary.size());
  const Eigen::Index K = num_topics;
  if (state.documents.size() != corpus.documents.size()) {
    throw ValidationError("state does not match corpus");
  }
  RowMatrix acc = RowMatrix::Zero(W, K);
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& doc = corpus.documents[d];
    for (std::size_t s = 0; s < doc.segments.size(); ++s) {
      const auto counts = doc.segments[s].counts();
      const auto& phi = state.documents[d].segments[s].phi;
      if (phi.rows() != static_cast<Eigen::Index>(counts.size()) || phi.cols() != K) {
        throw ValidationError("phi shape does not match segment");
      }
      for (std::size_t u = 0; u < counts.size(); ++u) {
        kernels::axpy(static_cast<double>(counts[u].count),
                      {phi.data() + u * K, static_cast<std::size_t>(K)},
                      {acc.data() + counts[u].word * K, static_cast<std::size_t>(K)});
      }
    }
  }

  BetaUpdate out;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(acc.col(k).sum() > 0.0)) {
      out.degenerate_topics.push_back(static_cast<int>(k));
      acc.col(k).setConstant(1.0);
    }
  }
  acc = acc.cwiseMax(kBetaFloor);
  for (Eigen::Index k = 0; k < K; ++k) acc.col(k) /= acc.col(k).sum();
  out.beta = std::move(acc);
  return out;
}

Vector mstep_mu(std::span<const Vector> lambdas) {
  if (lambdas.empty()) throw ValidationError("mu update needs at least one document");
  Vector acc = Vector::Zero(lambdas.front().size());
  for (const auto& l : lambdas) acc += l;
  return acc / static_cast<double>(lambdas.size());
}

Vector mstep_mu(const VarState& state) {
  std::vector<Vector> lambdas;
  lambdas.reserve(state.documents.size());
  for (const auto& d : state.documents) lambdas.push_back(d.lambda);
  return mstep_mu(lambdas);
}

SigmaUpdate mstep_sigma(const VarState& state, const Vector& mu) {
  const auto K = mu.size();
  Matrix acc = Matrix::Zero(K, K);
  std::size_t terms = 0;
  for (const auto& d : state.documents) {
    acc.diagonal() += d.v2;
    const Vector dl = d.lambda - mu;
    acc.noalias() += dl * dl.transpose();
    ++terms;
    for (const auto& s : d.segments) {
      acc.diagonal() += d.v2 + s.m2;
      const Vector ds = s.xi - d.lambda;
      acc.noalias() += ds * ds.transpose();
      ++terms;
    }
  }
  if (terms == 0) throw ValidationError("Sigma update needs at least one document");
  acc /= static_cast<double>(terms);
  SigmaUpdate out;
  out.sigma = 0.5 * (acc + acc.transpose());
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(out.sigma, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < kSigmaMinEigen) {
    out.sigma.diagonal().array() += kSigmaRidge;
    out.ridged = true;
  }
  return out;
}

MStepReport mstep(ModelParams& params, const Corpus& corpus, const VarState& state) {
  MStepReport report;
  auto b = mstep_beta(corpus, state, params.num_topics());
  report.degenerate_topics = std::move(b.degenerate_topics);
  params.set_beta(std::move(b.beta));
  params.set_mu(mstep_mu(state));
  auto s = mstep_sigma(state, params.mu());
  report.sigma_ridged = s.ridged;
  params.set_sigma(std::move(s.sigma));
  return report;
}

}  // namespace mctm
