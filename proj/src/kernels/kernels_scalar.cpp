#include <limits>

#include "mctm/kernels.hpp"

namespace mctm::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double max_scalar(const double* a, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = a[i] > m ? a[i] : m;
  return m;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

constexpr KernelTable kScalar{Isa::Scalar, dot_scalar, sum_scalar,  max_scalar,
                              axpy_scalar, mul_scalar, scale_scalar};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace mctm::kernels
