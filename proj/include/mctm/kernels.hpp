#pragma once

// Dense vector kernels used by the inner loops of inference and evaluation.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2/FMA
// variant is compiled into a separate translation unit and selected at runtime
// when the CPU supports it. Set MCTM_SIMD=scalar to force the reference path.
// The two paths agree up to floating-point reassociation of reductions.

#include <cstddef>
#include <span>
#include <string_view>

namespace mctm::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*max)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a * b (elementwise)
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table() noexcept;

/// Whether the running CPU can execute the AVX2/FMA variant.
bool cpu_supports_avx2() noexcept;

/// Table used by the inline wrappers below.
const KernelTable& active() noexcept;
Isa active_isa() noexcept;
std::string_view isa_name(Isa isa) noexcept;

/// Overrides runtime selection. Returns false (and keeps the current table)
/// if the requested variant is unavailable on this build or CPU.
bool select(Isa isa) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }
inline double max(std::span<const double> a) { return active().max(a.data(), a.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void mul(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  active().mul(a.data(), b.data(), out.data(), a.size());
}
inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

}  // namespace mctm::kernels
