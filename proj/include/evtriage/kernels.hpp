#pragma once

// Dense double-precision kernels used by the embedding stub and the linear
// head. Each kernel has a portable scalar reference and, where the build
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant. The variant is
// picked once at first use from CPU feature detection; EVTRIAGE_ISA=scalar
// in the environment pins the reference path.
//
// Element-wise kernels (add, axpy, scale) are bit-identical across variants
// since no FMA is used. Reductions (dot, sum_squares) sum in lane order and
// may differ from the reference in the last few ulps.

#include <cstddef>
#include <span>
#include <string_view>

namespace evtriage::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_squares)(const double* a, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*add)(const double* x, double* y, std::size_t n);
  void (*scale)(double alpha, double* y, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();
const KernelTable* neon_table();

const KernelTable& active();
Isa active_isa();
// Test hook. Returns false when the requested variant is unavailable.
bool force_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double sum_squares(std::span<const double> a);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// y += x
void add(std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> y);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum_squares(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void add(const double* x, double* y, std::size_t n);
void scale(double alpha, double* y, std::size_t n);
}  // namespace scalar

}  // namespace evtriage::kernels
