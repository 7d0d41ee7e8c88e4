#include "evtriage/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "evtriage/error.hpp"

namespace evtriage::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void scale(double alpha, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= alpha;
}

}  // namespace scalar

// Defined in kernels_avx2.cpp / kernels_neon.cpp when those are compiled in.
#if defined(EVTRIAGE_HAVE_AVX2)
const KernelTable& avx2_table_unchecked();
#endif
#if defined(EVTRIAGE_HAVE_NEON)
const KernelTable& neon_table_unchecked();
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "?";
}

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::kScalar, scalar::dot, scalar::sum_squares, scalar::axpy,
                                 scalar::add, scalar::scale};
  return table;
}

const KernelTable* avx2_table() {
#if defined(EVTRIAGE_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return &avx2_table_unchecked();
#endif
  return nullptr;
}

const KernelTable* neon_table() {
#if defined(EVTRIAGE_HAVE_NEON)
  return &neon_table_unchecked();  // NEON is mandatory on aarch64
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("EVTRIAGE_ISA"); env && std::strcmp(env, "scalar") == 0) {
    return &scalar_table();
  }
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> s{detect()};
  return s;
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(ErrorKind::kDimensionMismatch, std::string(what) + ": length mismatch");
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

Isa active_isa() { return active().isa; }

bool force_isa(Isa isa) {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::kScalar: t = &scalar_table(); break;
    case Isa::kAvx2: t = avx2_table(); break;
    case Isa::kNeon: t = neon_table(); break;
  }
  if (!t) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size(), "dot");
  return active().dot(a.data(), b.data(), a.size());
}

double sum_squares(std::span<const double> a) { return active().sum_squares(a.data(), a.size()); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_sizes(x.size(), y.size(), "axpy");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void add(std::span<const double> x, std::span<double> y) {
  check_sizes(x.size(), y.size(), "add");
  active().add(x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> y) { active().scale(alpha, y.data(), y.size()); }

}  // namespace evtriage::kernels
