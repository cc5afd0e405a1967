#pragma once

// Data-parallel inner loops of the aggregation and analytics code.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, AVX2 (x86-64) and NEON (AArch64) variants. The variant is
// chosen once at runtime from the CPU's capabilities and can be overridden
// with the CONCORD_SIMD environment variable (scalar | avx2 | neon) or
// force_isa(). All variants produce bit-identical results: the integer kernels
// are exact, and the floating-point reductions use a fixed four-lane
// accumulation order that the scalar reference reproduces.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace concord::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  // In-place widest-path closure over a row-major n x n matrix:
  //   m[j][k] = max(m[j][k], min(m[j][i], m[i][k])) for every intermediate i.
  // The diagonal is zeroed on return.
  void (*widest_path)(int32_t* m, size_t n);
  // For one ballot: m[x][y] += 1 whenever position[x] < position[y].
  void (*accumulate_pairwise)(const int32_t* position, int32_t* m, size_t n);
  double (*dot)(const double* a, const double* b, size_t n);
  double (*squared_distance)(const double* a, const double* b, size_t n);
};

// Variants compiled into this binary and supported by the running CPU.
std::vector<Isa> available_isas();

// Table for a specific ISA; throws ValidationError if it is unavailable.
const KernelTable& table_for(Isa isa);

// Currently selected table.
const KernelTable& active();

void force_isa(Isa isa);

// Parses "scalar" / "avx2" / "neon" / "auto"; auto restores detection.
void select_isa(std::string_view name);

inline void widest_path(std::span<int32_t> m, size_t n) { active().widest_path(m.data(), n); }

inline void accumulate_pairwise(std::span<const int32_t> position, std::span<int32_t> m) {
  active().accumulate_pairwise(position.data(), m.data(), position.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

namespace detail {
extern const KernelTable kScalarTable;
#if defined(CONCORD_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(CONCORD_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace concord::kernels
