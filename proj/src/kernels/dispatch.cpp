#include <atomic>
#include <cstdlib>
#include <string>

#include "concord/core/error.hpp"
#include "concord/kernels/kernels.hpp"

namespace concord::kernels {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(CONCORD_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
#if defined(CONCORD_HAVE_NEON)
      return true;  // mandatory on AArch64
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* detect() {
  if (const char* env = std::getenv("CONCORD_SIMD"); env != nullptr && *env != '\0') {
    std::string_view name(env);
    if (name == "scalar") return &detail::kScalarTable;
    if (name == "avx2" && cpu_supports(Isa::avx2)) return &table_for(Isa::avx2);
    if (name == "neon" && cpu_supports(Isa::neon)) return &table_for(Isa::neon);
  }
  if (cpu_supports(Isa::avx2)) return &table_for(Isa::avx2);
  if (cpu_supports(Isa::neon)) return &table_for(Isa::neon);
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (cpu_supports(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& table_for(Isa isa) {
  if (!cpu_supports(isa)) {
    throw ValidationError("SIMD variant '" + std::string(to_string(isa)) +
                          "' is not available on this CPU/build");
  }
  switch (isa) {
#if defined(CONCORD_HAVE_AVX2)
    case Isa::avx2: return detail::kAvx2Table;
#endif
#if defined(CONCORD_HAVE_NEON)
    case Isa::neon: return detail::kNeonTable;
#endif
    default: return detail::kScalarTable;
  }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void force_isa(Isa isa) { current().store(&table_for(isa), std::memory_order_release); }

void select_isa(std::string_view name) {
  if (name == "auto") {
    current().store(detect(), std::memory_order_release);
  } else if (name == "scalar") {
    force_isa(Isa::scalar);
  } else if (name == "avx2") {
    force_isa(Isa::avx2);
  } else if (name == "neon") {
    force_isa(Isa::neon);
  } else {
    throw ValidationError("unknown SIMD variant '" + std::string(name) + "'");
  }
}

}  // namespace concord::kernels
