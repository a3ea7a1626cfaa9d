#include <cstdlib>
#include <string>

#include "geostory/error.hpp"
#include "geostory/simd/kernels.hpp"

namespace geostory::simd {

#ifndef GEOSTORY_HAVE_AVX2
const Kernels* avx2_kernels() noexcept { return nullptr; }
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(GEOSTORY_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return avx2_kernels() != nullptr && __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const Kernels& kernels_for(Isa isa) {
  if (!cpu_supports(isa)) {
    throw Error(ErrorKind::Configuration,
                "kernel variant '" + std::string(to_string(isa)) + "' is not available here");
  }
  return isa == Isa::Avx2 ? *avx2_kernels() : scalar_kernels();
}

namespace {

const Kernels& resolve() {
  if (const char* forced = std::getenv("GEOSTORY_SIMD")) {
    const std::string name(forced);
    if (name == "scalar") return scalar_kernels();
    if (name == "avx2") return kernels_for(Isa::Avx2);
    throw Error(ErrorKind::Configuration, "GEOSTORY_SIMD must be 'scalar' or 'avx2', got '" + name + "'");
  }
  if (cpu_supports(Isa::Avx2)) return *avx2_kernels();
  return scalar_kernels();
}

}  // namespace

const Kernels& active_kernels() {
  static const Kernels& table = resolve();
  return table;
}

}  // namespace geostory::simd
