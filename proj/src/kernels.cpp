#include <cstdlib>
#include <cstring>
#include <string>

#include "mixtrade/kernels.hpp"

namespace mixtrade::kernels {

namespace {

const Backend& pick() {
  const Backend* simd = avx2_backend();
  if (const char* env = std::getenv("MIXTRADE_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return scalar_backend();
    if (std::strcmp(env, "avx2") == 0 && simd != nullptr) return *simd;
    // Unknown value or unsupported request: fall through to autodetect.
  }
  return simd != nullptr ? *simd : scalar_backend();
}

}  // namespace

const Backend& active() {
  static const Backend& chosen = pick();
  return chosen;
}

std::string active_name() { return active().name; }

}  // namespace mixtrade::kernels
