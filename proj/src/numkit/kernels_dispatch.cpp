// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <string_view>

#include "cad/numkit/kernels.hpp"

namespace cad::numkit::kernels {

const KernelTable* avx2_table_unchecked();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& choose() {
  const KernelTable* wide = avx2();
  if (const char* env = std::getenv("CAD_KERNELS")) {
    std::string_view want(env);
    if (want == "scalar") return scalar();
    if (want == "avx2" && wide) return *wide;
  }
  return wide ? *wide : scalar();
}

}  // namespace

const KernelTable* avx2() {
  static const KernelTable* table = cpu_has_avx2() ? avx2_table_unchecked() : nullptr;
  return table;
}

const KernelTable& active() {
  static const KernelTable& table = choose();
  return table;
}

}  // namespace cad::numkit::kernels
