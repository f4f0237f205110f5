#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace eegvad {

// Selects the serial reference kernel or its OpenMP counterpart. Both
// produce bit-identical results; the serial path is kept for testing and
// benchmarking.
enum class Exec { serial, parallel };

// body(i) for i in [0, n), dynamically scheduled when parallel. An exception
// must not leave an OpenMP region, so each one is held and the one from the
// lowest failing index is rethrown after the loop.
template <class F>
void for_each_index(std::ptrdiff_t n, Exec exec, F&& body) {
  if (exec == Exec::serial || n < 2) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace eegvad
