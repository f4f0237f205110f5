#include "eegvad/spectrum.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

namespace eegvad {

namespace {

// FFTW planning is not thread-safe; execution through the new-array
// interface is. Plans live for the process lifetime.
struct Plan {
  fftw_plan plan = nullptr;
};

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan plan_for(std::size_t n) {
  static std::map<std::size_t, Plan> plans;
  std::lock_guard lock(plan_mutex());
  auto it = plans.find(n);
  if (it != plans.end()) return it->second.plan;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  plans.emplace(n, Plan{p});
  return p;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

void power_spectrum(std::span<const double> input, std::size_t fft_size,
                    std::vector<double>& out) {
  const fftw_plan plan = plan_for(fft_size);
  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(fft_size));
  std::unique_ptr<fftw_complex, FftwDeleter> spec(fftw_alloc_complex(fft_size / 2 + 1));
  const std::size_t n = std::min(input.size(), fft_size);
  std::copy_n(input.begin(), n, in.get());
  std::fill(in.get() + n, in.get() + fft_size, 0.0);
  fftw_execute_dft_r2c(plan, in.get(), spec.get());
  out.resize(fft_size / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const fftw_complex& c = spec.get()[k];
    out[k] = c[0] * c[0] + c[1] * c[1];
  }
}

}  // namespace eegvad
