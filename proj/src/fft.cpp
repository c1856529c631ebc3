#include "becfocus/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>
#include <vector>

namespace becfocus {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }
} // namespace

struct Fft3D::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  int alignment = 0;
};

Fft3D::Fft3D(int nx, int ny, int nz) : plans_(std::make_unique<Plans>()), size_(long(nx) * ny * nz) {
  if (nx <= 0 || ny <= 0 || nz <= 0) throw std::invalid_argument("FFT dimensions must be positive");
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* buf = static_cast<std::complex<double>*>(fftw_malloc(sizeof(std::complex<double>) * size_));
  plans_->alignment = fftw_alignment_of(reinterpret_cast<double*>(buf));
  plans_->forward = fftw_plan_dft_3d(nx, ny, nz, as_fftw(buf), as_fftw(buf), FFTW_FORWARD, FFTW_ESTIMATE);
  plans_->backward = fftw_plan_dft_3d(nx, ny, nz, as_fftw(buf), as_fftw(buf), FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_free(buf);
  if (!plans_->forward || !plans_->backward) throw std::runtime_error("FFTW planning failed");
}

Fft3D::~Fft3D() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

static void execute(fftw_plan plan, int alignment, std::complex<double>* data) {
  if (fftw_alignment_of(reinterpret_cast<double*>(data)) != alignment) {
    throw std::logic_error("FFT buffer alignment differs from the planned alignment");
  }
  fftw_execute_dft(plan, as_fftw(data), as_fftw(data));
}

void Fft3D::forward(std::complex<double>* data) const { execute(plans_->forward, plans_->alignment, data); }
void Fft3D::backward(std::complex<double>* data) const { execute(plans_->backward, plans_->alignment, data); }

} // namespace becfocus
