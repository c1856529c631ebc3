#pragma once

#include <complex>
#include <memory>

namespace becfocus {

/// In-place complex 3D FFT on row-major (z fastest) arrays, unnormalised.
///
/// Plans are created once with FFTW_ESTIMATE so results do not depend on
/// timing-based planner choices. Executing is thread-safe; planning is
/// serialised internally.
class Fft3D {
public:
  Fft3D(int nx, int ny, int nz);
  ~Fft3D();
  Fft3D(const Fft3D&) = delete;
  Fft3D& operator=(const Fft3D&) = delete;

  void forward(std::complex<double>* data) const;
  void backward(std::complex<double>* data) const;
  long size() const { return size_; }

private:
  struct Plans;
  std::unique_ptr<Plans> plans_;
  long size_;
};

} // namespace becfocus
