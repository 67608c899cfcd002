#include "fft2d.hpp"

#include "treg/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

namespace treg::detail {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// fftw_malloc'd scratch; new-array execution requires planner-compatible alignment.
struct Buffer {
  explicit Buffer(int n) : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw std::bad_alloc();
  }
  ~Buffer() { fftw_free(data); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  fftw_complex* data;
};

}  // namespace

Fft2d::Fft2d(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw ShapeError("fft: empty grid");
  Buffer in(size());
  Buffer out(size());
  std::lock_guard lock(planner_mutex());
  // FFTW_ESTIMATE keeps the chosen algorithm (and thus the bits) independent of timing.
  forward_plan_ = fftw_plan_dft_2d(rows, cols, in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
  backward_plan_ = fftw_plan_dft_2d(rows, cols, in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!forward_plan_ || !backward_plan_) throw Error("fftw planning failed");
}

Fft2d::~Fft2d() {
  std::lock_guard lock(planner_mutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (backward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
}

std::vector<Complex> Fft2d::run(void* plan, const std::vector<Complex>& in) const {
  if (static_cast<int>(in.size()) != size()) throw ShapeError("fft: input size mismatch");
  Buffer src(size());
  Buffer dst(size());
  std::memcpy(src.data, in.data(), sizeof(fftw_complex) * size());
  fftw_execute_dft(static_cast<fftw_plan>(plan), src.data, dst.data);
  std::vector<Complex> out(size());
  std::memcpy(static_cast<void*>(out.data()), dst.data, sizeof(fftw_complex) * size());
  return out;
}

std::vector<Complex> Fft2d::forward(const std::vector<Complex>& in) const { return run(forward_plan_, in); }

std::vector<Complex> Fft2d::backward(const std::vector<Complex>& in) const { return run(backward_plan_, in); }

}  // namespace treg::detail
