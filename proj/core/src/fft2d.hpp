#pragma once

#include <complex>
#include <vector>

namespace treg::detail {

using Complex = std::complex<double>;

// Unnormalised 2-D DFT of a fixed size. Plans are built once (under a global
// lock) and only executed afterwards, so an instance is safe to share.
class Fft2d {
 public:
  Fft2d(int rows, int cols);
  ~Fft2d();
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }

  // sum_n x[n] exp(-2 pi i k.n / N)
  std::vector<Complex> forward(const std::vector<Complex>& in) const;
  // sum_k X[k] exp(+2 pi i k.n / N), no 1/N factor
  std::vector<Complex> backward(const std::vector<Complex>& in) const;

 private:
  std::vector<Complex> run(void* plan, const std::vector<Complex>& in) const;

  int rows_;
  int cols_;
  void* forward_plan_ = nullptr;
  void* backward_plan_ = nullptr;
};

}  // namespace treg::detail
