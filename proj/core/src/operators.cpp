#include "treg/operators.hpp"

#include "fft2d.hpp"
#include "treg/errors.hpp"
#include "treg/rng.hpp"

#include <cmath>
#include <sstream>

namespace treg {

using detail::Complex;
using detail::Fft2d;

struct ForwardOperator::Impl {
  virtual ~Impl() = default;
  virtual OperatorKind kind() const = 0;
  virtual int out_dim() const = 0;
  virtual bool linear() const { return true; }
  virtual std::string id() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector adjoint(const Vector& y) const = 0;

  virtual Vector residual_gradient(const Vector& x, const Vector& y) const {
    return 2.0 * adjoint(apply(x) - y);
  }

  ImageShape shape;
};

namespace {

void check_input(const ForwardOperator::Impl& op, const Vector& x) {
  if (x.size() != op.shape.size())
    throw ShapeError("operator input has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(op.shape.size()));
}

void check_output(const ForwardOperator::Impl& op, const Vector& y) {
  if (y.size() != op.out_dim())
    throw ShapeError("measurement has " + std::to_string(y.size()) + " entries, expected " +
                     std::to_string(op.out_dim()));
}

struct Downsample final : ForwardOperator::Impl {
  int factor;

  OperatorKind kind() const override { return OperatorKind::Downsample; }
  int out_dim() const override { return (shape.height / factor) * (shape.width / factor); }
  std::string id() const override { return "downsample(f=" + std::to_string(factor) + ")@" + shape.str(); }

  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    const int oh = shape.height / factor, ow = shape.width / factor;
    const double scale = 1.0 / (factor * factor);
    Vector y = Vector::Zero(oh * ow);
    for (int r = 0; r < shape.height; ++r)
      for (int c = 0; c < shape.width; ++c) y[(r / factor) * ow + c / factor] += x[r * shape.width + c];
    return y * scale;
  }

  Vector adjoint(const Vector& y) const override {
    check_output(*this, y);
    const int ow = shape.width / factor;
    const double scale = 1.0 / (factor * factor);
    Vector x(shape.size());
    for (int r = 0; r < shape.height; ++r)
      for (int c = 0; c < shape.width; ++c) x[r * shape.width + c] = scale * y[(r / factor) * ow + c / factor];
    return x;
  }
};

struct GaussianBlur final : ForwardOperator::Impl {
  int kernel_size = 0;
  double sigma = 0.0;
  std::unique_ptr<Fft2d> fft;
  std::vector<Complex> transfer;  // DFT of the wrapped kernel

  OperatorKind kind() const override { return OperatorKind::GaussianBlur; }
  int out_dim() const override { return shape.size(); }
  std::string id() const override {
    std::ostringstream os;
    os << "blur(k=" << kernel_size << ",sigma=" << sigma << ")@" << shape.str();
    return os.str();
  }

  Vector filter(const Vector& x, bool conjugate) const {
    std::vector<Complex> buf(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) buf[i] = x[i];
    auto spec = fft->forward(buf);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= conjugate ? std::conj(transfer[i]) : transfer[i];
    const auto back = fft->backward(spec);
    Vector out(x.size());
    const double inv_n = 1.0 / static_cast<double>(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = back[i].real() * inv_n;
    return out;
  }

  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    return filter(x, false);
  }

  Vector adjoint(const Vector& y) const override {
    check_output(*this, y);
    return filter(y, true);
  }
};

struct BoxInpaint final : ForwardOperator::Impl {
  Vector mask;

  OperatorKind kind() const override { return OperatorKind::BoxInpaint; }
  int out_dim() const override { return shape.size(); }
  std::string id() const override {
    return "inpaint(kept=" + std::to_string(static_cast<int>(mask.sum())) + ")@" + shape.str();
  }
  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    return mask.cwiseProduct(x);
  }
  Vector adjoint(const Vector& y) const override {
    check_output(*this, y);
    return mask.cwiseProduct(y);
  }
};

struct PhaseRetrieval final : ForwardOperator::Impl {
  int pad = 0;
  std::unique_ptr<Fft2d> fft;

  int padded_rows() const { return shape.height + 2 * pad; }
  int padded_cols() const { return shape.width + 2 * pad; }

  OperatorKind kind() const override { return OperatorKind::PhaseRetrieval; }
  int out_dim() const override { return padded_rows() * padded_cols(); }
  bool linear() const override { return false; }
  std::string id() const override { return "phase(pad=" + std::to_string(pad) + ")@" + shape.str(); }

  std::vector<Complex> spectrum(const Vector& x) const {
    std::vector<Complex> buf(out_dim(), Complex(0.0, 0.0));
    for (int r = 0; r < shape.height; ++r)
      for (int c = 0; c < shape.width; ++c)
        buf[(r + pad) * padded_cols() + (c + pad)] = x[r * shape.width + c];
    return fft->forward(buf);
  }

  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    const auto spec = spectrum(x);
    Vector y(out_dim());
    for (int i = 0; i < out_dim(); ++i) y[i] = std::abs(spec[i]);
    return y;
  }

  Vector adjoint(const Vector&) const override {
    throw UnsupportedOperator("phase retrieval is nonlinear and has no adjoint");
  }

  Vector residual_gradient(const Vector& x, const Vector& y) const override {
    check_input(*this, x);
    check_output(*this, y);
    auto spec = spectrum(x);
    // d|X_k|/dx = Re(conj(u_k) F_k P) with u_k = X_k / |X_k|
    for (int i = 0; i < out_dim(); ++i) {
      const double mag = std::abs(spec[i]);
      spec[i] = mag > 0.0 ? (mag - y[i]) * (spec[i] / mag) : Complex(0.0, 0.0);
    }
    const auto back = fft->backward(spec);
    Vector g(shape.size());
    for (int r = 0; r < shape.height; ++r)
      for (int c = 0; c < shape.width; ++c)
        g[r * shape.width + c] = 2.0 * back[(r + pad) * padded_cols() + (c + pad)].real();
    return g;
  }
};

void check_shape(ImageShape shape) {
  if (shape.height < 1 || shape.width < 1) throw ConfigError("image.height and image.width must be >= 1");
}

}  // namespace

ForwardOperator ForwardOperator::downsample(ImageShape shape, int factor) {
  check_shape(shape);
  if (factor < 1) throw ConfigError("operator.factor must be >= 1");
  if (shape.height % factor != 0 || shape.width % factor != 0)
    throw ConfigError("operator.factor must divide the image height and width");
  auto impl = std::make_shared<Downsample>();
  impl->shape = shape;
  impl->factor = factor;
  return ForwardOperator(std::move(impl));
}

ForwardOperator ForwardOperator::gaussian_blur(ImageShape shape, int kernel_size, double sigma) {
  check_shape(shape);
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("operator.kernel_size must be odd and >= 1");
  if (kernel_size > std::min(shape.height, shape.width))
    throw ConfigError("operator.kernel_size exceeds the image size");
  if (!(sigma > 0.0)) throw ConfigError("operator.sigma must be > 0");

  auto impl = std::make_shared<GaussianBlur>();
  impl->shape = shape;
  impl->kernel_size = kernel_size;
  impl->sigma = sigma;
  impl->fft = std::make_unique<Fft2d>(shape.height, shape.width);

  const int radius = kernel_size / 2;
  std::vector<double> taps(kernel_size);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  for (double a : taps)
    for (double b : taps) total += a * b;

  // kernel centred on pixel (0, 0) with circular wrap
  std::vector<Complex> kernel(shape.size(), Complex(0.0, 0.0));
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      const int r = (dr + shape.height) % shape.height;
      const int c = (dc + shape.width) % shape.width;
      kernel[r * shape.width + c] += taps[dr + radius] * taps[dc + radius] / total;
    }
  }
  impl->transfer = impl->fft->forward(kernel);
  return ForwardOperator(std::move(impl));
}

ForwardOperator ForwardOperator::box_inpaint(ImageShape shape, std::vector<std::uint8_t> mask) {
  check_shape(shape);
  if (static_cast<int>(mask.size()) != shape.size())
    throw ConfigError("operator.mask has " + std::to_string(mask.size()) + " entries, expected " +
                      std::to_string(shape.size()));
  auto impl = std::make_shared<BoxInpaint>();
  impl->shape = shape;
  impl->mask.resize(shape.size());
  for (int i = 0; i < shape.size(); ++i) {
    if (mask[i] > 1) throw ConfigError("operator.mask entries must be 0 or 1");
    impl->mask[i] = mask[i];
  }
  return ForwardOperator(std::move(impl));
}

ForwardOperator ForwardOperator::phase_retrieval(ImageShape shape, int pad) {
  check_shape(shape);
  if (pad < 0) throw ConfigError("operator.pad must be >= 0");
  auto impl = std::make_shared<PhaseRetrieval>();
  impl->shape = shape;
  impl->pad = pad;
  impl->fft = std::make_unique<Fft2d>(shape.height + 2 * pad, shape.width + 2 * pad);
  return ForwardOperator(std::move(impl));
}

OperatorKind ForwardOperator::kind() const { return impl_->kind(); }
ImageShape ForwardOperator::in_shape() const { return impl_->shape; }
int ForwardOperator::out_dim() const { return impl_->out_dim(); }
bool ForwardOperator::is_linear() const { return impl_->linear(); }
std::string ForwardOperator::id() const { return impl_->id(); }
Vector ForwardOperator::apply(const Vector& x) const { return impl_->apply(x); }

Vector ForwardOperator::adjoint(const Vector& y) const {
  if (!impl_->linear()) throw UnsupportedOperator(impl_->id() + " has no adjoint");
  return impl_->adjoint(y);
}

Vector ForwardOperator::residual_gradient(const Vector& x, const Vector& y) const {
  check_input(*impl_, x);
  check_output(*impl_, y);
  return impl_->residual_gradient(x, y);
}

std::vector<std::uint8_t> box_mask(ImageShape shape, int row0, int col0, int row1, int col1) {
  std::vector<std::uint8_t> mask(shape.size(), 1);
  for (int r = std::max(0, row0); r < std::min(shape.height, row1); ++r)
    for (int c = std::max(0, col0); c < std::min(shape.width, col1); ++c) mask[r * shape.width + c] = 0;
  return mask;
}

double data_residual(const ForwardOperator& op, const Vector& x, const Vector& y) {
  if (y.size() != op.out_dim()) throw ShapeError("measurement dimension mismatch");
  return (y - op.apply(x)).squaredNorm();
}

Measurement simulate_measurement(const ForwardOperator& op, const Vector& x_true, double sigma0,
                                 std::uint64_t seed) {
  if (!(sigma0 >= 0.0)) throw ConfigError("measurement.sigma0 must be >= 0");
  Measurement m;
  m.y = op.apply(x_true);
  if (sigma0 > 0.0) {
    Rng rng(seed, 0x5EA5);
    m.y += sigma0 * rng.normal_vector(m.y.size());
  }
  m.sigma0 = sigma0;
  m.op_id = op.id();
  m.seed = seed;
  return m;
}

Vector flip180(const Vector& image) { return image.reverse(); }

}  // namespace treg
