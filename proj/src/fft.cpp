#include "dpa/fft.hpp"

#include <unsupported/Eigen/FFT>

#include <map>
#include <mutex>
#include <stdexcept>

namespace dpa {

struct FourierTransform::Impl {
  mutable Eigen::FFT<double> fft;
  mutable std::mutex mutex;
};

FourierTransform::FourierTransform(int n, int dim) : n_(n), dim_(dim), impl_(std::make_unique<Impl>()) {
  if (n < 1 || dim < 1 || dim > 3) throw std::invalid_argument("FourierTransform: bad grid");
  size_ = 1;
  for (int a = 0; a < dim; ++a) size_ *= n;
  impl_->fft.SetFlag(Eigen::FFT<double>::Unscaled);
}

FourierTransform::~FourierTransform() = default;

void FourierTransform::transform(std::vector<Complex>& data, bool inverse) const {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  std::vector<Complex> line(n_), out(n_);
  Eigen::Index stride = 1;
  for (int axis = dim_ - 1; axis >= 0; --axis) {
    Eigen::Index block = stride * n_;
    for (Eigen::Index base = 0; base < size_; base += block) {
      for (Eigen::Index off = 0; off < stride; ++off) {
        for (int k = 0; k < n_; ++k) line[k] = data[base + off + k * stride];
        if (inverse)
          impl_->fft.inv(out, line);
        else
          impl_->fft.fwd(out, line);
        for (int k = 0; k < n_; ++k) data[base + off + k * stride] = out[k];
      }
    }
    stride = block;
  }
}

ComplexVector FourierTransform::forward(const Eigen::VectorXd& values) const {
  if (values.size() != size_) throw std::invalid_argument("forward: size mismatch");
  std::vector<Complex> data(values.data(), values.data() + size_);
  transform(data, false);
  return Eigen::Map<ComplexVector>(data.data(), size_);
}

ComplexVector FourierTransform::forward(const ComplexVector& values) const {
  if (values.size() != size_) throw std::invalid_argument("forward: size mismatch");
  std::vector<Complex> data(values.data(), values.data() + size_);
  transform(data, false);
  return Eigen::Map<ComplexVector>(data.data(), size_);
}

ComplexVector FourierTransform::inverse(const ComplexVector& spectrum) const {
  if (spectrum.size() != size_) throw std::invalid_argument("inverse: size mismatch");
  std::vector<Complex> data(spectrum.data(), spectrum.data() + size_);
  transform(data, true);
  ComplexVector out = Eigen::Map<ComplexVector>(data.data(), size_);
  out /= static_cast<double>(size_);
  return out;
}

Eigen::VectorXd FourierTransform::inverse_real(const ComplexVector& spectrum) const {
  return inverse(spectrum).real();
}

int FourierTransform::frequency(Eigen::Index flat, int axis) const {
  Eigen::Index stride = 1;
  for (int a = dim_ - 1; a > axis; --a) stride *= n_;
  int k = static_cast<int>((flat / stride) % n_);
  return signed_frequency(k, n_);
}

bool FourierTransform::is_nyquist(Eigen::Index flat, int axis) const {
  return n_ % 2 == 0 && frequency(flat, axis) == n_ / 2;
}

const FourierTransform& fourier(int n, int dim) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<FourierTransform>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n, dim}];
  if (!slot) slot = std::make_unique<FourierTransform>(n, dim);
  return *slot;
}

}  // namespace dpa
