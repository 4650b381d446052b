#pragma once

#include <fftw3.h>

#include <array>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <new>
#include <span>
#include <stdexcept>
#include <tuple>

namespace besselmp::detail {

/// Owning buffer allocated with fftw_malloc so every execute call sees the
/// same alignment as the array the plan was created on.
template <class T>
class FftwBuffer {
public:
  explicit FftwBuffer(std::size_t count)
      : size_(count), data_(static_cast<T*>(fftw_malloc(sizeof(T) * (count == 0 ? 1 : count)))) {
    if (data_ == nullptr) throw std::bad_alloc();
    for (std::size_t i = 0; i < size_; ++i) new (data_ + i) T{};
  }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  ~FftwBuffer() { fftw_free(data_); }

  T* data() { return data_; }
  const T* data() const { return data_; }
  std::size_t size() const { return size_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  std::span<T> span() { return {data_, size_}; }

private:
  std::size_t size_;
  T* data_;
};

using ComplexBuffer = FftwBuffer<std::complex<double>>;
using RealBuffer = FftwBuffer<double>;

inline fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

enum class FftKind { forward, backward, real_to_complex, complex_to_real };

/// Process-wide plan cache. Planning goes through a mutex (FFTW's planner is
/// not reentrant); execution uses the new-array interface, which is.
class PlanCache {
public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(FftKind kind, int dim, int n) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_tuple(static_cast<int>(kind), dim, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    std::array<int, 3> dims{n, n, n};
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
    const std::size_t half = total / static_cast<std::size_t>(n) * (static_cast<std::size_t>(n) / 2 + 1);

    fftw_plan plan = nullptr;
    switch (kind) {
      case FftKind::forward:
      case FftKind::backward: {
        ComplexBuffer in(total), out(total);
        plan = fftw_plan_dft(dim, dims.data(), as_fftw(in.data()), as_fftw(out.data()),
                             kind == FftKind::forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
        break;
      }
      case FftKind::real_to_complex: {
        RealBuffer in(total);
        ComplexBuffer out(half);
        plan = fftw_plan_dft_r2c(dim, dims.data(), in.data(), as_fftw(out.data()), FFTW_ESTIMATE);
        break;
      }
      case FftKind::complex_to_real: {
        ComplexBuffer in(half);
        RealBuffer out(total);
        plan = fftw_plan_dft_c2r(dim, dims.data(), as_fftw(in.data()), out.data(), FFTW_ESTIMATE);
        break;
      }
    }
    if (plan == nullptr) throw std::runtime_error("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

}  // namespace besselmp::detail
