#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <new>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hartree {

using Complex = std::complex<double>;
using Vec3 = std::array<double, 3>;

// Error taxonomy. Callers map these onto exit codes in the runner.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Allocator returning 64-byte aligned storage so FFTW can use its SIMD
/// codelets on every buffer handed to a plan.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t count) {
        return static_cast<T*>(::operator new(count * sizeof(T), alignment));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using ComplexBuffer = std::vector<Complex, AlignedAllocator<Complex>>;
using RealBuffer = std::vector<double, AlignedAllocator<double>>;

// Warnings ---------------------------------------------------------------

using WarningSink = std::function<void(std::string_view category, std::string_view message)>;

/// Installs a sink for non-fatal diagnostics (containment etc.). Passing an
/// empty function restores the default stderr sink, which prints the first
/// few messages per category and then stays quiet. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view category, std::string_view message);

// Threading --------------------------------------------------------------

/// Worker count for orbital-parallel loops; read once from HARTREE_THREADS.
int thread_count();
void set_thread_count(int threads);

/// Runs body(i) for i in [0, count). Iterations must be independent.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace hartree
