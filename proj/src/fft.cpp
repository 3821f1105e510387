#include "hartree/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace hartree::fft {

namespace {

enum class Kind {
    forward,
    backward,
    forward_real,
    backward_real,
    cosine1,
    // Pruned passes on an n^3 box with an m^3 corner (n*n*(n/2+1) spectrum).
    corner_r2c_last,
    corner_fwd_middle,
    fwd_first,
    bwd_first,
    corner_bwd_middle,
    corner_c2r_last,
};

struct PlanCache {
    std::mutex mutex;
    std::map<std::tuple<Kind, int, int>, fftw_plan> plans;
    Effort effort = Effort::estimate;

    ~PlanCache() {
        for (auto& [key, plan] : plans) fftw_destroy_plan(plan);
    }
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

unsigned planner_flags(Effort e) { return e == Effort::measure ? FFTW_MEASURE : FFTW_ESTIMATE; }

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

fftw_iodim dim(int n, int stride) { return fftw_iodim{n, stride, stride}; }

fftw_plan make_corner_plan(Kind kind, int n, int m, unsigned flags) {
    const int h = n / 2 + 1;
    ComplexBuffer spectrum(half_spectrum_size(n));
    RealBuffer real(static_cast<std::size_t>(n) * n * n);
    fftw_complex* z = as_fftw(spectrum.data());
    const int sign = kind == Kind::fwd_first || kind == Kind::corner_fwd_middle ? FFTW_FORWARD : FFTW_BACKWARD;
    switch (kind) {
        case Kind::corner_r2c_last:
        case Kind::corner_c2r_last: {
            const fftw_iodim line{n, 1, 1};
            if (kind == Kind::corner_r2c_last) {
                const fftw_iodim loops[2] = {{m, n * n, n * h}, {m, n, h}};
                return fftw_plan_guru_dft_r2c(1, &line, 2, loops, real.data(), z, flags);
            }
            const fftw_iodim loops[2] = {{m, n * h, n * n}, {m, h, n}};
            return fftw_plan_guru_dft_c2r(1, &line, 2, loops, z, real.data(), flags);
        }
        case Kind::corner_fwd_middle:
        case Kind::corner_bwd_middle: {
            const fftw_iodim line = dim(n, h);
            const fftw_iodim loops[2] = {dim(m, n * h), dim(h, 1)};
            return fftw_plan_guru_dft(1, &line, 2, loops, z, z, sign, flags);
        }
        case Kind::fwd_first:
        case Kind::bwd_first: {
            const fftw_iodim line = dim(n, n * h);
            const fftw_iodim loop = dim(n * h, 1);
            return fftw_plan_guru_dft(1, &line, 1, &loop, z, z, sign, flags);
        }
        default:
            return nullptr;
    }
}

fftw_plan make_plan(Kind kind, int n, int m, unsigned flags) {
    if (m > 0) return make_corner_plan(kind, n, m, flags);
    const std::size_t total = static_cast<std::size_t>(n) * n * n;
    fftw_plan plan = nullptr;
    switch (kind) {
        case Kind::forward:
        case Kind::backward: {
            ComplexBuffer scratch(total);
            plan = fftw_plan_dft_3d(n, n, n, as_fftw(scratch.data()), as_fftw(scratch.data()),
                                    kind == Kind::forward ? FFTW_FORWARD : FFTW_BACKWARD, flags);
            break;
        }
        case Kind::forward_real: {
            RealBuffer in(total);
            ComplexBuffer out(half_spectrum_size(n));
            plan = fftw_plan_dft_r2c_3d(n, n, n, in.data(), as_fftw(out.data()), flags);
            break;
        }
        case Kind::backward_real: {
            ComplexBuffer in(half_spectrum_size(n));
            RealBuffer out(total);
            plan = fftw_plan_dft_c2r_3d(n, n, n, as_fftw(in.data()), out.data(), flags);
            break;
        }
        case Kind::cosine1: {
            RealBuffer scratch(total);
            plan = fftw_plan_r2r_3d(n, n, n, scratch.data(), scratch.data(), FFTW_REDFT00,
                                    FFTW_REDFT00, FFTW_REDFT00, flags);
            break;
        }
        default:
            break;
    }
    if (plan == nullptr) throw NumericalError("FFTW failed to create a plan for n=" + std::to_string(n));
    return plan;
}

fftw_plan plan_for(Kind kind, int n, int m = 0) {
    if (n < 2) throw UsageError("FFT size must be at least 2");
    auto& c = cache();
    std::lock_guard lock(c.mutex);
    auto key = std::make_tuple(kind, n, m);
    if (auto it = c.plans.find(key); it != c.plans.end()) return it->second;
    // DCT planning is a one-off per solver; estimate keeps it cheap.
    unsigned flags = kind == Kind::cosine1 ? FFTW_ESTIMATE : planner_flags(c.effort);
    fftw_plan plan = make_plan(kind, n, m, flags);
    c.plans.emplace(key, plan);
    return plan;
}

}  // namespace

void set_effort(Effort effort) {
    auto& c = cache();
    std::lock_guard lock(c.mutex);
    c.effort = effort;
}

Effort effort() {
    auto& c = cache();
    std::lock_guard lock(c.mutex);
    return c.effort;
}

bool import_wisdom(const std::string& path) {
    auto& c = cache();
    std::lock_guard lock(c.mutex);
    return fftw_import_wisdom_from_filename(path.c_str()) != 0;
}

void export_wisdom(const std::string& path) {
    auto& c = cache();
    std::lock_guard lock(c.mutex);
    if (fftw_export_wisdom_to_filename(path.c_str()) == 0) {
        throw IoError("cannot write FFTW wisdom to " + path);
    }
}

void clear_plans() {
    auto& c = cache();
    std::lock_guard lock(c.mutex);
    for (auto& [key, plan] : c.plans) fftw_destroy_plan(plan);
    c.plans.clear();
}

void forward(int n, Complex* data) {
    fftw_execute_dft(plan_for(Kind::forward, n), as_fftw(data), as_fftw(data));
}

void backward(int n, Complex* data) {
    fftw_execute_dft(plan_for(Kind::backward, n), as_fftw(data), as_fftw(data));
}

void forward_real(int n, const double* in, Complex* out) {
    // r2c out-of-place never writes to its input.
    fftw_execute_dft_r2c(plan_for(Kind::forward_real, n), const_cast<double*>(in), as_fftw(out));
}

void backward_real(int n, Complex* in, double* out) {
    fftw_execute_dft_c2r(plan_for(Kind::backward_real, n), as_fftw(in), out);
}

void forward_real_corner(int n, int m, const double* in, Complex* out) {
    if (m < 1 || m > n) throw UsageError("corner block must fit the box");
    const int h = n / 2 + 1;
    // Lines in the middle and first axes that the corner pass leaves unset.
    for (int i = 0; i < n; ++i) {
        Complex* slab = out + static_cast<std::size_t>(i) * n * h;
        if (i < m)
            std::fill(slab + static_cast<std::size_t>(m) * h, slab + static_cast<std::size_t>(n) * h, Complex{});
        else
            std::fill(slab, slab + static_cast<std::size_t>(n) * h, Complex{});
    }
    fftw_execute_dft_r2c(plan_for(Kind::corner_r2c_last, n, m), const_cast<double*>(in), as_fftw(out));
    fftw_execute_dft(plan_for(Kind::corner_fwd_middle, n, m), as_fftw(out), as_fftw(out));
    fftw_execute_dft(plan_for(Kind::fwd_first, n, 1), as_fftw(out), as_fftw(out));
}

void backward_real_corner(int n, int m, Complex* in, double* out) {
    if (m < 1 || m > n) throw UsageError("corner block must fit the box");
    fftw_execute_dft(plan_for(Kind::bwd_first, n, 1), as_fftw(in), as_fftw(in));
    fftw_execute_dft(plan_for(Kind::corner_bwd_middle, n, m), as_fftw(in), as_fftw(in));
    fftw_execute_dft_c2r(plan_for(Kind::corner_c2r_last, n, m), as_fftw(in), out);
}

void cosine_type1(int m, double* data) { fftw_execute_r2r(plan_for(Kind::cosine1, m), data, data); }

}  // namespace hartree::fft
