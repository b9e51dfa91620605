#include "mtboost/kernels.hpp"

#include <cstdlib>
#include <limits>

#include "mtboost/common.hpp"

namespace mtboost::kernels {

namespace scalar {

double reduce_sum(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double reduce_max(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (x > m) m = x;
    return m;
}

void sum_sumsq(std::span<const double> v, double& sum, double& sumsq) {
    double s = 0.0, q = 0.0;
    for (double x : v) {
        s += x;
        q += x * x;
    }
    sum = s;
    sumsq = q;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void residual(std::span<const double> y, std::span<const double> f, double gamma,
              std::span<double> out) {
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] - gamma * f[i];
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

SplitScanResult split_scan(std::span<const double> prefix,
                           std::span<const unsigned char> valid, double min_reduction) {
    const std::size_t n = prefix.size() - 1;
    const double total = prefix[n];
    const double base = total * total / static_cast<double>(n);
    SplitScanResult best;
    best.reduction = min_reduction;
    for (std::size_t i = 1; i < n; ++i) {
        if (!valid[i]) continue;
        const double left = prefix[i];
        const double right = total - left;
        const double red = left * left / static_cast<double>(i) +
                           right * right / static_cast<double>(n - i) - base;
        if (red > best.reduction) {
            best.reduction = red;
            best.index = static_cast<int>(i);
        }
    }
    if (best.index < 0) best.reduction = 0.0;
    return best;
}

}  // namespace scalar

namespace {

struct Vtable {
    double (*reduce_sum)(std::span<const double>);
    double (*reduce_max)(std::span<const double>);
    void (*sum_sumsq)(std::span<const double>, double&, double&);
    double (*dot)(std::span<const double>, std::span<const double>);
    double (*sum_sq_diff)(std::span<const double>, std::span<const double>);
    void (*residual)(std::span<const double>, std::span<const double>, double,
                     std::span<double>);
    void (*axpy)(double, std::span<const double>, std::span<double>);
    SplitScanResult (*split_scan)(std::span<const double>, std::span<const unsigned char>,
                                  double);
};

constexpr Vtable make_scalar_vtable() {
    return Vtable{&scalar::reduce_sum, &scalar::reduce_max, &scalar::sum_sumsq,
                  &scalar::dot,        &scalar::sum_sq_diff, &scalar::residual,
                  &scalar::axpy,       &scalar::split_scan};
}

constexpr Vtable make_avx2_vtable() {
    return Vtable{&avx2::reduce_sum, &avx2::reduce_max, &avx2::sum_sumsq,
                  &avx2::dot,        &avx2::sum_sq_diff, &avx2::residual,
                  &avx2::axpy,       &avx2::split_scan};
}

struct Dispatch {
    Backend backend;
    Vtable vt;

    Dispatch() {
        backend = cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
        if (const char* env = std::getenv("MTBOOST_KERNELS")) {
            const std::string want(env);
            if (want == "scalar") backend = Backend::Scalar;
            if (want == "avx2" && cpu_has_avx2()) backend = Backend::Avx2;
        }
        vt = backend == Backend::Avx2 ? make_avx2_vtable() : make_scalar_vtable();
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend active_backend() { return dispatch().backend; }

void force_backend(Backend b) {
    if (b == Backend::Avx2 && !cpu_has_avx2())
        throw ConfigError("kernels: AVX2 backend requested but unsupported on this CPU");
    dispatch().backend = b;
    dispatch().vt = b == Backend::Avx2 ? make_avx2_vtable() : make_scalar_vtable();
}

std::string backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

double reduce_sum(std::span<const double> v) { return dispatch().vt.reduce_sum(v); }
double reduce_max(std::span<const double> v) { return dispatch().vt.reduce_max(v); }
void sum_sumsq(std::span<const double> v, double& s, double& q) {
    dispatch().vt.sum_sumsq(v, s, q);
}
double dot(std::span<const double> a, std::span<const double> b) {
    return dispatch().vt.dot(a, b);
}
double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    return dispatch().vt.sum_sq_diff(a, b);
}
void residual(std::span<const double> y, std::span<const double> f, double gamma,
              std::span<double> out) {
    dispatch().vt.residual(y, f, gamma, out);
}
void axpy(double a, std::span<const double> x, std::span<double> y) {
    dispatch().vt.axpy(a, x, y);
}
SplitScanResult split_scan(std::span<const double> prefix,
                           std::span<const unsigned char> valid, double min_reduction) {
    return dispatch().vt.split_scan(prefix, valid, min_reduction);
}

}  // namespace mtboost::kernels
