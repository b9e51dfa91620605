#pragma once

#include <cstdint>
#include <span>
#include <string>

// Dispatched arithmetic kernels for the data-parallel inner loops: reductions
// over targets and predictions, residual updates, and the split-criterion
// scan used by the tree builder. Each kernel has a scalar reference
// implementation and an AVX2 variant; the backend is chosen once at startup
// from CPUID, overridable with MTBOOST_KERNELS=scalar|avx2 or force_backend().
//
// Elementwise kernels (residual, axpy) and the split scan are bit-identical
// across backends: every candidate is evaluated with the same per-element
// operation sequence and comparisons are exact. Reductions (sum, dot, mse,
// sumsq) accumulate in a different order under AVX2 and agree with the scalar
// reference only up to rounding; the equivalence suite pins both contracts.

namespace mtboost::kernels {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
void force_backend(Backend b);  // throws ConfigError if unsupported on this CPU
bool cpu_has_avx2();
std::string backend_name(Backend b);

double reduce_sum(std::span<const double> v);
double reduce_max(std::span<const double> v);  // -inf on empty input
void sum_sumsq(std::span<const double> v, double& sum, double& sumsq);
double dot(std::span<const double> a, std::span<const double> b);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);

// out[i] = y[i] - gamma * f[i]
void residual(std::span<const double> y, std::span<const double> f, double gamma,
              std::span<double> out);
// y[i] += a * x[i]
void axpy(double a, std::span<const double> x, std::span<double> y);

// Best split position over centered prefix sums. prefix[i] holds the sum of
// the first i centered targets (prefix[0] = 0, size n+1); candidate i puts
// rows [0, i) left and [i, n) right; valid[i] != 0 marks admissible
// positions. The reduction at i is
//     prefix[i]^2/i + (S - prefix[i])^2/(n-i) - S^2/n,   S = prefix[n],
// i.e. parent SSE minus child SSEs with the squared-sum terms taken over
// mean-centered targets. Returns index -1 when no valid candidate exceeds
// min_reduction. Ties resolve to the lowest index on every backend.
struct SplitScanResult {
    int index = -1;
    double reduction = 0.0;
};
SplitScanResult split_scan(std::span<const double> prefix,
                           std::span<const unsigned char> valid, double min_reduction);

// Per-backend entry points, exposed for the equivalence tests.
namespace scalar {
double reduce_sum(std::span<const double> v);
double reduce_max(std::span<const double> v);
void sum_sumsq(std::span<const double> v, double& sum, double& sumsq);
double dot(std::span<const double> a, std::span<const double> b);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
void residual(std::span<const double> y, std::span<const double> f, double gamma,
              std::span<double> out);
void axpy(double a, std::span<const double> x, std::span<double> y);
SplitScanResult split_scan(std::span<const double> prefix,
                           std::span<const unsigned char> valid, double min_reduction);
}  // namespace scalar

namespace avx2 {
double reduce_sum(std::span<const double> v);
double reduce_max(std::span<const double> v);
void sum_sumsq(std::span<const double> v, double& sum, double& sumsq);
double dot(std::span<const double> a, std::span<const double> b);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
void residual(std::span<const double> y, std::span<const double> f, double gamma,
              std::span<double> out);
void axpy(double a, std::span<const double> x, std::span<double> y);
SplitScanResult split_scan(std::span<const double> prefix,
                           std::span<const unsigned char> valid, double min_reduction);
}  // namespace avx2

}  // namespace mtboost::kernels
