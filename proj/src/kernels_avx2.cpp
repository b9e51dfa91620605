#include <limits>
#include <span>

#include "mtboost/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define MTBOOST_HAVE_AVX2_TARGET 1
#define MTBOOST_TARGET_AVX2 __attribute__((target("avx2")))
#else
#define MTBOOST_HAVE_AVX2_TARGET 0
#define MTBOOST_TARGET_AVX2
#endif

// AVX2 variants. No FMA: elementwise kernels and the split scan must produce
// the same bits as the scalar reference, so every lane performs the identical
// mul/add/div sequence. Reductions keep four independent accumulators and are
// combined after the loop.

namespace mtboost::kernels::avx2 {

#if MTBOOST_HAVE_AVX2_TARGET

namespace {

MTBOOST_TARGET_AVX2 inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

MTBOOST_TARGET_AVX2 inline double hmax(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_max_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

MTBOOST_TARGET_AVX2 double reduce_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(v.data() + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += v[i];
    return s;
}

MTBOOST_TARGET_AVX2 double reduce_max(std::span<const double> v) {
    const std::size_t n = v.size();
    double m = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= 4) {
        __m256d acc = _mm256_loadu_pd(v.data());
        for (i = 4; i + 4 <= n; i += 4)
            acc = _mm256_max_pd(acc, _mm256_loadu_pd(v.data() + i));
        m = hmax(acc);
    }
    for (; i < n; ++i)
        if (v[i] > m) m = v[i];
    return m;
}

MTBOOST_TARGET_AVX2 void sum_sumsq(std::span<const double> v, double& sum, double& sumsq) {
    const std::size_t n = v.size();
    std::size_t i = 0;
    __m256d s = _mm256_setzero_pd();
    __m256d q = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(v.data() + i);
        s = _mm256_add_pd(s, x);
        q = _mm256_add_pd(q, _mm256_mul_pd(x, x));
    }
    double hs = hsum(s), hq = hsum(q);
    for (; i < n; ++i) {
        hs += v[i];
        hq += v[i] * v[i];
    }
    sum = hs;
    sumsq = hq;
}

MTBOOST_TARGET_AVX2 double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(a.data() + i);
        const __m256d y = _mm256_loadu_pd(b.data() + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(x, y));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

MTBOOST_TARGET_AVX2 double sum_sq_diff(std::span<const double> a,
                                       std::span<const double> b) {
    const std::size_t n = a.size();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        const __m256d d =
            _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

MTBOOST_TARGET_AVX2 void residual(std::span<const double> y, std::span<const double> f,
                                  double gamma, std::span<double> out) {
    const std::size_t n = y.size();
    std::size_t i = 0;
    const __m256d g = _mm256_set1_pd(gamma);
    for (; i + 4 <= n; i += 4) {
        const __m256d yi = _mm256_loadu_pd(y.data() + i);
        const __m256d fi = _mm256_loadu_pd(f.data() + i);
        _mm256_storeu_pd(out.data() + i, _mm256_sub_pd(yi, _mm256_mul_pd(g, fi)));
    }
    for (; i < n; ++i) out[i] = y[i] - gamma * f[i];
}

MTBOOST_TARGET_AVX2 void axpy(double a, std::span<const double> x, std::span<double> y) {
    const std::size_t n = x.size();
    std::size_t i = 0;
    const __m256d av = _mm256_set1_pd(a);
    for (; i + 4 <= n; i += 4) {
        const __m256d xi = _mm256_loadu_pd(x.data() + i);
        const __m256d yi = _mm256_loadu_pd(y.data() + i);
        _mm256_storeu_pd(y.data() + i, _mm256_add_pd(yi, _mm256_mul_pd(av, xi)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

MTBOOST_TARGET_AVX2 SplitScanResult split_scan(std::span<const double> prefix,
                                               std::span<const unsigned char> valid,
                                               double min_reduction) {
    const std::size_t n = prefix.size() - 1;
    const double total = prefix[n];
    const double base = total * total / static_cast<double>(n);

    SplitScanResult best;
    best.reduction = min_reduction;

    const __m256d vtotal = _mm256_set1_pd(total);
    const __m256d vbase = _mm256_set1_pd(base);
    const __m256d vn = _mm256_set1_pd(static_cast<double>(n));
    const __m256d ninf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    const __m256d step = _mm256_set1_pd(4.0);

    __m256d bestv = _mm256_set1_pd(min_reduction);
    alignas(32) double lane_best[4] = {min_reduction, min_reduction, min_reduction,
                                       min_reduction};
    alignas(32) double lane_idx[4] = {-1.0, -1.0, -1.0, -1.0};
    __m256d bidx = _mm256_set1_pd(-1.0);
    __m256d idx = _mm256_set_pd(4.0, 3.0, 2.0, 1.0);

    std::size_t i = 1;
    for (; i + 4 <= n; i += 4) {
        const __m256d left = _mm256_loadu_pd(prefix.data() + i);
        const __m256d right = _mm256_sub_pd(vtotal, left);
        const __m256d cntr = _mm256_sub_pd(vn, idx);
        const __m256d red = _mm256_sub_pd(
            _mm256_add_pd(_mm256_div_pd(_mm256_mul_pd(left, left), idx),
                          _mm256_div_pd(_mm256_mul_pd(right, right), cntr)),
            vbase);
        // mask out invalid candidates
        const __m256d vmask = _mm256_set_pd(
            valid[i + 3] ? 0.0 : 1.0, valid[i + 2] ? 0.0 : 1.0,
            valid[i + 1] ? 0.0 : 1.0, valid[i + 0] ? 0.0 : 1.0);
        const __m256d masked =
            _mm256_blendv_pd(red, ninf, _mm256_cmp_pd(vmask, _mm256_setzero_pd(),
                                                      _CMP_GT_OQ));
        // strict > keeps the lowest in-lane index on ties
        const __m256d gt = _mm256_cmp_pd(masked, bestv, _CMP_GT_OQ);
        bestv = _mm256_blendv_pd(bestv, masked, gt);
        bidx = _mm256_blendv_pd(bidx, idx, gt);
        idx = _mm256_add_pd(idx, step);
    }

    _mm256_storeu_pd(lane_best, bestv);
    _mm256_storeu_pd(lane_idx, bidx);
    for (int lane = 0; lane < 4; ++lane) {
        if (lane_idx[lane] < 0.0) continue;
        const int candidate = static_cast<int>(lane_idx[lane]);
        if (lane_best[lane] > best.reduction ||
            (lane_best[lane] == best.reduction && best.index >= 0 &&
             candidate < best.index)) {
            best.reduction = lane_best[lane];
            best.index = candidate;
        }
    }
    for (; i < n; ++i) {
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

#else  // !MTBOOST_HAVE_AVX2_TARGET

double reduce_sum(std::span<const double> v) { return scalar::reduce_sum(v); }
double reduce_max(std::span<const double> v) { return scalar::reduce_max(v); }
void sum_sumsq(std::span<const double> v, double& s, double& q) {
    scalar::sum_sumsq(v, s, q);
}
double dot(std::span<const double> a, std::span<const double> b) {
    return scalar::dot(a, b);
}
double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    return scalar::sum_sq_diff(a, b);
}
void residual(std::span<const double> y, std::span<const double> f, double gamma,
              std::span<double> out) {
    scalar::residual(y, f, gamma, out);
}
void axpy(double a, std::span<const double> x, std::span<double> y) {
    scalar::axpy(a, x, y);
}
SplitScanResult split_scan(std::span<const double> prefix,
                           std::span<const unsigned char> valid, double min_reduction) {
    return scalar::split_scan(prefix, valid, min_reduction);
}

#endif

}  // namespace mtboost::kernels::avx2
