#include "mltc/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace mltc::kernels {

namespace {

inline void matmul_row(const double* a, const double* b, double* c, int k, int n, int i) {
    double* ci = c + static_cast<std::int64_t>(i) * n;
    const double* ai = a + static_cast<std::int64_t>(i) * k;
    for (int j = 0; j < n; ++j) {
        ci[j] = 0.0;
    }
    for (int l = 0; l < k; ++l) {
        const double ail = ai[l];
        const double* bl = b + static_cast<std::int64_t>(l) * n;
        for (int j = 0; j < n; ++j) {
            ci[j] += ail * bl[j];
        }
    }
}

inline void matmul_bt_row(const double* a, const double* b, double* c, int p, int n, int i) {
    const double* ai = a + static_cast<std::int64_t>(i) * p;
    double* ci = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<std::int64_t>(j) * p;
        double acc = 0.0;
        for (int l = 0; l < p; ++l) {
            acc += ai[l] * bj[l];
        }
        ci[j] = acc;
    }
}

inline void matmul_at_row(const double* a, const double* b, double* c, int p, int m, int n,
                          int i) {
    double* ci = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        ci[j] = 0.0;
    }
    for (int l = 0; l < p; ++l) {
        const double ali = a[static_cast<std::int64_t>(l) * m + i];
        const double* bl = b + static_cast<std::int64_t>(l) * n;
        for (int j = 0; j < n; ++j) {
            ci[j] += ali * bl[j];
        }
    }
}

inline void softmax_row(double* row, int n) {
    double mx = row[0];
    for (int j = 1; j < n; ++j) {
        mx = std::max(mx, row[j]);
    }
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < n; ++j) {
        row[j] *= inv;
    }
}

inline void rms_norm_row(const double* x, const double* gain, double* out, int n, double eps) {
    double ss = 0.0;
    for (int j = 0; j < n; ++j) {
        ss += x[j] * x[j];
    }
    const double inv = 1.0 / std::sqrt(ss / n + eps);
    for (int j = 0; j < n; ++j) {
        out[j] = x[j] * inv * gain[j];
    }
}

}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<std::int64_t>(m) * k * n > 32768)
    for (int i = 0; i < m; ++i) {
        matmul_row(a, b, c, k, n, i);
    }
}

void matmul_bt(const double* a, const double* b, double* c, int m, int p, int n) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<std::int64_t>(m) * p * n > 32768)
    for (int i = 0; i < m; ++i) {
        matmul_bt_row(a, b, c, p, n, i);
    }
}

void matmul_at(const double* a, const double* b, double* c, int p, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<std::int64_t>(m) * p * n > 32768)
    for (int i = 0; i < m; ++i) {
        matmul_at_row(a, b, c, p, m, n, i);
    }
}

void softmax_rows(double* x, int rows, int n) {
#pragma omp parallel for schedule(static) if (rows > 4 && static_cast<std::int64_t>(rows) * n > 16384)
    for (int i = 0; i < rows; ++i) {
        softmax_row(x + static_cast<std::int64_t>(i) * n, n);
    }
}

void rms_norm_rows(const double* x, const double* gain, double* out, int rows, int n,
                   double eps) {
#pragma omp parallel for schedule(static) if (rows > 4 && static_cast<std::int64_t>(rows) * n > 16384)
    for (int i = 0; i < rows; ++i) {
        rms_norm_row(x + static_cast<std::int64_t>(i) * n, gain,
                     out + static_cast<std::int64_t>(i) * n, n, eps);
    }
}

namespace serial {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        matmul_row(a, b, c, k, n, i);
    }
}

void matmul_bt(const double* a, const double* b, double* c, int m, int p, int n) {
    for (int i = 0; i < m; ++i) {
        matmul_bt_row(a, b, c, p, n, i);
    }
}

void matmul_at(const double* a, const double* b, double* c, int p, int m, int n) {
    for (int i = 0; i < m; ++i) {
        matmul_at_row(a, b, c, p, m, n, i);
    }
}

void softmax_rows(double* x, int rows, int n) {
    for (int i = 0; i < rows; ++i) {
        softmax_row(x + static_cast<std::int64_t>(i) * n, n);
    }
}

void rms_norm_rows(const double* x, const double* gain, double* out, int rows, int n,
                   double eps) {
    for (int i = 0; i < rows; ++i) {
        rms_norm_row(x + static_cast<std::int64_t>(i) * n, gain,
                     out + static_cast<std::int64_t>(i) * n, n, eps);
    }
}

}  // namespace serial

}  // namespace mltc::kernels
