#include "quantconf/stats.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "quantconf/error.hpp"

namespace quantconf {
namespace {

constexpr const char* kModule = "stats";
constexpr double kCfTolerance = 1e-14;
constexpr int kCfMaxIter = 300;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
double beta_cf(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kCfMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kCfTolerance) return h;
    }
    throw Error(kModule, fmt::format("incomplete beta did not converge (a={}, b={}, x={})", a, b, x));
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw Error(kModule, "incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw Error(kModule, "incomplete beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // The fraction converges fast below the mean; use the reflection above it.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    if (!(df > 0.0)) throw Error(kModule, "degrees of freedom must be positive");
    if (std::isnan(t)) throw Error(kModule, "t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return incomplete_beta(0.5 * df, 0.5, x);
}

double student_t_cdf(double t, double df) {
    const double tail = 0.5 * student_t_two_sided(t, df);
    return t >= 0.0 ? 1.0 - tail : tail;
}

PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() != b.size()) {
        throw Error(kModule, fmt::format("paired t-test: length mismatch {} vs {}", a.size(), b.size()));
    }
    if (a.size() < 2) throw Error(kModule, "paired t-test needs n >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(kModule, "alpha must lie in (0, 1)");

    PairedTestResult r;
    r.n = a.size();
    r.df = r.n - 1;
    r.alpha = alpha;
    const auto n = static_cast<double>(r.n);

    double sum = 0.0;
    for (std::size_t i = 0; i < r.n; ++i) sum += a[i] - b[i];
    r.mean_diff = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < r.n; ++i) {
        const double dev = (a[i] - b[i]) - r.mean_diff;
        ss += dev * dev;
    }
    const double sd = std::sqrt(ss / (n - 1.0));

    if (sd == 0.0) {
        if (r.mean_diff == 0.0) {
            r.t_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_stat = std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
            r.p_value = 0.0;
            r.degenerate = true;
        }
    } else {
        r.t_stat = r.mean_diff / (sd / std::sqrt(n));
        r.p_value = student_t_two_sided(r.t_stat, static_cast<double>(r.df));
    }
    r.significant = r.p_value < alpha;
    return r;
}

}  // namespace quantconf
