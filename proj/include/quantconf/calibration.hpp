#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "quantconf/scoring.hpp"

namespace quantconf {

enum class BinStrategy { equal_width, equal_mass };

struct BinSpec {
    BinStrategy strategy = BinStrategy::equal_width;
    std::size_t num_bins = 10;
    double range_start = 0.0;  // lower edge of the first bin

    void validate() const;
    // num_bins + 1 ascending edges from range_start to 1 (equal_width only).
    std::vector<double> edges() const;
    // Right-closed bins, first bin closed below. Values outside
    // [range_start, 1] are clamped into the first/last bin.
    std::size_t bin_of(double value) const;
};

enum class CalibrationKind { ece, ace };

// Per-bin reliability-diagram data for equal-width bins.
struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::optional<double> mean_confidence;
    std::optional<double> accuracy;
};

struct RunMetrics {
    std::size_t n = 0;
    double accuracy = 0.0;
    CalibrationKind ce_kind = CalibrationKind::ece;
    std::size_t ce_bins = 10;
    double ce = 0.0;
    double conf_mean = 0.0;
    std::optional<double> conf_err;  // absent when no sample is wrong
    double conf_true = 0.0;
    double entropy_mean = 0.0;  // nats
};

// Shannon entropy in nats with 0 ln 0 = 0.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
    using Scalar = typename Derived::Scalar;
    using std::log;
    Scalar h(0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const Scalar v = p(i);
        if (v > Scalar(0)) h -= v * log(v);
    }
    return h;
}

inline double predictive_entropy(const PredictiveDistribution& dist) { return entropy(dist.probs); }

// Kernel form: per-sample confidences and correctness flags.
std::vector<ReliabilityBin> reliability_bins(std::span<const double> confidences,
                                             std::span<const bool> correct, const BinSpec& bins);
double ece(std::span<const double> confidences, std::span<const bool> correct, const BinSpec& bins);

// Keyed on each sample's prediction confidence (max probability).
double ece(std::span<const PredictiveDistribution> dists, std::span<const std::size_t> labels,
           const BinSpec& bins);

// Column c of `class_probs` holds every sample's probability for class c.
double ace(const Eigen::MatrixXd& class_probs, std::span<const std::size_t> labels,
           std::size_t num_bins);
double ace(std::span<const PredictiveDistribution> dists, std::span<const std::size_t> labels,
           const BinSpec& bins);

// Fills n, accuracy, conf_mean, conf_err, conf_true and entropy_mean.
RunMetrics confidence_stats(std::span<const PredictiveDistribution> dists,
                            std::span<const std::size_t> labels);

RunMetrics run_metrics(std::span<const PredictiveDistribution> dists,
                       std::span<const std::size_t> labels, CalibrationKind kind,
                       std::size_t num_bins = 10);

const char* to_string(CalibrationKind kind);

}  // namespace quantconf
