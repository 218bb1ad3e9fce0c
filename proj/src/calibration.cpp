#include "quantconf/calibration.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include <fmt/format.h>

#include "quantconf/error.hpp"

namespace quantconf {
namespace {

constexpr const char* kModule = "calibration";

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) throw Error(kModule, fmt::format("length mismatch: {} vs {}", a, b));
    if (a == 0) throw Error(kModule, "empty run");
}

}  // namespace

void BinSpec::validate() const {
    if (num_bins < 1) throw Error(kModule, "num_bins must be >= 1");
    if (!(range_start >= 0.0 && range_start < 1.0)) {
        throw Error(kModule, fmt::format("range_start must lie in [0, 1), got {}", range_start));
    }
}

std::vector<double> BinSpec::edges() const {
    validate();
    const double span = 1.0 - range_start;
    std::vector<double> e(num_bins + 1);
    for (std::size_t m = 0; m <= num_bins; ++m) {
        e[m] = range_start + span * static_cast<double>(m) / static_cast<double>(num_bins);
    }
    e.back() = 1.0;
    return e;
}

std::size_t BinSpec::bin_of(double value) const {
    const double span = 1.0 - range_start;
    // Binary search over the upper edges: the first upper edge >= value.
    std::size_t lo = 0;
    std::size_t hi = num_bins - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const double upper = range_start + span * static_cast<double>(mid + 1) / static_cast<double>(num_bins);
        if (value <= upper) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

std::vector<ReliabilityBin> reliability_bins(std::span<const double> confidences,
                                             std::span<const bool> correct, const BinSpec& bins) {
    check_lengths(confidences.size(), correct.size());
    if (bins.strategy != BinStrategy::equal_width) {
        throw Error(kModule, "reliability bins need an equal_width BinSpec");
    }
    const auto edges = bins.edges();
    std::vector<double> conf_sum(bins.num_bins, 0.0);
    std::vector<std::size_t> hits(bins.num_bins, 0);
    std::vector<ReliabilityBin> out(bins.num_bins);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const std::size_t b = bins.bin_of(confidences[i]);
        conf_sum[b] += confidences[i];
        hits[b] += correct[i] ? 1 : 0;
        ++out[b].count;
    }
    for (std::size_t b = 0; b < bins.num_bins; ++b) {
        out[b].lo = edges[b];
        out[b].hi = edges[b + 1];
        if (out[b].count > 0) {
            const auto c = static_cast<double>(out[b].count);
            out[b].mean_confidence = conf_sum[b] / c;
            out[b].accuracy = static_cast<double>(hits[b]) / c;
        }
    }
    return out;
}

double ece(std::span<const double> confidences, std::span<const bool> correct, const BinSpec& bins) {
    const auto rel = reliability_bins(confidences, correct, bins);
    const auto n = static_cast<double>(confidences.size());
    double total = 0.0;
    for (const auto& b : rel) {
        if (b.count == 0) continue;
        total += static_cast<double>(b.count) / n * std::abs(*b.accuracy - *b.mean_confidence);
    }
    return total;
}

double ece(std::span<const PredictiveDistribution> dists, std::span<const std::size_t> labels,
           const BinSpec& bins) {
    check_lengths(dists.size(), labels.size());
    std::vector<double> conf(dists.size());
    std::unique_ptr<bool[]> correct(new bool[dists.size()]);
    for (std::size_t i = 0; i < dists.size(); ++i) {
        conf[i] = dists[i].confidence;
        correct[i] = is_correct(dists[i], labels[i]);
    }
    return ece(conf, std::span<const bool>(correct.get(), dists.size()), bins);
}

double ace(const Eigen::MatrixXd& class_probs, std::span<const std::size_t> labels,
           std::size_t num_bins) {
    const auto n = static_cast<std::size_t>(class_probs.rows());
    check_lengths(n, labels.size());
    if (num_bins < 1) throw Error(kModule, "num_bins must be >= 1");
    if (n < num_bins) throw Error(kModule, "more bins than samples");
    const auto num_classes = static_cast<std::size_t>(class_probs.cols());

    // Bin sizes: floor(n/M) each, remainder one-per-bin from the last bin backward.
    std::vector<std::size_t> bin_end(num_bins);
    {
        const std::size_t base = n / num_bins;
        const std::size_t rem = n % num_bins;
        std::size_t end = 0;
        for (std::size_t m = 0; m < num_bins; ++m) {
            end += base + (m >= num_bins - rem ? 1 : 0);
            bin_end[m] = end;
        }
    }

    std::vector<std::size_t> order(n);
    double total = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const auto col = class_probs.col(static_cast<Eigen::Index>(c));
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Ties on probability break on the true label so the sorted sequence
        // (and hence every partial sum) does not depend on input order.
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double pa = col(static_cast<Eigen::Index>(a));
            const double pb = col(static_cast<Eigen::Index>(b));
            if (pa != pb) return pa < pb;
            return labels[a] < labels[b];
        });
        std::size_t begin = 0;
        for (std::size_t m = 0; m < num_bins; ++m) {
            double conf_sum = 0.0;
            std::size_t hits = 0;
            for (std::size_t i = begin; i < bin_end[m]; ++i) {
                conf_sum += col(static_cast<Eigen::Index>(order[i]));
                hits += labels[order[i]] == c ? 1 : 0;
            }
            const auto size = static_cast<double>(bin_end[m] - begin);
            total += std::abs(static_cast<double>(hits) / size - conf_sum / size);
            begin = bin_end[m];
        }
    }
    return total / static_cast<double>(num_classes * num_bins);
}

double ace(std::span<const PredictiveDistribution> dists, std::span<const std::size_t> labels,
           const BinSpec& bins) {
    check_lengths(dists.size(), labels.size());
    const std::size_t k = dists.front().num_candidates();
    Eigen::MatrixXd probs(static_cast<Eigen::Index>(dists.size()), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < dists.size(); ++i) {
        if (dists[i].num_candidates() != k) throw Error(kModule, "ragged candidate counts across run");
        probs.row(static_cast<Eigen::Index>(i)) = dists[i].probs.transpose();
    }
    return ace(probs, labels, bins.num_bins);
}

RunMetrics confidence_stats(std::span<const PredictiveDistribution> dists,
                            std::span<const std::size_t> labels) {
    check_lengths(dists.size(), labels.size());
    RunMetrics m;
    m.n = dists.size();
    std::size_t hits = 0;
    std::size_t errors = 0;
    double conf_sum = 0.0;
    double err_conf_sum = 0.0;
    double true_sum = 0.0;
    double h_sum = 0.0;
    for (std::size_t i = 0; i < dists.size(); ++i) {
        const auto& d = dists[i];
        conf_sum += d.confidence;
        true_sum += d.conf_true;
        h_sum += predictive_entropy(d);
        if (is_correct(d, labels[i])) {
            ++hits;
        } else {
            ++errors;
            err_conf_sum += d.confidence;
        }
    }
    const auto n = static_cast<double>(m.n);
    m.accuracy = static_cast<double>(hits) / n;
    m.conf_mean = conf_sum / n;
    m.conf_true = true_sum / n;
    m.entropy_mean = h_sum / n;
    if (errors > 0) m.conf_err = err_conf_sum / static_cast<double>(errors);
    return m;
}

RunMetrics run_metrics(std::span<const PredictiveDistribution> dists,
                       std::span<const std::size_t> labels, CalibrationKind kind,
                       std::size_t num_bins) {
    RunMetrics m = confidence_stats(dists, labels);
    m.ce_kind = kind;
    m.ce_bins = num_bins;
    if (kind == CalibrationKind::ece) {
        m.ce = ece(dists, labels, BinSpec{BinStrategy::equal_width, num_bins, 0.0});
    } else {
        m.ce = ace(dists, labels, BinSpec{BinStrategy::equal_mass, num_bins, 0.0});
    }
    return m;
}

const char* to_string(CalibrationKind kind) { return kind == CalibrationKind::ece ? "ECE" : "ACE"; }

}  // namespace quantconf
