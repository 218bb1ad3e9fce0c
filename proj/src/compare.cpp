#include "quantconf/compare.hpp"

#include <memory>

#include "quantconf/error.hpp"

namespace quantconf {
namespace {

std::optional<double> diff(const std::optional<double>& full, const std::optional<double>& quant) {
    if (!full || !quant) return std::nullopt;
    return *quant - *full;
}

std::optional<PairedTestResult> maybe_test(const std::vector<double>& quant,
                                           const std::vector<double>& full, double alpha) {
    if (quant.size() < 2) return std::nullopt;
    return paired_t_test(quant, full, alpha);
}

}  // namespace

MetricDeltas metric_deltas(const RunMetrics& full, const RunMetrics& quantized) {
    MetricDeltas d;
    d.accuracy = quantized.accuracy - full.accuracy;
    d.ce = quantized.ce - full.ce;
    d.conf_mean = quantized.conf_mean - full.conf_mean;
    d.conf_err = diff(full.conf_err, quantized.conf_err);
    d.conf_true = quantized.conf_true - full.conf_true;
    d.entropy_mean = quantized.entropy_mean - full.entropy_mean;
    return d;
}

CalibrationKind select_calibration(TaskKind kind, CeSelection sel) {
    switch (sel) {
        case CeSelection::ece: return CalibrationKind::ece;
        case CeSelection::ace: return CalibrationKind::ace;
        case CeSelection::automatic: break;
    }
    return kind == TaskKind::binary ? CalibrationKind::ece : CalibrationKind::ace;
}

CellReport compare_paired(const PairingResult& paired, const RunManifest& manifest,
                          const CompareOptions& opts) {
    const PairedDataset& ds = paired.dataset;
    if (ds.samples.empty()) throw Error("cli_report", "empty paired dataset");
    const std::size_t n = ds.size();

    CellReport cell;
    cell.model_id = ds.model_id();
    cell.quantized_model_id = ds.quantized_model_id();
    cell.dataset_id = ds.dataset_id;
    cell.quant_label = manifest.quant_label;
    cell.task_kind = manifest.task_kind;
    cell.num_candidates = ds.samples.front().full.num_candidates();
    cell.n_pairs = n;
    cell.unmatched_full = paired.unmatched_full;
    cell.unmatched_quantized = paired.unmatched_quantized;

    std::vector<PredictiveDistribution> full_d;
    std::vector<PredictiveDistribution> quant_d;
    std::vector<std::size_t> labels;
    full_d.reserve(n);
    quant_d.reserve(n);
    for (const auto& s : ds.samples) {
        full_d.push_back(normalize(s.full, opts.conf_mode, opts.length_norm));
        quant_d.push_back(normalize(s.quantized, opts.conf_mode, opts.length_norm));
        labels.push_back(s.full.true_index);
    }

    const CalibrationKind kind = select_calibration(manifest.task_kind, opts.ce);
    cell.full = run_metrics(full_d, labels, kind, opts.bins);
    cell.quantized = run_metrics(quant_d, labels, kind, opts.bins);
    cell.deltas = metric_deltas(cell.full, cell.quantized);

    std::vector<double> conf_f, conf_q, true_f, true_q, h_f, h_q, err_f, err_q;
    for (std::size_t i = 0; i < n; ++i) {
        conf_f.push_back(full_d[i].confidence);
        conf_q.push_back(quant_d[i].confidence);
        true_f.push_back(full_d[i].conf_true);
        true_q.push_back(quant_d[i].conf_true);
        h_f.push_back(predictive_entropy(full_d[i]));
        h_q.push_back(predictive_entropy(quant_d[i]));
        if (!is_correct(full_d[i], labels[i]) && !is_correct(quant_d[i], labels[i])) {
            err_f.push_back(full_d[i].confidence);
            err_q.push_back(quant_d[i].confidence);
        }
    }
    cell.tests.conf = maybe_test(conf_q, conf_f, opts.alpha);
    cell.tests.conf_err = maybe_test(err_q, err_f, opts.alpha);
    cell.tests.conf_true = maybe_test(true_q, true_f, opts.alpha);
    cell.tests.entropy = maybe_test(h_q, h_f, opts.alpha);

    ShiftOptions so;
    so.key = opts.shift_key;
    so.num_bins = opts.bins;
    so.range_start = opts.bin_start;
    so.conf_mode = opts.conf_mode;
    so.length_norm = opts.length_norm;
    cell.shift = shift_profile(ds, so);

    auto [p, q] = true_class_vectors(ds, opts.conf_mode, opts.length_norm);
    cell.jsd = jsd(p, q, opts.jsd_mode);

    const BinSpec rel{BinStrategy::equal_width, opts.bins, 0.0};
    std::unique_ptr<bool[]> correct_f(new bool[n]);
    std::unique_ptr<bool[]> correct_q(new bool[n]);
    for (std::size_t i = 0; i < n; ++i) {
        correct_f[i] = is_correct(full_d[i], labels[i]);
        correct_q[i] = is_correct(quant_d[i], labels[i]);
    }
    cell.reliability_full = reliability_bins(conf_f, std::span<const bool>(correct_f.get(), n), rel);
    cell.reliability_quantized = reliability_bins(conf_q, std::span<const bool>(correct_q.get(), n), rel);
    return cell;
}

ComparisonReport run_compare(const std::vector<RunManifest>& manifests, const CompareOptions& opts) {
    if (manifests.empty()) throw Error("cli_report", "no manifests given");
    ComparisonReport report;
    report.options = opts;
    for (const auto& m : manifests) {
        const PairingResult paired = load_paired(m, opts.strict);
        report.cells.push_back(compare_paired(paired, m, opts));
    }
    return report;
}

const char* to_string(CeSelection s) {
    switch (s) {
        case CeSelection::ece: return "ece";
        case CeSelection::ace: return "ace";
        case CeSelection::automatic: break;
    }
    return "auto";
}

}  // namespace quantconf
