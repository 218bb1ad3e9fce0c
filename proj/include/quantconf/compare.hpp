#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "quantconf/calibration.hpp"
#include "quantconf/divergence.hpp"
#include "quantconf/record.hpp"
#include "quantconf/scoring.hpp"
#include "quantconf/shift.hpp"
#include "quantconf/stats.hpp"

namespace quantconf {

// automatic: ECE for binary tasks, ACE for multiclass.
enum class CeSelection { automatic, ece, ace };

struct CompareOptions {
    std::size_t bins = 10;
    std::optional<double> bin_start;  // shift-profile lower edge; nullopt = 1/K
    double alpha = 0.05;
    ConfidenceMode conf_mode = ConfidenceMode::softmax;
    LengthNorm length_norm = LengthNorm::none;
    JsdVariant jsd_variant = JsdVariant::halved;
    JsdMode jsd_mode = JsdMode::l1_normalized;
    CeSelection ce = CeSelection::automatic;
    ShiftKey shift_key = ShiftKey::prediction_confidence;
    bool strict = false;

    bool operator==(const CompareOptions&) const = default;
};

// quantized − full.
struct MetricDeltas {
    double accuracy = 0.0;
    double ce = 0.0;
    double conf_mean = 0.0;
    std::optional<double> conf_err;
    double conf_true = 0.0;
    double entropy_mean = 0.0;
};

struct SignificanceTests {
    std::optional<PairedTestResult> conf;
    // Samples predicted wrongly by both runs; absent with fewer than 2 such samples.
    std::optional<PairedTestResult> conf_err;
    std::optional<PairedTestResult> conf_true;
    std::optional<PairedTestResult> entropy;
};

struct CellReport {
    std::string model_id;
    std::string quantized_model_id;
    std::string dataset_id;
    std::string quant_label;
    TaskKind task_kind = TaskKind::multiclass;
    std::size_t num_candidates = 0;
    std::size_t n_pairs = 0;
    std::size_t unmatched_full = 0;
    std::size_t unmatched_quantized = 0;
    RunMetrics full;
    RunMetrics quantized;
    MetricDeltas deltas;
    SignificanceTests tests;
    ShiftProfile shift;
    JsdResult jsd;
    std::vector<ReliabilityBin> reliability_full;
    std::vector<ReliabilityBin> reliability_quantized;
};

struct ComparisonReport {
    CompareOptions options;
    std::vector<CellReport> cells;
};

MetricDeltas metric_deltas(const RunMetrics& full, const RunMetrics& quantized);

CalibrationKind select_calibration(TaskKind kind, CeSelection sel);

CellReport compare_paired(const PairingResult& paired, const RunManifest& manifest,
                          const CompareOptions& opts);

// One cell per manifest, in manifest order.
ComparisonReport run_compare(const std::vector<RunManifest>& manifests, const CompareOptions& opts);

const char* to_string(CeSelection s);

}  // namespace quantconf
