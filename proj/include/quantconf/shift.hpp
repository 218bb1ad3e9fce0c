#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "quantconf/calibration.hpp"
#include "quantconf/record.hpp"
#include "quantconf/scoring.hpp"

namespace quantconf {

enum class ShiftKey { prediction_confidence, true_class_confidence };

struct ShiftBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::optional<double> mean_signed;  // mean of (quantized - full)
    std::optional<double> mean_abs;
};

struct ShiftProfile {
    std::vector<ShiftBin> bins;
    std::optional<std::size_t> argmax_abs_bin;  // largest mean_abs among non-empty bins
    double overall_mean_signed = 0.0;
    std::size_t n = 0;
    ShiftKey key = ShiftKey::prediction_confidence;

    std::vector<double> edges() const;
};

// Bins every sample on `bin_key`, then aggregates (after − before).
// The two-series overload bins on `before`.
ShiftProfile shift_profile(const Eigen::VectorXd& bin_key, const Eigen::VectorXd& before,
                           const Eigen::VectorXd& after, const BinSpec& bins);
ShiftProfile shift_profile(const Eigen::VectorXd& full, const Eigen::VectorXd& quantized,
                           const BinSpec& bins);

// range_start = nullopt picks 1/K for the prediction key and 0 for the true-class key.
struct ShiftOptions {
    ShiftKey key = ShiftKey::prediction_confidence;
    std::size_t num_bins = 10;
    std::optional<double> range_start;
    ConfidenceMode conf_mode = ConfidenceMode::softmax;
    LengthNorm length_norm = LengthNorm::none;
};

double default_range_start(ShiftKey key, std::size_t num_candidates);

ShiftProfile shift_profile(const PairedDataset& pairs, const ShiftOptions& opts = {});

struct ShiftCell {
    std::string model_id;
    std::string dataset_id;
    ShiftProfile profile;
};

// One profile per (model, dataset), sorted by model then dataset.
std::vector<ShiftCell> shift_grid(const std::vector<PairedDataset>& datasets,
                                  const ShiftOptions& opts = {});

// CSV columns: bin_lo,bin_hi,count,mean_signed,mean_abs (empty bin -> blank means).
std::string profile_csv(const ShiftProfile& profile);
// Writes one CSV per cell plus grid.json; returns the written CSV paths.
std::vector<std::filesystem::path> write_shift_grid(const std::vector<ShiftCell>& grid,
                                                    const std::filesystem::path& out_dir);

const char* to_string(ShiftKey key);

}  // namespace quantconf
