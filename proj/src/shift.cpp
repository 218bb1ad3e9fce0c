#include "quantconf/shift.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "quantconf/error.hpp"

namespace quantconf {
namespace {

constexpr const char* kModule = "shift_analysis";

std::string file_safe(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '_' || c == '.';
        if (!ok) c = '_';
    }
    return out;
}

}  // namespace

std::vector<double> ShiftProfile::edges() const {
    std::vector<double> e;
    if (bins.empty()) return e;
    e.push_back(bins.front().lo);
    for (const auto& b : bins) e.push_back(b.hi);
    return e;
}

ShiftProfile shift_profile(const Eigen::VectorXd& bin_key, const Eigen::VectorXd& before,
                           const Eigen::VectorXd& after, const BinSpec& bins) {
    if (bins.range_start >= 1.0) throw Error(kModule, "range_start must be < 1");
    if (bins.strategy != BinStrategy::equal_width) throw Error(kModule, "shift bins must be equal_width");
    if (bin_key.size() != before.size() || before.size() != after.size()) {
        throw Error(kModule, "length mismatch");
    }
    if (before.size() == 0) throw Error(kModule, "empty paired run");
    const auto edges = bins.edges();

    ShiftProfile prof;
    prof.n = static_cast<std::size_t>(before.size());
    prof.bins.resize(bins.num_bins);
    std::vector<double> signed_sum(bins.num_bins, 0.0);
    std::vector<double> abs_sum(bins.num_bins, 0.0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < before.size(); ++i) {
        const double d = after(i) - before(i);
        const std::size_t b = bins.bin_of(bin_key(i));
        signed_sum[b] += d;
        abs_sum[b] += std::abs(d);
        ++prof.bins[b].count;
        total += d;
    }
    prof.overall_mean_signed = total / static_cast<double>(prof.n);

    double best = -1.0;
    for (std::size_t b = 0; b < bins.num_bins; ++b) {
        auto& bin = prof.bins[b];
        bin.lo = edges[b];
        bin.hi = edges[b + 1];
        if (bin.count == 0) continue;
        const auto c = static_cast<double>(bin.count);
        bin.mean_signed = signed_sum[b] / c;
        bin.mean_abs = abs_sum[b] / c;
        if (*bin.mean_abs > best) {
            best = *bin.mean_abs;
            prof.argmax_abs_bin = b;
        }
    }
    return prof;
}

ShiftProfile shift_profile(const Eigen::VectorXd& full, const Eigen::VectorXd& quantized,
                           const BinSpec& bins) {
    return shift_profile(full, full, quantized, bins);
}

double default_range_start(ShiftKey key, std::size_t num_candidates) {
    if (key == ShiftKey::true_class_confidence) return 0.0;
    if (num_candidates < 2) throw Error(kModule, "need at least 2 candidates");
    return 1.0 / static_cast<double>(num_candidates);
}

ShiftProfile shift_profile(const PairedDataset& pairs, const ShiftOptions& opts) {
    if (pairs.samples.empty()) throw Error(kModule, "empty paired dataset");
    const std::size_t k = pairs.samples.front().full.num_candidates();
    BinSpec spec{BinStrategy::equal_width, opts.num_bins,
                 opts.range_start.value_or(default_range_start(opts.key, k))};
    spec.validate();

    const auto n = static_cast<Eigen::Index>(pairs.size());
    Eigen::VectorXd full(n);
    Eigen::VectorXd quant(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = pairs.samples[static_cast<std::size_t>(i)];
        const auto df = normalize(s.full, opts.conf_mode, opts.length_norm);
        const auto dq = normalize(s.quantized, opts.conf_mode, opts.length_norm);
        if (opts.key == ShiftKey::prediction_confidence) {
            full(i) = df.confidence;
            quant(i) = dq.confidence;
        } else {
            full(i) = df.conf_true;
            quant(i) = dq.conf_true;
        }
    }
    ShiftProfile prof = shift_profile(full, quant, spec);
    prof.key = opts.key;
    return prof;
}

std::vector<ShiftCell> shift_grid(const std::vector<PairedDataset>& datasets, const ShiftOptions& opts) {
    std::vector<ShiftCell> grid;
    grid.reserve(datasets.size());
    for (const auto& ds : datasets) grid.push_back({ds.model_id(), ds.dataset_id, shift_profile(ds, opts)});
    std::stable_sort(grid.begin(), grid.end(), [](const ShiftCell& a, const ShiftCell& b) {
        if (a.model_id != b.model_id) return a.model_id < b.model_id;
        return a.dataset_id < b.dataset_id;
    });
    return grid;
}

std::string profile_csv(const ShiftProfile& profile) {
    std::string out = "bin_lo,bin_hi,count,mean_signed,mean_abs\n";
    for (const auto& b : profile.bins) {
        out += fmt::format("{:.17g},{:.17g},{},", b.lo, b.hi, b.count);
        out += b.mean_signed ? fmt::format("{:.17g}", *b.mean_signed) : std::string{};
        out += ',';
        out += b.mean_abs ? fmt::format("{:.17g}", *b.mean_abs) : std::string{};
        out += '\n';
    }
    return out;
}

std::vector<std::filesystem::path> write_shift_grid(const std::vector<ShiftCell>& grid,
                                                    const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    nlohmann::ordered_json manifest;
    manifest["cells"] = nlohmann::ordered_json::array();
    for (const auto& cell : grid) {
        const std::string name = fmt::format("shift_{}__{}.csv", file_safe(cell.model_id),
                                             file_safe(cell.dataset_id));
        const auto path = out_dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(kModule, "cannot write " + path.string());
        out << profile_csv(cell.profile);
        written.push_back(path);

        nlohmann::ordered_json c;
        c["model_id"] = cell.model_id;
        c["dataset_id"] = cell.dataset_id;
        c["key"] = to_string(cell.profile.key);
        c["file"] = name;
        c["n"] = cell.profile.n;
        c["num_bins"] = cell.profile.bins.size();
        c["range_start"] = cell.profile.bins.empty() ? 0.0 : cell.profile.bins.front().lo;
        c["argmax_abs_bin"] = cell.profile.argmax_abs_bin
                                  ? nlohmann::ordered_json(*cell.profile.argmax_abs_bin)
                                  : nlohmann::ordered_json(nullptr);
        c["overall_mean_signed"] = cell.profile.overall_mean_signed;
        manifest["cells"].push_back(c);
    }
    std::ofstream out(out_dir / "grid.json", std::ios::binary);
    if (!out) throw Error(kModule, "cannot write grid.json");
    out << manifest.dump(2) << '\n';
    return written;
}

const char* to_string(ShiftKey key) {
    return key == ShiftKey::prediction_confidence ? "prediction" : "true-class";
}

}  // namespace quantconf
