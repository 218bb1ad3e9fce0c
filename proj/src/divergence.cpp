#include "quantconf/divergence.hpp"

#include <map>

namespace quantconf {
namespace {

constexpr const char* kModule = "divergence";

Eigen::VectorXd floored(const Eigen::VectorXd& v, std::size_t& clamped) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double x = v(i);
        if (!(x >= kProbabilityFloor)) {
            x = kProbabilityFloor;
            ++clamped;
        } else if (x > 1.0) {
            x = 1.0;
            ++clamped;
        }
        out(i) = x;
    }
    return out;
}

}  // namespace

JsdResult jsd(const TrueClassVector& p, const TrueClassVector& q, JsdMode mode) {
    if (p.values.size() != q.values.size()) throw Error(kModule, "jsd: length mismatch");
    if (p.values.size() == 0) throw Error(kModule, "jsd: empty true-class vector");
    JsdResult r;
    r.mode = mode;
    const Eigen::VectorXd pf = floored(p.values, r.clamped);
    const Eigen::VectorXd qf = floored(q.values, r.clamped);

    if (mode == JsdMode::l1_normalized) {
        const auto js = js_divergence(pf / pf.sum(), qf / qf.sum());
        r.halved = js.halved;
        r.paper_expanded = js.paper_expanded;
    } else {
        double halved = 0.0;
        double expanded = 0.0;
        Eigen::Vector2d a;
        Eigen::Vector2d b;
        for (Eigen::Index i = 0; i < pf.size(); ++i) {
            a << pf(i), 1.0 - pf(i);
            b << qf(i), 1.0 - qf(i);
            const auto js = js_divergence(a, b);
            halved += js.halved;
            expanded += js.paper_expanded;
        }
        const auto n = static_cast<double>(pf.size());
        r.halved = halved / n;
        r.paper_expanded = expanded / n;
    }
    r.distance = std::sqrt(std::max(r.halved, 0.0));
    return r;
}

std::pair<TrueClassVector, TrueClassVector> true_class_vectors(const PairedDataset& pairs,
                                                               ConfidenceMode conf_mode,
                                                               LengthNorm length_norm) {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    TrueClassVector p{Eigen::VectorXd(n), pairs.dataset_id, pairs.model_id()};
    TrueClassVector q{Eigen::VectorXd(n), pairs.dataset_id, pairs.quantized_model_id()};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = pairs.samples[static_cast<std::size_t>(i)];
        p.values(i) = normalize(s.full, conf_mode, length_norm).conf_true;
        q.values(i) = normalize(s.quantized, conf_mode, length_norm).conf_true;
    }
    return {std::move(p), std::move(q)};
}

std::vector<ModelJsd> mean_jsd_by_model(const std::vector<DatasetJsd>& per_dataset) {
    std::map<std::string, ModelJsd> by_model;
    for (const auto& d : per_dataset) {
        auto& m = by_model[d.model_id];
        m.model_id = d.model_id;
        ++m.num_datasets;
        m.mean_halved += d.result.halved;
        m.mean_paper_expanded += d.result.paper_expanded;
        m.mean_distance += d.result.distance;
    }
    std::vector<ModelJsd> out;
    for (auto& [_, m] : by_model) {
        const auto k = static_cast<double>(m.num_datasets);
        m.mean_halved /= k;
        m.mean_paper_expanded /= k;
        m.mean_distance /= k;
        out.push_back(m);
    }
    return out;
}

std::vector<ModelJsd> mean_jsd_by_model(const std::vector<PairedDataset>& datasets,
                                        ConfidenceMode conf_mode, JsdMode mode) {
    std::vector<DatasetJsd> per_dataset;
    for (const auto& ds : datasets) {
        auto [p, q] = true_class_vectors(ds, conf_mode);
        per_dataset.push_back({ds.model_id(), ds.dataset_id, jsd(p, q, mode)});
    }
    return mean_jsd_by_model(per_dataset);
}

const char* to_string(JsdVariant v) { return v == JsdVariant::halved ? "halved" : "expanded"; }
const char* to_string(JsdMode m) {
    return m == JsdMode::l1_normalized ? "normalized" : "per-instance";
}

}  // namespace quantconf
