#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "quantconf/error.hpp"
#include "quantconf/record.hpp"
#include "quantconf/scoring.hpp"

namespace quantconf {

// Σ p ln(p/q) over normalized vectors, 0 ln(0/·) = 0. Throws on length
// mismatch, unnormalized input, or q_i = 0 with p_i > 0.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl(const Eigen::MatrixBase<DerivedP>& p,
                             const Eigen::MatrixBase<DerivedQ>& q) {
    using Scalar = typename DerivedP::Scalar;
    using std::abs;
    using std::log;
    if (p.size() != q.size()) throw Error("divergence", "kl: length mismatch");
    if (abs(p.sum() - Scalar(1)) > Scalar(1e-9) || abs(q.sum() - Scalar(1)) > Scalar(1e-9)) {
        throw Error("divergence", "kl: inputs must sum to 1");
    }
    Scalar total(0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= Scalar(0)) continue;
        if (q(i) <= Scalar(0)) throw Error("divergence", "kl: support violation (q_i = 0 < p_i)");
        total += p(i) * log(p(i) / q(i));
    }
    return total;
}

// KL(p || m) without the normalization checks; m > 0 wherever p > 0.
template <typename DerivedP, typename DerivedM>
typename DerivedP::Scalar kl_unchecked(const Eigen::MatrixBase<DerivedP>& p,
                                       const Eigen::MatrixBase<DerivedM>& m) {
    using Scalar = typename DerivedP::Scalar;
    using std::log;
    Scalar total(0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) > Scalar(0)) total += p(i) * log(p(i) / m(i));
    }
    return total;
}

template <typename Scalar>
struct JsDivergence {
    Scalar halved{0};          // ½(KL(p‖m) + KL(q‖m))
    Scalar paper_expanded{0};  // Σ p ln(2p/(p+q)) + q ln(2q/(p+q)), twice `halved`
    Scalar distance() const {
        using std::sqrt;
        return sqrt(halved < Scalar(0) ? Scalar(0) : halved);
    }
};

// Both JSD forms on already-normalized vectors. Symmetric in (p, q) bit for bit.
template <typename DerivedP, typename DerivedQ>
JsDivergence<typename DerivedP::Scalar> js_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                                      const Eigen::MatrixBase<DerivedQ>& q) {
    using Scalar = typename DerivedP::Scalar;
    using std::log;
    if (p.size() != q.size()) throw Error("divergence", "jsd: length mismatch");
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m = (p + q) * Scalar(0.5);
    JsDivergence<Scalar> out;
    out.halved = Scalar(0.5) * (kl_unchecked(p, m) + kl_unchecked(q, m));
    Scalar expanded(0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const Scalar s = p(i) + q(i);
        Scalar term(0);
        if (p(i) > Scalar(0)) term += p(i) * log(Scalar(2) * p(i) / s);
        if (q(i) > Scalar(0)) term += q(i) * log(Scalar(2) * q(i) / s);
        expanded += term;
    }
    out.paper_expanded = expanded;
    return out;
}

enum class JsdVariant { halved, paper_expanded };
// l1_normalized treats each true-class vector as one distribution over
// instances; per_instance averages the binary JSD of (p_i, 1-p_i) vs (q_i, 1-q_i).
enum class JsdMode { l1_normalized, per_instance };

struct TrueClassVector {
    Eigen::VectorXd values;
    std::string dataset_id;
    std::string model_id;
};

struct JsdResult {
    double halved = 0.0;
    double paper_expanded = 0.0;
    double distance = 0.0;  // sqrt(halved)
    std::size_t clamped = 0;  // entries lifted to the 1e-300 floor
    JsdMode mode = JsdMode::l1_normalized;

    double value(JsdVariant v) const { return v == JsdVariant::halved ? halved : paper_expanded; }
};

inline constexpr double kProbabilityFloor = 1e-300;

JsdResult jsd(const TrueClassVector& p, const TrueClassVector& q,
              JsdMode mode = JsdMode::l1_normalized);

// True-class probability vectors of both runs of a paired dataset.
std::pair<TrueClassVector, TrueClassVector> true_class_vectors(
    const PairedDataset& pairs, ConfidenceMode conf_mode = ConfidenceMode::softmax,
    LengthNorm length_norm = LengthNorm::none);

struct ModelJsd {
    std::string model_id;
    std::size_t num_datasets = 0;
    double mean_halved = 0.0;
    double mean_paper_expanded = 0.0;
    double mean_distance = 0.0;  // mean over datasets of per-dataset sqrt(JSD)
};

struct DatasetJsd {
    std::string model_id;
    std::string dataset_id;
    JsdResult result;
};

// Unweighted mean across datasets per model, ordered by model_id.
std::vector<ModelJsd> mean_jsd_by_model(const std::vector<DatasetJsd>& per_dataset);
std::vector<ModelJsd> mean_jsd_by_model(const std::vector<PairedDataset>& datasets,
                                        ConfidenceMode conf_mode = ConfidenceMode::softmax,
                                        JsdMode mode = JsdMode::l1_normalized);

const char* to_string(JsdVariant v);
const char* to_string(JsdMode m);

}  // namespace quantconf
