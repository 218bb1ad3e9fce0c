#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "quantconf/record.hpp"

namespace quantconf {

enum class ConfidenceMode { softmax, raw };
// per_token_mean divides each candidate's log-probability by its token count
// (requires candidate_token_logprobs).
enum class LengthNorm { none, per_token_mean };

struct PredictiveDistribution {
    Eigen::VectorXd probs;
    std::size_t predicted_index = 0;
    double confidence = 0.0;  // probs[predicted_index]
    double conf_true = 0.0;   // probs[true_index]
    Eigen::VectorXd raw_seq_probs;
    // False in raw mode: probs do not sum to one.
    bool normalized = true;

    std::size_t num_candidates() const noexcept { return static_cast<std::size_t>(probs.size()); }
};

// Numerically stable softmax over a vector of log-scores (max subtraction).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Scalar shift = logits.maxCoeff();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.array() - shift).exp().matrix();
    return e / e.sum();
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& logits) {
    using std::exp;
    using std::log;
    const auto shift = logits.maxCoeff();
    return shift + log((logits.array() - shift).exp().sum());
}

// First index of the maximum; ties resolve to the lowest index.
template <typename Derived>
std::size_t argmax(const Eigen::MatrixBase<Derived>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = i;
    }
    return static_cast<std::size_t>(best);
}

// log of the product of token probabilities: the sum of token log-probs.
double sequence_logprob(std::span<const double> token_logprobs);

PredictiveDistribution normalize(const PredictionRecord& record,
                                 ConfidenceMode mode = ConfidenceMode::softmax,
                                 LengthNorm length_norm = LengthNorm::none);

std::vector<PredictiveDistribution> normalize_all(std::span<const PredictionRecord> records,
                                                  ConfidenceMode mode = ConfidenceMode::softmax,
                                                  LengthNorm length_norm = LengthNorm::none);

inline bool is_correct(const PredictiveDistribution& dist, std::size_t true_index) {
    return dist.predicted_index == true_index;
}

const char* to_string(ConfidenceMode mode);
const char* to_string(LengthNorm norm);

}  // namespace quantconf
