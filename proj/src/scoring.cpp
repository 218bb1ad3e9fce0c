#include "quantconf/scoring.hpp"

#include <cmath>

#include "quantconf/error.hpp"

namespace quantconf {
namespace {
constexpr const char* kModule = "scoring";
}

double sequence_logprob(std::span<const double> token_logprobs) {
    if (token_logprobs.empty()) throw Error(kModule, "empty token log-probability list");
    double sum = 0.0;
    for (double v : token_logprobs) {
        if (!std::isfinite(v)) throw Error(kModule, "non-finite token log-probability");
        if (v > 0.0) throw Error(kModule, "positive token log-probability");
        sum += v;
    }
    return sum;
}

PredictiveDistribution normalize(const PredictionRecord& record, ConfidenceMode mode,
                                 LengthNorm length_norm) {
    const auto k = static_cast<Eigen::Index>(record.num_candidates());
    if (k < 2) throw Error(kModule, "record has fewer than 2 candidates: " + record.sample_id);
    if (record.true_index >= record.num_candidates()) {
        throw Error(kModule, "true_index out of range: " + record.sample_id);
    }

    Eigen::VectorXd logprobs = Eigen::Map<const Eigen::VectorXd>(record.candidate_logprobs.data(), k);
    if (length_norm == LengthNorm::per_token_mean) {
        if (!record.candidate_token_logprobs) {
            throw Error(kModule, "per-token mean needs candidate_token_logprobs: " + record.sample_id);
        }
        const auto& tokens = *record.candidate_token_logprobs;
        for (Eigen::Index c = 0; c < k; ++c) {
            const auto& t = tokens[static_cast<std::size_t>(c)];
            logprobs(c) = sequence_logprob(t) / static_cast<double>(t.size());
        }
    }

    PredictiveDistribution dist;
    dist.raw_seq_probs = logprobs.array().exp().matrix();
    if (mode == ConfidenceMode::softmax) {
        dist.probs = softmax(logprobs);
        dist.normalized = true;
    } else {
        dist.probs = dist.raw_seq_probs;
        dist.normalized = false;
    }
    // argmax on log-probs keeps the prediction identical across modes.
    dist.predicted_index = argmax(logprobs);
    dist.confidence = dist.probs(static_cast<Eigen::Index>(dist.predicted_index));
    dist.conf_true = dist.probs(static_cast<Eigen::Index>(record.true_index));
    return dist;
}

std::vector<PredictiveDistribution> normalize_all(std::span<const PredictionRecord> records,
                                                  ConfidenceMode mode, LengthNorm length_norm) {
    std::vector<PredictiveDistribution> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(normalize(r, mode, length_norm));
    return out;
}

const char* to_string(ConfidenceMode mode) {
    return mode == ConfidenceMode::softmax ? "softmax" : "raw";
}

const char* to_string(LengthNorm norm) {
    return norm == LengthNorm::none ? "none" : "per_token_mean";
}

}  // namespace quantconf
