#include <doctest.h>

#include <cmath>
#include <random>

#include "quantconf/error.hpp"
#include "quantconf/scoring.hpp"

using namespace quantconf;

namespace {
PredictionRecord rec(std::vector<double> lp, std::size_t label = 0) {
    return PredictionRecord{"d", "s", "m", label, std::move(lp), std::nullopt};
}
}  // namespace

TEST_CASE("sequence_logprob sums token log-probs") {
    const std::vector<double> one{-0.6931};
    CHECK(sequence_logprob(one) == doctest::Approx(-0.6931));
    const std::vector<double> two{-1.0, -1.0};
    CHECK(sequence_logprob(two) == -2.0);
    const std::vector<double> zeros{0.0, 0.0, 0.0};
    CHECK(sequence_logprob(zeros) == 0.0);
    CHECK_THROWS_AS(sequence_logprob(std::vector<double>{}), Error);
    CHECK_THROWS_AS(sequence_logprob(std::vector<double>{-1.0, 0.5}), Error);
}

TEST_CASE("softmax normalization examples") {
    const auto u = normalize(rec({-1, -1, -1, -1}));
    for (int i = 0; i < 4; ++i) CHECK(u.probs(i) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(u.predicted_index == 0);

    const auto b = normalize(rec({0.0, -std::log(3.0)}, 1));
    CHECK(b.probs(0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(b.probs(1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(b.confidence == doctest::Approx(0.75));
    CHECK(b.conf_true == doctest::Approx(0.25));
    CHECK_FALSE(is_correct(b, 1));

    // Reference values from a 40-digit evaluation.
    const auto d = normalize(rec({-0.4, -1.1, -3.2, -5.0}, 2));
    CHECK(std::abs(d.conf_true - 0.03879560507133543918) < 1e-15);
    CHECK(std::abs(d.confidence - 0.63798002166909266306) < 1e-15);
    CHECK(d.predicted_index == 0);
}

TEST_CASE("raw mode keeps the prediction and skips normalization") {
    const auto r = normalize(rec({-0.4, -1.1, -3.2, -5.0}, 2), ConfidenceMode::raw);
    CHECK_FALSE(r.normalized);
    CHECK(r.confidence == doctest::Approx(std::exp(-0.4)));
    CHECK(r.conf_true == doctest::Approx(std::exp(-3.2)));
    CHECK(r.predicted_index == 0);
}

TEST_CASE("per-token mean needs token log-probs") {
    auto r = rec({-3.0, -2.0});
    CHECK_THROWS_AS(normalize(r, ConfidenceMode::softmax, LengthNorm::per_token_mean), Error);
    r.candidate_token_logprobs = std::vector<std::vector<double>>{{-1.0, -1.0, -1.0}, {-2.0}};
    const auto d = normalize(r, ConfidenceMode::softmax, LengthNorm::per_token_mean);
    CHECK(d.predicted_index == 0);  // mean -1 beats -2
    CHECK(normalize(r).predicted_index == 1);
}

TEST_CASE("is_correct and tie rule") {
    CHECK(is_correct(normalize(rec({0.0, -50.0, -50.0})), 0));
    CHECK(is_correct(normalize(rec({-1.0, -1.0})), 0));
    CHECK_FALSE(is_correct(normalize(rec({std::log(0.2), std::log(0.8)})), 0));
}

TEST_CASE("property: shift invariance, mode agreement, normalization up to K = 10^4") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lp(-20.0, 0.0);
    std::uniform_real_distribution<double> shift(-10.0, 0.0);
    std::uniform_int_distribution<int> kdist(2, 50);
    for (int trial = 0; trial < 500; ++trial) {
        const int k = kdist(rng);
        std::vector<double> v(static_cast<std::size_t>(k));
        for (auto& x : v) x = lp(rng);
        const double c = shift(rng);
        std::vector<double> w = v;
        for (auto& x : w) x += c;
        const std::size_t label = static_cast<std::size_t>(trial % k);
        const auto a = normalize(rec(v, label));
        const auto b = normalize(rec(w, label));
        CHECK(a.predicted_index == b.predicted_index);
        CHECK(std::abs(a.confidence - b.confidence) < 1e-12);
        CHECK(std::abs(a.conf_true - b.conf_true) < 1e-12);
        CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(normalize(rec(v, label), ConfidenceMode::raw).predicted_index == a.predicted_index);
        CHECK(std::abs(a.probs.sum() - 1.0) < 1e-12);
        CHECK(a.confidence >= 1.0 / k);
    }
    for (int k : {1000, 10000}) {
        std::vector<double> v(static_cast<std::size_t>(k));
        for (auto& x : v) x = lp(rng);
        CHECK(std::abs(normalize(rec(v)).probs.sum() - 1.0) < 1e-12);
    }
}
