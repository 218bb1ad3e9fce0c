#include <doctest.h>

#include <cmath>
#include <random>

#include "quantconf/divergence.hpp"

using namespace quantconf;

namespace {

TrueClassVector tcv(std::vector<double> v, std::string model = "m", std::string ds = "d") {
    TrueClassVector t;
    t.values = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    t.model_id = std::move(model);
    t.dataset_id = std::move(ds);
    return t;
}

Eigen::VectorXd random_simplex(std::mt19937_64& rng, int k, bool sparse = false) {
    std::gamma_distribution<double> g(0.5, 1.0);
    std::bernoulli_distribution zero(0.2);
    Eigen::VectorXd p(k);
    for (int i = 0; i < k; ++i) p(i) = sparse && zero(rng) ? 0.0 : g(rng);
    if (p.sum() == 0.0) p(0) = 1.0;
    return p / p.sum();
}

}  // namespace

TEST_CASE("KL examples") {
    const Eigen::Vector2d p(1.0, 0.0);
    const Eigen::Vector2d q(0.5, 0.5);
    CHECK(std::abs(kl(p, q) - std::log(2.0)) < 1e-15);
    CHECK(kl(q, q) == 0.0);
    CHECK_THROWS_WITH(kl(q, p), "divergence: kl: support violation (q_i = 0 < p_i)");
    CHECK_THROWS_AS(kl(Eigen::Vector2d(0.5, 0.6), q), Error);
    CHECK_THROWS_AS(kl(Eigen::Vector3d(1, 0, 0), q), Error);
}

TEST_CASE("Jensen-Shannon examples") {
    const Eigen::Vector2d p(1.0, 0.0);
    const Eigen::Vector2d q(0.5, 0.5);
    const auto js = js_divergence(p, q);
    CHECK(std::abs(js.halved - 0.21576155433883565) < 1e-12);
    CHECK(std::abs(js.paper_expanded - 0.4315231086776713) < 1e-12);
    CHECK(std::abs(js.distance() - std::sqrt(0.21576155433883565)) < 1e-12);

    const auto flip = js_divergence(Eigen::Vector2d(0.25, 0.75), Eigen::Vector2d(0.75, 0.25));
    CHECK(std::abs(flip.halved - 0.13081203594113697) < 1e-12);

    const auto disjoint = js_divergence(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1));
    CHECK(std::abs(disjoint.halved - std::log(2.0)) < 1e-15);
    CHECK(js_divergence(q, q).halved == 0.0);

    const auto f = js_divergence(Eigen::Vector2f(1.0f, 0.0f), Eigen::Vector2f(0.5f, 0.5f));
    CHECK(f.halved == doctest::Approx(0.2157615f));
}

TEST_CASE("property: JSD symmetry, bounds and metric triangle inequality") {
    std::mt19937_64 rng(77);
    const double ln2 = std::log(2.0);
    for (int t = 0; t < 10000; ++t) {
        const int k = 2 + t % 15;
        const bool sparse = t % 3 == 0;
        const auto p = random_simplex(rng, k, sparse);
        const auto q = random_simplex(rng, k, sparse);
        const auto r = random_simplex(rng, k, sparse);
        const auto pq = js_divergence(p, q);
        const auto qp = js_divergence(q, p);
        CHECK(pq.halved == qp.halved);
        CHECK(pq.halved >= -1e-15);
        CHECK(pq.halved <= ln2 + 1e-12);
        CHECK(std::abs(pq.paper_expanded - 2 * pq.halved) < 1e-12);
        const double lhs = js_divergence(p, r).distance();
        CHECK(lhs <= pq.distance() + js_divergence(q, r).distance() + 1e-12);
    }
}

TEST_CASE("JSD on true-class vectors") {
    SUBCASE("identical vectors") {
        const auto r = jsd(tcv({0.2, 0.7, 0.1}), tcv({0.2, 0.7, 0.1}));
        CHECK(r.halved == 0.0);
        CHECK(r.distance == 0.0);
        CHECK(r.clamped == 0);
    }
    SUBCASE("normalization makes scale irrelevant") {
        const auto a = jsd(tcv({0.2, 0.4}), tcv({0.3, 0.3}));
        const auto b = jsd(tcv({0.1, 0.2}), tcv({0.5, 0.5}));
        CHECK(a.halved == doctest::Approx(b.halved).epsilon(1e-14));
        CHECK(a.paper_expanded == doctest::Approx(2 * a.halved).epsilon(1e-14));
    }
    SUBCASE("zeros are floored and counted") {
        const auto r = jsd(tcv({1.0, 0.0}), tcv({0.5, 0.5}));
        CHECK(r.clamped == 1);
        CHECK(std::abs(r.halved - 0.21576155433883565) < 1e-12);
    }
    SUBCASE("per-instance binary mode") {
        const auto r = jsd(tcv({1.0, 0.25}), tcv({0.5, 0.75}), JsdMode::per_instance);
        CHECK(std::abs(r.halved - (0.21576155433883565 + 0.13081203594113697) / 2) < 1e-12);
        CHECK(r.mode == JsdMode::per_instance);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(jsd(tcv({0.5}), tcv({0.5, 0.5})), Error);
        CHECK_THROWS_AS(jsd(tcv({}), tcv({})), Error);
    }
}

TEST_CASE("mean JSD by model") {
    std::vector<DatasetJsd> rows;
    auto row = [](std::string m, std::string d, double h) {
        JsdResult r;
        r.halved = h;
        r.paper_expanded = 2 * h;
        r.distance = std::sqrt(h);
        return DatasetJsd{std::move(m), std::move(d), r};
    };
    rows.push_back(row("zeta", "a", 0.04));
    rows.push_back(row("alpha", "a", 0.01));
    rows.push_back(row("zeta", "b", 0.16));
    const auto out = mean_jsd_by_model(rows);
    REQUIRE(out.size() == 2);
    CHECK(out[0].model_id == "alpha");
    CHECK(out[0].num_datasets == 1);
    CHECK(out[0].mean_halved == doctest::Approx(0.01));
    CHECK(out[1].model_id == "zeta");
    CHECK(out[1].mean_halved == doctest::Approx(0.10));
    CHECK(out[1].mean_paper_expanded == doctest::Approx(0.20));
    CHECK(out[1].mean_distance == doctest::Approx(0.3));
    CHECK(mean_jsd_by_model(std::vector<DatasetJsd>{}).empty());
}
