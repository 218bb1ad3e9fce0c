// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "quantconf/calibration.hpp"
#include "quantconf/divergence.hpp"
#include "quantconf/quantlab.hpp"
#include "quantconf/quantizer.hpp"
#include "quantconf/record.hpp"
#include "quantconf/report.hpp"
#include "quantconf/shift.hpp"
#include "quantconf/stats.hpp"
#include "transcription.hpp"

namespace fs = std::filesystem;
using namespace quantconf;

namespace {

constexpr double kEceTol = 1e-12;
constexpr double kEceSeconds = 5.0;
constexpr double kAceTol = 1e-12;
constexpr int kAceShuffles = 1000;
constexpr double kJsdLn2Slack = 1e-12;
constexpr double kJsdExpandedTol = 1e-12;
constexpr double kJsdExample = 0.215761;
constexpr double kJsdExampleTol = 1e-6;
constexpr double kTriangleTol = 1e-9;
constexpr int kTriangleTrials = 10000;
constexpr double kEntropyTol = 1e-9;
constexpr int kEntropyTrials = 100000;
constexpr double kTTol = 1e-4;
constexpr double kPTol = 5e-4;
constexpr double kQuadratureTol = 1e-8;
constexpr double kShiftTol = 1e-9;
constexpr int kShiftTrials = 1000;
constexpr int kRtnGroups = 100000;
const std::vector<std::uint64_t> kShippedSeeds{1, 7, 42, 1234};

struct Outcome {
    bool ok = true;
    std::string detail;
    void require(bool cond, const std::string& what) {
        if (!cond && ok) detail = what;
        ok = ok && cond;
    }
};

Eigen::VectorXd random_simplex(std::mt19937_64& rng, int k) {
    std::gamma_distribution<double> g(0.5, 1.0);
    Eigen::VectorXd p(k);
    for (int i = 0; i < k; ++i) p(i) = g(rng);
    return p / p.sum();
}

Outcome ece_oracle() {
    Outcome o;
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> nd(1, 100), md(1, 10), kd(2, 6);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int run = 0; run < 200; ++run) {
        const int n = nd(rng);
        const auto m = static_cast<std::size_t>(md(rng));
        std::vector<PredictiveDistribution> dists;
        std::vector<std::size_t> labels;
        std::vector<double> conf;
        std::vector<bool> correct;
        for (int i = 0; i < n; ++i) {
            const int k = kd(rng);
            PredictiveDistribution d;
            d.probs = random_simplex(rng, k);
            d.predicted_index = argmax(d.probs);
            d.confidence = d.probs(static_cast<Eigen::Index>(d.predicted_index));
            const auto label = std::uniform_int_distribution<std::size_t>(0, static_cast<std::size_t>(k) - 1)(rng);
            conf.push_back(d.confidence);
            correct.push_back(d.predicted_index == label);
            dists.push_back(std::move(d));
            labels.push_back(label);
        }
        const double got = ece(dists, labels, BinSpec{BinStrategy::equal_width, m, 0.0});
        worst = std::max(worst, std::abs(got - oracle::ece_brute_force(conf, correct, m)));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(worst <= kEceTol, fmt::format("max deviation {:.3g}", worst));
    o.require(secs < kEceSeconds, fmt::format("took {:.2f}s", secs));
    if (o.ok) o.detail = fmt::format("max deviation {:.3g}, {:.3f}s", worst, secs);
    return o;
}

Outcome ace_hand_case() {
    Outcome o;
    Eigen::MatrixXd probs(4, 2);
    probs << 0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.4, 0.6;
    const std::vector<std::size_t> labels{0, 0, 1, 0};
    const double v = ace(probs, labels, 2);
    o.require(std::abs(v - 0.15) <= kAceTol, fmt::format("hand case gave {:.17g}", v));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 64;
    Eigen::MatrixXd p(n, 3);
    std::vector<std::size_t> l(n);
    for (int i = 0; i < n; ++i) {
        Eigen::Vector3d r(std::round(u(rng) * 8) + 1, u(rng) + 0.1, u(rng) + 0.1);
        p.row(i) = (r / r.sum()).transpose();
        l[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::floor(u(rng) * 3));
    }
    const double base = ace(p, l, 8);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int s = 0; s < kAceShuffles && o.ok; ++s) {
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::MatrixXd p2(n, 3);
        std::vector<std::size_t> l2(n);
        for (int i = 0; i < n; ++i) {
            p2.row(i) = p.row(perm[i]);
            l2[static_cast<std::size_t>(i)] = l[static_cast<std::size_t>(perm[i])];
        }
        o.require(ace(p2, l2, 8) == base, fmt::format("shuffle {} changed ACE", s));
    }
    if (o.ok) o.detail = fmt::format("hand case {:.17g}, {} shuffles invariant", v, kAceShuffles);
    return o;
}

Outcome jsd_properties() {
    Outcome o;
    const double ln2 = std::log(2.0);
    const auto ex = js_divergence(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.5, 0.5));
    o.require(std::abs(ex.halved - kJsdExample) <= kJsdExampleTol, fmt::format("example gave {}", ex.halved));
    std::mt19937_64 rng(123);
    double worst_triangle = -1.0;
    for (int t = 0; t < kTriangleTrials; ++t) {
        const int k = 2 + t % 12;
        const auto p = random_simplex(rng, k);
        const auto q = random_simplex(rng, k);
        const auto r = random_simplex(rng, k);
        const auto pq = js_divergence(p, q);
        o.require(pq.halved == js_divergence(q, p).halved, "asymmetric");
        o.require(js_divergence(p, p).halved == 0.0, "jsd(p,p) != 0");
        o.require(pq.halved <= ln2 + kJsdLn2Slack, "halved above ln 2");
        o.require(std::abs(pq.paper_expanded - 2 * pq.halved) <= kJsdExpandedTol, "expanded != 2 halved");
        const double gap = js_divergence(p, r).distance() - pq.distance() - js_divergence(q, r).distance();
        worst_triangle = std::max(worst_triangle, gap);
    }
    o.require(worst_triangle <= kTriangleTol, fmt::format("triangle violated by {}", worst_triangle));
    if (o.ok) o.detail = fmt::format("example {:.9f}, {} triples", ex.halved, kTriangleTrials);
    return o;
}

Outcome entropy_bounds() {
    Outcome o;
    const double h4 = entropy(Eigen::Vector4d::Constant(0.25));
    o.require(std::abs(h4 - 1.386294) <= kEntropyTol + 5e-7, fmt::format("uniform gave {}", h4));
    o.require(std::abs(h4 - std::log(4.0)) <= kEntropyTol, "uniform != ln 4");
    o.require(format_cents(percent_cents(h4)) == "138.63", "uniform does not render 138.63");
    o.require(entropy(Eigen::Vector3d(0.0, 1.0, 0.0)) == 0.0, "one-hot not exactly 0");
    std::mt19937_64 rng(321);
    for (int t = 0; t < kEntropyTrials && o.ok; ++t) {
        const int k = 2 + t % 20;
        const auto p = random_simplex(rng, k);
        const double h = entropy(p);
        o.require(h >= 0.0 && h <= std::log(static_cast<double>(k)) + 1e-12, fmt::format("bound broken, K={}", k));
    }
    if (o.ok) o.detail = fmt::format("uniform-4 {:.12f}, {} random distributions", h4, kEntropyTrials);
    return o;
}

Outcome t_test() {
    Outcome o;
    const std::vector<double> a{0.1, 0.2, 0.3};
    const std::vector<double> b{0.0, 0.0, 0.0};
    const auto r = paired_t_test(a, b);
    o.require(std::abs(r.t_stat - 3.4641) <= kTTol, fmt::format("t = {}", r.t_stat));
    o.require(std::abs(r.p_value - 0.0742) <= kPTol, fmt::format("p = {}", r.p_value));
    o.require(std::abs(r.p_value - oracle::t_two_sided_df2(r.t_stat)) <= 1e-12, "df=2 closed form mismatch");
    double worst = 0.0;
    for (double df : {2.0, 5.0, 30.0, 1000.0}) {
        for (double t = -10.0; t <= 10.0; t += 0.25) {
            worst = std::max(worst, std::abs(student_t_two_sided(t, df) - oracle::t_two_sided_quadrature(t, df)));
        }
    }
    o.require(worst <= kQuadratureTol, fmt::format("quadrature deviation {:.3g}", worst));
    if (o.ok) o.detail = fmt::format("t {:.6f}, p {:.6f}, quadrature deviation {:.2g}", r.t_stat, r.p_value, worst);
    return o;
}

Outcome shift_profiles() {
    Outcome o;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> nd(1, 500), md(1, 20);
    double worst = 0.0;
    for (int t = 0; t < kShiftTrials; ++t) {
        const int n = nd(rng);
        const auto m = static_cast<std::size_t>(md(rng));
        const double start = (t % 3) * 0.25;
        Eigen::VectorXd f(n), q(n);
        for (int i = 0; i < n; ++i) {
            f(i) = start + (1 - start) * u(rng);
            q(i) = u(rng);
        }
        const BinSpec spec{BinStrategy::equal_width, m, start};
        const auto fwd = shift_profile(f, q, spec);
        const auto rev = shift_profile(f, q, f, spec);
        std::size_t count = 0;
        double weighted = 0.0;
        for (std::size_t b = 0; b < m; ++b) {
            count += fwd.bins[b].count;
            if (fwd.bins[b].count == 0) continue;
            weighted += static_cast<double>(fwd.bins[b].count) * *fwd.bins[b].mean_signed;
            o.require(*rev.bins[b].mean_signed == -*fwd.bins[b].mean_signed, "swap did not negate a bin");
        }
        o.require(count == static_cast<std::size_t>(n), "counts do not partition");
        worst = std::max(worst, std::abs(weighted - n * fwd.overall_mean_signed));
    }
    o.require(worst <= kShiftTol, fmt::format("weighted-mean deviation {:.3g}", worst));
    o.require(default_range_start(ShiftKey::prediction_confidence, 2) == 0.5, "binary start");
    o.require(default_range_start(ShiftKey::prediction_confidence, 4) == 0.25, "4-way start");
    if (o.ok) o.detail = fmt::format("{} runs, weighted-mean deviation {:.2g}", kShiftTrials, worst);
    return o;
}

Outcome quantizer() {
    Outcome o;
    std::mt19937_64 rng(99);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<int> bits_d(2, 8), width_d(1, 128);
    for (int g = 0; g < kRtnGroups && o.ok; ++g) {
        QuantConfig cfg;
        cfg.num_bits = bits_d(rng);
        const int width = width_d(rng);
        cfg.group_size = width;
        Eigen::RowVectorXd w(width);
        for (int j = 0; j < width; ++j) w(j) = z(rng);
        const auto q = quantize_rtn(w, cfg);
        const double s = q.scales(0, 0);
        for (int j = 0; j < width; ++j) {
            const double err = std::abs(w(j) - q.codes(0, j) * s);
            o.require(err <= s / 2, fmt::format("group {} error {} > scale/2 {}", g, err, s / 2));
        }
    }
    QuantConfig four;
    four.num_bits = 4;
    four.group_size = 4;
    const auto ex = quantize_rtn(Eigen::RowVector4d(1.0, -0.5, 0.25, 0.7), four);
    o.require(ex.codes == (Eigen::RowVector4i(7, -4, 2, 5)), "example codes differ");

    const auto model = ToyModel::build(ModelDescriptor{});
    for (std::uint64_t seed : kShippedSeeds) {
        for (int bits : {3, 4}) {
            QuantConfig cfg;
            cfg.num_bits = bits;
            cfg.method = QuantMethod::error_compensated;
            const auto qm = quantize_model(model, cfg, calibration_states(model, seed));
            for (const auto& st : qm.stats) {
                o.require(st.calib_error <= st.rtn_calib_error,
                          fmt::format("seed {} {}-bit: {} > {}", seed, bits, st.calib_error, st.rtn_calib_error));
            }
        }
    }

    Eigen::MatrixXd w(6, 16);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = z(rng);
    QuantConfig comp;
    comp.group_size = 8;
    comp.method = QuantMethod::error_compensated;
    const Eigen::MatrixXd diag_x = Eigen::VectorXd::LinSpaced(16, 0.5, 2.0).asDiagonal();
    const auto a = quantize_compensated(w, diag_x, comp);
    const auto b = quantize_rtn(w, comp);
    o.require(a.codes == b.codes && a.scales == b.scales, "diagonal Hessian differs from RTN");
    if (o.ok) o.detail = fmt::format("{} groups, seeds {{1,7,42,1234}} at 3 and 4 bits", kRtnGroups);
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

Outcome end_to_end() {
    Outcome o;
    const fs::path work = fs::current_path() / "acceptance_work";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string cli = QUANTCONF_CLI;
    std::vector<std::string> reports;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir = work / fmt::format("run{}", rep);
        o.require(run(fmt::format("\"{}\" fixtures --seed 42 --out \"{}\"", cli, dir.string())) == 0, "fixtures failed");
        std::string all;
        for (const char* fmt_name : {"markdown", "json", "csv"}) {
            const fs::path out = dir / fmt::format("report.{}", fmt_name);
            o.require(run(fmt::format("\"{}\" compare --manifest \"{}\" --format {} --out \"{}\"", cli,
                                      (dir / "manifest.json").string(), fmt_name, out.string())) == 0,
                      "compare failed");
            all += slurp(out);
        }
        all += slurp(dir / "full.jsonl") + slurp(dir / "quantized.jsonl");
        reports.push_back(all);
    }
    o.require(!reports[0].empty() && reports[0] == reports[1], "repeat runs differ");

    // identical full and quantized runs
    const fs::path dir = work / "run0";
    fs::copy_file(dir / "full.jsonl", dir / "full_copy.jsonl", fs::copy_options::overwrite_existing);
    RunManifest m = read_manifest(dir / "manifest.json");
    m.full_run_path = "full.jsonl";
    m.quantized_run_path = "full_copy.jsonl";
    {
        std::ofstream out(dir / "identity.json", std::ios::binary);
        out << serialize_manifest(m);
    }
    const fs::path id_json = dir / "identity_report.json";
    o.require(run(fmt::format("\"{}\" compare --manifest \"{}\" --format json --out \"{}\"", cli,
                              (dir / "identity.json").string(), id_json.string())) == 0,
              "identity compare failed");
    if (o.ok) {
        const auto rep = parse_report_json(slurp(id_json));
        const auto& c = rep.cells.at(0);
        o.require(c.deltas.accuracy == 0 && c.deltas.ce == 0 && c.deltas.conf_mean == 0 && c.deltas.conf_true == 0 &&
                      c.deltas.entropy_mean == 0 && c.deltas.conf_err.value_or(0) == 0,
                  "nonzero delta on identical runs");
        o.require(c.jsd.halved == 0 && c.jsd.paper_expanded == 0, "nonzero JSD on identical runs");
        for (const auto* t : {&c.tests.conf, &c.tests.conf_err, &c.tests.conf_true, &c.tests.entropy}) {
            o.require(!(*t && (*t)->significant), "significance flag on identical runs");
        }
    }
    if (o.ok) o.detail = fmt::format("{} bytes identical across runs", reports[0].size());
    return o;
}

Outcome table_rows() {
    Outcome o;
    const std::string md = render(transcription::report(), ReportFormat::markdown);
    const std::vector<std::string> rows{
        "| BLOOM-7.1B | 65.03 (-1.56) | 15.57 (+1.06) |",
        "| BLOOM | 96.26 | 95.64 | 46.24 | 12.87 |",
        "| + GPTQ | 96.30 | 95.62 | 45.23⋆ | 12.89 |",
    };
    for (const auto& r : rows) o.require(md.find(r) != std::string::npos, "missing row: " + r);
    if (o.ok) o.detail = "Arc Easy BLOOM-7.1B and HellaSwag BLOOM rows";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"ece-oracle-equivalence", ece_oracle},
        {"ace-hand-case-and-permutation", ace_hand_case},
        {"jsd-properties", jsd_properties},
        {"entropy", entropy_bounds},
        {"paired-t-test", t_test},
        {"shift-profiles", shift_profiles},
        {"quantizer", quantizer},
        {"end-to-end-determinism", end_to_end},
        {"table-rows-render", table_rows},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
        failures += o.ok ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
