#include "quantconf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "quantconf/error.hpp"

namespace quantconf {
namespace {

constexpr const char* kModule = "cli_report";
constexpr const char* kStar = "⋆";

using Json = nlohmann::ordered_json;

// ---- JSON encoding -------------------------------------------------------

Json opt_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_opt(const Json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

Json to_json(const RunMetrics& m) {
    Json j;
    j["n"] = m.n;
    j["accuracy"] = m.accuracy;
    j["ce_kind"] = to_string(m.ce_kind);
    j["ce_bins"] = m.ce_bins;
    j["ce"] = m.ce;
    j["conf_mean"] = m.conf_mean;
    j["conf_err"] = opt_number(m.conf_err);
    j["conf_true"] = m.conf_true;
    j["entropy_mean"] = m.entropy_mean;
    return j;
}

RunMetrics metrics_from_json(const Json& j) {
    RunMetrics m;
    m.n = j.at("n").get<std::size_t>();
    m.accuracy = j.at("accuracy").get<double>();
    const auto kind = j.at("ce_kind").get<std::string>();
    if (kind != "ECE" && kind != "ACE") throw Error(kModule, "report: bad ce_kind " + kind);
    m.ce_kind = kind == "ECE" ? CalibrationKind::ece : CalibrationKind::ace;
    m.ce_bins = j.at("ce_bins").get<std::size_t>();
    m.ce = j.at("ce").get<double>();
    m.conf_mean = j.at("conf_mean").get<double>();
    m.conf_err = read_opt(j, "conf_err");
    m.conf_true = j.at("conf_true").get<double>();
    m.entropy_mean = j.at("entropy_mean").get<double>();
    return m;
}

Json to_json(const MetricDeltas& d) {
    Json j;
    j["accuracy"] = d.accuracy;
    j["ce"] = d.ce;
    j["conf_mean"] = d.conf_mean;
    j["conf_err"] = opt_number(d.conf_err);
    j["conf_true"] = d.conf_true;
    j["entropy_mean"] = d.entropy_mean;
    return j;
}

MetricDeltas deltas_from_json(const Json& j) {
    MetricDeltas d;
    d.accuracy = j.at("accuracy").get<double>();
    d.ce = j.at("ce").get<double>();
    d.conf_mean = j.at("conf_mean").get<double>();
    d.conf_err = read_opt(j, "conf_err");
    d.conf_true = j.at("conf_true").get<double>();
    d.entropy_mean = j.at("entropy_mean").get<double>();
    return d;
}

Json to_json(const std::optional<PairedTestResult>& t) {
    if (!t) return Json(nullptr);
    Json j;
    j["n"] = t->n;
    j["mean_diff"] = t->mean_diff;
    // Infinite t (degenerate case) is stored as null; its sign follows mean_diff.
    j["t_stat"] = std::isfinite(t->t_stat) ? Json(t->t_stat) : Json(nullptr);
    j["df"] = t->df;
    j["p_value"] = t->p_value;
    j["significant"] = t->significant;
    j["alpha"] = t->alpha;
    j["degenerate"] = t->degenerate;
    return j;
}

std::optional<PairedTestResult> test_from_json(const Json& j) {
    if (j.is_null()) return std::nullopt;
    PairedTestResult t;
    t.n = j.at("n").get<std::size_t>();
    t.mean_diff = j.at("mean_diff").get<double>();
    const auto& ts = j.at("t_stat");
    t.t_stat = ts.is_null() ? std::copysign(std::numeric_limits<double>::infinity(), t.mean_diff)
                            : ts.get<double>();
    t.df = j.at("df").get<std::size_t>();
    t.p_value = j.at("p_value").get<double>();
    t.significant = j.at("significant").get<bool>();
    t.alpha = j.at("alpha").get<double>();
    t.degenerate = j.at("degenerate").get<bool>();
    return t;
}

Json to_json(const ShiftProfile& p) {
    Json j;
    j["key"] = to_string(p.key);
    j["n"] = p.n;
    j["overall_mean_signed"] = p.overall_mean_signed;
    j["argmax_abs_bin"] = p.argmax_abs_bin ? Json(*p.argmax_abs_bin) : Json(nullptr);
    Json bins = Json::array();
    for (const auto& b : p.bins) {
        Json bj;
        bj["lo"] = b.lo;
        bj["hi"] = b.hi;
        bj["count"] = b.count;
        bj["mean_signed"] = opt_number(b.mean_signed);
        bj["mean_abs"] = opt_number(b.mean_abs);
        bins.push_back(bj);
    }
    j["bins"] = bins;
    return j;
}

ShiftKey shift_key_from(const std::string& s) {
    if (s == "prediction") return ShiftKey::prediction_confidence;
    if (s == "true-class") return ShiftKey::true_class_confidence;
    throw Error(kModule, "report: bad shift key " + s);
}

ShiftProfile shift_from_json(const Json& j) {
    ShiftProfile p;
    p.key = shift_key_from(j.at("key").get<std::string>());
    p.n = j.at("n").get<std::size_t>();
    p.overall_mean_signed = j.at("overall_mean_signed").get<double>();
    if (!j.at("argmax_abs_bin").is_null()) p.argmax_abs_bin = j.at("argmax_abs_bin").get<std::size_t>();
    for (const auto& bj : j.at("bins")) {
        ShiftBin b;
        b.lo = bj.at("lo").get<double>();
        b.hi = bj.at("hi").get<double>();
        b.count = bj.at("count").get<std::size_t>();
        b.mean_signed = read_opt(bj, "mean_signed");
        b.mean_abs = read_opt(bj, "mean_abs");
        p.bins.push_back(b);
    }
    return p;
}

Json to_json(const std::vector<ReliabilityBin>& bins) {
    Json arr = Json::array();
    for (const auto& b : bins) {
        Json j;
        j["lo"] = b.lo;
        j["hi"] = b.hi;
        j["count"] = b.count;
        j["mean_confidence"] = opt_number(b.mean_confidence);
        j["accuracy"] = opt_number(b.accuracy);
        arr.push_back(j);
    }
    return arr;
}

std::vector<ReliabilityBin> reliability_from_json(const Json& arr) {
    std::vector<ReliabilityBin> out;
    for (const auto& j : arr) {
        ReliabilityBin b;
        b.lo = j.at("lo").get<double>();
        b.hi = j.at("hi").get<double>();
        b.count = j.at("count").get<std::size_t>();
        b.mean_confidence = read_opt(j, "mean_confidence");
        b.accuracy = read_opt(j, "accuracy");
        out.push_back(b);
    }
    return out;
}

Json to_json(const CompareOptions& o) {
    Json j;
    j["bins"] = o.bins;
    j["bin_start"] = opt_number(o.bin_start);
    j["alpha"] = o.alpha;
    j["conf_mode"] = to_string(o.conf_mode);
    j["length_norm"] = to_string(o.length_norm);
    j["jsd_variant"] = to_string(o.jsd_variant);
    j["jsd_mode"] = to_string(o.jsd_mode);
    j["ce"] = to_string(o.ce);
    j["shift_key"] = to_string(o.shift_key);
    j["strict"] = o.strict;
    return j;
}

CompareOptions options_from_json(const Json& j) {
    CompareOptions o;
    o.bins = j.at("bins").get<std::size_t>();
    o.bin_start = read_opt(j, "bin_start");
    o.alpha = j.at("alpha").get<double>();
    o.conf_mode = j.at("conf_mode").get<std::string>() == "raw" ? ConfidenceMode::raw : ConfidenceMode::softmax;
    o.length_norm = j.at("length_norm").get<std::string>() == "per_token_mean" ? LengthNorm::per_token_mean
                                                                               : LengthNorm::none;
    o.jsd_variant = j.at("jsd_variant").get<std::string>() == "expanded" ? JsdVariant::paper_expanded
                                                                      : JsdVariant::halved;
    o.jsd_mode = j.at("jsd_mode").get<std::string>() == "per-instance" ? JsdMode::per_instance
                                                                       : JsdMode::l1_normalized;
    const auto ce = j.at("ce").get<std::string>();
    o.ce = ce == "ece" ? CeSelection::ece : (ce == "ace" ? CeSelection::ace : CeSelection::automatic);
    o.shift_key = shift_key_from(j.at("shift_key").get<std::string>());
    o.strict = j.at("strict").get<bool>();
    return o;
}

Json to_json(const JsdResult& r) {
    Json j;
    j["mode"] = to_string(r.mode);
    j["halved"] = r.halved;
    j["paper_expanded"] = r.paper_expanded;
    j["distance"] = r.distance;
    j["clamped"] = r.clamped;
    return j;
}

JsdResult jsd_from_json(const Json& j) {
    JsdResult r;
    r.mode = j.at("mode").get<std::string>() == "per-instance" ? JsdMode::per_instance : JsdMode::l1_normalized;
    r.halved = j.at("halved").get<double>();
    r.paper_expanded = j.at("paper_expanded").get<double>();
    r.distance = j.at("distance").get<double>();
    r.clamped = j.at("clamped").get<std::size_t>();
    return r;
}

Json to_json(const CellReport& c) {
    Json j;
    j["model_id"] = c.model_id;
    j["quantized_model_id"] = c.quantized_model_id;
    j["dataset_id"] = c.dataset_id;
    j["quant_label"] = c.quant_label;
    j["task_kind"] = to_string(c.task_kind);
    j["num_candidates"] = c.num_candidates;
    j["n_pairs"] = c.n_pairs;
    j["unmatched_full"] = c.unmatched_full;
    j["unmatched_quantized"] = c.unmatched_quantized;
    j["full"] = to_json(c.full);
    j["quantized"] = to_json(c.quantized);
    j["deltas"] = to_json(c.deltas);
    Json tests;
    tests["conf"] = to_json(c.tests.conf);
    tests["conf_err"] = to_json(c.tests.conf_err);
    tests["conf_true"] = to_json(c.tests.conf_true);
    tests["entropy"] = to_json(c.tests.entropy);
    j["tests"] = tests;
    j["shift"] = to_json(c.shift);
    j["jsd"] = to_json(c.jsd);
    Json rel;
    rel["full"] = to_json(c.reliability_full);
    rel["quantized"] = to_json(c.reliability_quantized);
    j["reliability"] = rel;
    return j;
}

CellReport cell_from_json(const Json& j) {
    CellReport c;
    c.model_id = j.at("model_id").get<std::string>();
    c.quantized_model_id = j.at("quantized_model_id").get<std::string>();
    c.dataset_id = j.at("dataset_id").get<std::string>();
    c.quant_label = j.at("quant_label").get<std::string>();
    c.task_kind = task_kind_from_string(j.at("task_kind").get<std::string>());
    c.num_candidates = j.at("num_candidates").get<std::size_t>();
    c.n_pairs = j.at("n_pairs").get<std::size_t>();
    c.unmatched_full = j.at("unmatched_full").get<std::size_t>();
    c.unmatched_quantized = j.at("unmatched_quantized").get<std::size_t>();
    c.full = metrics_from_json(j.at("full"));
    c.quantized = metrics_from_json(j.at("quantized"));
    c.deltas = deltas_from_json(j.at("deltas"));
    const auto& t = j.at("tests");
    c.tests.conf = test_from_json(t.at("conf"));
    c.tests.conf_err = test_from_json(t.at("conf_err"));
    c.tests.conf_true = test_from_json(t.at("conf_true"));
    c.tests.entropy = test_from_json(t.at("entropy"));
    c.shift = shift_from_json(j.at("shift"));
    c.jsd = jsd_from_json(j.at("jsd"));
    c.reliability_full = reliability_from_json(j.at("reliability").at("full"));
    c.reliability_quantized = reliability_from_json(j.at("reliability").at("quantized"));
    return c;
}

// ---- markdown ------------------------------------------------------------

std::string pct(double fraction) { return format_cents(percent_cents(fraction)); }

std::string pct_opt(const std::optional<double>& v) { return v ? pct(*v) : std::string("-"); }

// "65.03 (-1.56)": the change is taken between the rounded values, so it
// always matches the displayed numbers.
std::string with_delta(double full, double quant) {
    const long long f = percent_cents(full);
    return format_cents(f) + " (" + format_cents(percent_cents(quant) - f, true) + ")";
}

std::string starred(const std::string& cell, const std::optional<PairedTestResult>& t) {
    return (t && t->significant) ? cell + kStar : cell;
}

std::string fixed6(double v, bool with_sign = false) {
    return with_sign ? fmt::format("{:+.6f}", v) : fmt::format("{:.6f}", v);
}

template <typename Key>
std::vector<std::string> unique_in_order(const std::vector<CellReport>& cells, Key key) {
    std::vector<std::string> out;
    for (const auto& c : cells) {
        const std::string k = key(c);
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    return out;
}

std::string render_markdown(const ComparisonReport& r) {
    const auto& o = r.options;
    std::string md = "# Quantization impact report\n\n";
    md += fmt::format("- confidence: {} over candidates (length normalization: {})\n", to_string(o.conf_mode),
                      to_string(o.length_norm));
    md += fmt::format("- calibration error: {} with {} bins{}\n", to_string(o.ce), o.bins,
                      o.ce == CeSelection::automatic ? " (ECE for binary tasks, ACE for multiclass)" : "");
    md += fmt::format("- significance: two-sided paired t-test, alpha = {}; {} marks p < alpha\n", o.alpha, kStar);
    md += fmt::format("- Jensen-Shannon: {} variant on {} true-class vectors\n\n", to_string(o.jsd_variant),
                      to_string(o.jsd_mode));

    const auto models = unique_in_order(r.cells, [](const CellReport& c) { return c.model_id; });
    const auto datasets = unique_in_order(r.cells, [](const CellReport& c) { return c.dataset_id; });
    auto find = [&](const std::string& model, const std::string& dataset) -> const CellReport* {
        for (const auto& c : r.cells) {
            if (c.model_id == model && c.dataset_id == dataset) return &c;
        }
        return nullptr;
    };

    md += "## Accuracy and calibration error\n\n";
    md += "Percentages; parentheses hold the change after quantization (quantized - full).\n\n";
    md += "| Model |";
    std::string rule = "|:---|";
    for (const auto& d : datasets) {
        const CellReport* any = nullptr;
        for (const auto& c : r.cells) {
            if (c.dataset_id == d) {
                any = &c;
                break;
            }
        }
        md += fmt::format(" {} Acc. | {} CE ({}) |", d, d, to_string(any->full.ce_kind));
        rule += "---:|---:|";
    }
    md += "\n" + rule + "\n";
    for (const auto& m : models) {
        md += "| " + m + " |";
        for (const auto& d : datasets) {
            const CellReport* c = find(m, d);
            if (!c) {
                md += " - | - |";
                continue;
            }
            md += " " + with_delta(c->full.accuracy, c->quantized.accuracy) + " | " +
                  with_delta(c->full.ce, c->quantized.ce) + " |";
        }
        md += "\n";
    }

    for (const auto& d : datasets) {
        md += "\n## Confidence on " + d + "\n\n";
        md += "| Model | Conf. | Conf_err | Conf_true | H |\n|:---|---:|---:|---:|---:|\n";
        for (const auto& c : r.cells) {
            if (c.dataset_id != d) continue;
            md += fmt::format("| {} | {} | {} | {} | {} |\n", c.model_id, pct(c.full.conf_mean),
                              pct_opt(c.full.conf_err), pct(c.full.conf_true), pct(c.full.entropy_mean));
            md += fmt::format("| + {} | {} | {} | {} | {} |\n", c.quant_label,
                              starred(pct(c.quantized.conf_mean), c.tests.conf),
                              c.quantized.conf_err ? starred(pct(*c.quantized.conf_err), c.tests.conf_err)
                                                   : std::string("-"),
                              starred(pct(c.quantized.conf_true), c.tests.conf_true),
                              starred(pct(c.quantized.entropy_mean), c.tests.entropy));
        }
    }

    md += "\n## Confidence shifts and Jensen-Shannon divergence\n\n";
    md += "| Model | Dataset | n | JSD (halved) | JSD (expanded) | JS distance | Largest-shift bin | Mean abs shift | "
          "Mean shift |\n|:---|:---|---:|---:|---:|---:|:---|---:|---:|\n";
    for (const auto& c : r.cells) {
        std::string bin = "-";
        std::string abs_shift = "-";
        if (c.shift.argmax_abs_bin) {
            const auto& b = c.shift.bins[*c.shift.argmax_abs_bin];
            bin = fmt::format("[{:.2f}, {:.2f}]", b.lo, b.hi);
            abs_shift = pct(*b.mean_abs);
        }
        md += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", c.model_id, c.dataset_id, c.n_pairs,
                          fixed6(c.jsd.halved), fixed6(c.jsd.paper_expanded), fixed6(c.jsd.distance), bin, abs_shift,
                          format_cents(percent_cents(c.shift.overall_mean_signed), true));
    }
    return md;
}

// ---- csv -----------------------------------------------------------------

std::string num(double v) { return fmt::format("{:.17g}", v); }
std::string num_opt(const std::optional<double>& v) { return v ? num(*v) : std::string{}; }

void csv_test_cols(std::string& row, const std::optional<PairedTestResult>& t) {
    row += ',' + (t ? num(t->p_value) : std::string{});
    row += ',' + (t ? std::string(t->significant ? "true" : "false") : std::string{});
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string render_csv(const ComparisonReport& r) {
    std::string out =
        "model_id,quantized_model_id,dataset_id,task_kind,ce_kind,ce_bins,n,"
        "accuracy_full,accuracy_quantized,accuracy_delta,"
        "ce_full,ce_quantized,ce_delta,"
        "conf_full,conf_quantized,conf_delta,conf_p,conf_significant,"
        "conf_err_full,conf_err_quantized,conf_err_delta,conf_err_p,conf_err_significant,"
        "conf_true_full,conf_true_quantized,conf_true_delta,conf_true_p,conf_true_significant,"
        "entropy_full,entropy_quantized,entropy_delta,entropy_p,entropy_significant,"
        "jsd_halved,jsd_expanded,js_distance,shift_overall_mean_signed,shift_argmax_bin\n";
    for (const auto& c : r.cells) {
        std::string row = fmt::format("{},{},{},{},{},{},{}", csv_field(c.model_id), csv_field(c.quantized_model_id),
                                      csv_field(c.dataset_id), to_string(c.task_kind),
                                      to_string(c.full.ce_kind), c.full.ce_bins, c.n_pairs);
        row += ',' + num(c.full.accuracy) + ',' + num(c.quantized.accuracy) + ',' + num(c.deltas.accuracy);
        row += ',' + num(c.full.ce) + ',' + num(c.quantized.ce) + ',' + num(c.deltas.ce);
        row += ',' + num(c.full.conf_mean) + ',' + num(c.quantized.conf_mean) + ',' + num(c.deltas.conf_mean);
        csv_test_cols(row, c.tests.conf);
        row += ',' + num_opt(c.full.conf_err) + ',' + num_opt(c.quantized.conf_err) + ',' +
               num_opt(c.deltas.conf_err);
        csv_test_cols(row, c.tests.conf_err);
        row += ',' + num(c.full.conf_true) + ',' + num(c.quantized.conf_true) + ',' + num(c.deltas.conf_true);
        csv_test_cols(row, c.tests.conf_true);
        row += ',' + num(c.full.entropy_mean) + ',' + num(c.quantized.entropy_mean) + ',' +
               num(c.deltas.entropy_mean);
        csv_test_cols(row, c.tests.entropy);
        row += ',' + num(c.jsd.halved) + ',' + num(c.jsd.paper_expanded) + ',' + num(c.jsd.distance);
        row += ',' + num(c.shift.overall_mean_signed) + ',' +
               (c.shift.argmax_abs_bin ? std::to_string(*c.shift.argmax_abs_bin) : std::string{});
        out += row + '\n';
    }
    return out;
}

std::string render_json(const ComparisonReport& r) {
    Json j;
    j["options"] = to_json(r.options);
    Json cells = Json::array();
    for (const auto& c : r.cells) cells.push_back(to_json(c));
    j["cells"] = cells;
    return j.dump(2) + "\n";
}

}  // namespace

long long percent_cents(double fraction) { return std::llround(fraction * 10000.0); }

std::string format_cents(long long cents, bool with_sign) {
    const char* sign = cents < 0 ? "-" : (with_sign ? "+" : "");
    const long long mag = std::llabs(cents);
    return fmt::format("{}{}.{:02d}", sign, mag / 100, mag % 100);
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw Error(kModule, "format must be markdown, csv or json");
}

std::string render(const ComparisonReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::markdown: return render_markdown(report);
        case ReportFormat::csv: return render_csv(report);
        case ReportFormat::json: return render_json(report);
    }
    return {};
}

ComparisonReport parse_report_json(const std::string& text) {
    try {
        const Json j = Json::parse(text);
        ComparisonReport r;
        r.options = options_from_json(j.at("options"));
        for (const auto& c : j.at("cells")) r.cells.push_back(cell_from_json(c));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, std::string("report JSON: ") + e.what());
    }
}

std::string render_jsd_table(const std::vector<ModelJsd>& rows, ReportFormat format) {
    if (format == ReportFormat::json) {
        Json arr = Json::array();
        for (const auto& r : rows) {
            Json j;
            j["model_id"] = r.model_id;
            j["num_datasets"] = r.num_datasets;
            j["mean_jsd_halved"] = r.mean_halved;
            j["mean_jsd_expanded"] = r.mean_paper_expanded;
            j["mean_js_distance"] = r.mean_distance;
            arr.push_back(j);
        }
        return arr.dump(2) + "\n";
    }
    if (format == ReportFormat::csv) {
        std::string out = "model_id,num_datasets,mean_jsd_halved,mean_jsd_expanded,mean_js_distance\n";
        for (const auto& r : rows) {
            out += fmt::format("{},{},{},{},{}\n", csv_field(r.model_id), r.num_datasets, num(r.mean_halved),
                               num(r.mean_paper_expanded), num(r.mean_distance));
        }
        return out;
    }
    std::string md = "| Model | Datasets | Mean JSD (halved) | Mean JSD (expanded) | Mean JS distance |\n"
                     "|:---|---:|---:|---:|---:|\n";
    for (const auto& r : rows) {
        md += fmt::format("| {} | {} | {} | {} | {} |\n", r.model_id, r.num_datasets, fixed6(r.mean_halved),
                          fixed6(r.mean_paper_expanded), fixed6(r.mean_distance));
    }
    return md;
}

}  // namespace quantconf
