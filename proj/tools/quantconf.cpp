// quantconf: compare full-precision and quantized prediction logs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "quantconf/compare.hpp"
#include "quantconf/error.hpp"
#include "quantconf/log.hpp"
#include "quantconf/quantlab.hpp"
#include "quantconf/record.hpp"
#include "quantconf/report.hpp"
#include "quantconf/shift.hpp"

namespace qc = quantconf;

namespace {

// Values from a JSON config file fill in every option not given on the
// command line. Keys are long option names without the leading dashes.
void apply_config(CLI::App& app, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw qc::Error("cli_report", "cannot open config " + path);
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw qc::Error("cli_report", "config: " + std::string(e.what()));
    }
    if (!cfg.is_object()) throw qc::Error("cli_report", "config must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        CLI::Option* opt = nullptr;
        try {
            opt = app.get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            qc::log::warn("config: ignoring unknown key '" + key + "'");
            continue;
        }
        if (opt->count() > 0) continue;
        auto as_text = [](const nlohmann::json& v) {
            return v.is_string() ? v.get<std::string>() : v.dump();
        };
        if (value.is_array()) {
            for (const auto& v : value) opt->add_result(as_text(v));
        } else if (value.is_boolean()) {
            if (value.get<bool>()) opt->add_result("true");
        } else {
            opt->add_result(as_text(value));
        }
        opt->run_callback();
    }
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw qc::Error("cli_report", "cannot write " + out_path);
    out << text;
}

std::vector<qc::RunManifest> load_manifests(const std::vector<std::string>& paths) {
    std::vector<qc::RunManifest> out;
    for (const auto& p : paths) out.push_back(qc::read_manifest(p));
    return out;
}

std::optional<double> parse_bin_start(const std::string& s) {
    if (s == "auto") return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw qc::Error("cli_report", "--bin-start must be 'auto' or a number, got '" + s + "'");
    }
}

int run_validate(const std::string& path) {
    const auto records = qc::read_records(path);
    if (records.empty()) {
        std::cerr << "validate: no records in " << path << "\n";
        return 1;
    }
    std::cout << records.size() << " records OK\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audit how weight quantization shifts model confidence and calibration"};
    app.require_subcommand(1);

    // validate
    auto* validate = app.add_subcommand("validate", "Check a record file against the schema and invariants");
    std::string validate_path;
    validate->add_option("records", validate_path, "Newline-delimited JSON record file")->required();

    // fixtures
    auto* fixtures = app.add_subcommand("fixtures", "Generate a paired fixture with the toy model and quantizer");
    std::uint64_t seed = 42;
    std::size_t n_samples = 500;
    int bits = 4;
    int group = 128;
    double damp = 0.01;
    std::string method = "rtn";
    std::string out_dir = "fixtures";
    std::string model_path;
    int candidates = 0;
    bool no_true_sequential = false;
    bool desc_act = false;
    fixtures->add_option("--seed", seed, "Instance and calibration seed")->capture_default_str();
    fixtures->add_option("--n", n_samples, "Number of instances")->capture_default_str()->check(CLI::PositiveNumber);
    fixtures->add_option("--bits", bits, "Weight bits")->capture_default_str()->check(CLI::Range(2, 8));
    fixtures->add_option("--group", group, "Group size")->capture_default_str()->check(CLI::PositiveNumber);
    fixtures->add_option("--damp", damp, "Dampening as a fraction of mean Hessian diagonal")->capture_default_str();
    fixtures->add_option("--method", method, "rtn | compensated")
        ->capture_default_str()
        ->check(CLI::IsMember({"rtn", "compensated"}));
    fixtures->add_option("--out", out_dir, "Output directory")->capture_default_str();
    fixtures->add_option("--model", model_path, "Model descriptor JSON");
    fixtures->add_option("--candidates", candidates, "Override the descriptor's candidate count K");
    fixtures->add_flag("--no-true-sequential", no_true_sequential, "Calibrate every layer on full-model activations");
    fixtures->add_flag("--desc-act", desc_act, "Quantize columns by descending Hessian diagonal");

    // shared analysis options
    std::vector<std::string> manifests;
    std::size_t bins = 10;
    std::string bin_start = "auto";
    double alpha = 0.05;
    std::string conf_mode = "softmax";
    std::string length_norm = "none";
    std::string jsd_variant = "halved";
    std::string jsd_mode = "normalized";
    std::string ce = "auto";
    std::string key = "prediction";
    std::string format = "markdown";
    std::string out_path;
    std::string config_path;
    bool strict = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON file mirroring the flags (flags win)");
        sub->add_option("--bins", bins, "Number of bins")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--conf-mode", conf_mode, "softmax | raw")
            ->capture_default_str()
            ->check(CLI::IsMember({"softmax", "raw"}));
        sub->add_option("--length-norm", length_norm, "none | mean")
            ->capture_default_str()
            ->check(CLI::IsMember({"none", "mean"}));
        sub->add_flag("--strict", strict, "Fail on unmatched sample ids");
    };

    auto* compare = app.add_subcommand("compare", "Compare full and quantized runs");
    compare->add_option("--manifest", manifests, "Run manifest (repeatable)")->required();
    add_common(compare);
    compare->add_option("--bin-start", bin_start, "Shift-profile lower edge: auto (1/K) or a number")
        ->capture_default_str();
    compare->add_option("--alpha", alpha, "Significance level")->capture_default_str();
    compare->add_option("--jsd-variant", jsd_variant, "halved | expanded")
        ->capture_default_str()
        ->check(CLI::IsMember({"halved", "expanded"}));
    compare->add_option("--jsd-mode", jsd_mode, "normalized | per-instance")
        ->capture_default_str()
        ->check(CLI::IsMember({"normalized", "per-instance"}));
    compare->add_option("--ce", ce, "auto | ece | ace")->capture_default_str()->check(CLI::IsMember({"auto", "ece", "ace"}));
    compare->add_option("--key", key, "Shift binning key: prediction | true-class")
        ->capture_default_str()
        ->check(CLI::IsMember({"prediction", "true-class"}));
    compare->add_option("--format", format, "markdown | csv | json")
        ->capture_default_str()
        ->check(CLI::IsMember({"markdown", "csv", "json"}));
    compare->add_option("--out", out_path, "Write the report here instead of stdout");

    auto* shifts = app.add_subcommand("shifts", "Export confidence-shift profiles as CSV");
    shifts->add_option("--manifest", manifests, "Run manifest (repeatable)")->required();
    add_common(shifts);
    shifts->add_option("--bin-start", bin_start, "Lower edge of the first bin: auto or a number")
        ->capture_default_str();
    shifts->add_option("--key", key, "prediction | true-class")
        ->capture_default_str()
        ->check(CLI::IsMember({"prediction", "true-class"}));
    std::string shift_out = "shifts";
    shifts->add_option("--out", shift_out, "Output directory")->capture_default_str();

    auto* jsd = app.add_subcommand("jsd", "Mean Jensen-Shannon divergence per model across datasets");
    jsd->add_option("--manifests", manifests, "Run manifests")->required()->expected(1, -1);
    add_common(jsd);
    jsd->add_option("--jsd-mode", jsd_mode, "normalized | per-instance")
        ->capture_default_str()
        ->check(CLI::IsMember({"normalized", "per-instance"}));
    jsd->add_option("--format", format, "markdown | csv | json")
        ->capture_default_str()
        ->check(CLI::IsMember({"markdown", "csv", "json"}));
    jsd->add_option("--out", out_path, "Write the table here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        for (auto* sub : {compare, shifts, jsd}) {
            if (sub->parsed()) apply_config(*sub, config_path);
        }

        if (validate->parsed()) return run_validate(validate_path);

        if (fixtures->parsed()) {
            qc::ModelDescriptor desc = model_path.empty() ? qc::ModelDescriptor{} : qc::read_model_descriptor(model_path);
            if (candidates > 0) desc.num_candidates = candidates;
            qc::QuantConfig cfg;
            cfg.num_bits = bits;
            cfg.group_size = group;
            cfg.damp_percent = damp;
            cfg.true_sequential = !no_true_sequential;
            cfg.desc_act = desc_act;
            cfg.method = qc::quant_method_from_string(method);
            const auto model = qc::ToyModel::build(desc);
            const auto fx = qc::generate_fixtures(model, cfg, n_samples, seed);
            qc::write_fixtures(fx, desc, out_dir);
            for (std::size_t l = 0; l < fx.layer_stats.size(); ++l) {
                const auto& s = fx.layer_stats[l];
                qc::log::info("layer " + std::to_string(l) + ": calibration error " + std::to_string(s.calib_error) +
                              " (rtn " + std::to_string(s.rtn_calib_error) + ")");
            }
            std::cout << "wrote " << fx.full.size() << " paired records to " << out_dir << "\n";
            return 0;
        }

        qc::CompareOptions opts;
        opts.bins = bins;
        opts.bin_start = parse_bin_start(bin_start);
        opts.alpha = alpha;
        opts.conf_mode = conf_mode == "raw" ? qc::ConfidenceMode::raw : qc::ConfidenceMode::softmax;
        opts.length_norm = length_norm == "mean" ? qc::LengthNorm::per_token_mean : qc::LengthNorm::none;
        opts.jsd_variant = jsd_variant == "expanded" ? qc::JsdVariant::paper_expanded : qc::JsdVariant::halved;
        opts.jsd_mode = jsd_mode == "per-instance" ? qc::JsdMode::per_instance : qc::JsdMode::l1_normalized;
        opts.ce = ce == "ece" ? qc::CeSelection::ece : (ce == "ace" ? qc::CeSelection::ace : qc::CeSelection::automatic);
        opts.shift_key = key == "true-class" ? qc::ShiftKey::true_class_confidence : qc::ShiftKey::prediction_confidence;
        opts.strict = strict;
        const auto runs = load_manifests(manifests);

        if (compare->parsed()) {
            const auto report = qc::run_compare(runs, opts);
            emit(qc::render(report, qc::report_format_from_string(format)), out_path);
            return 0;
        }

        std::vector<qc::PairedDataset> paired;
        for (const auto& m : runs) paired.push_back(qc::load_paired(m, strict).dataset);

        if (shifts->parsed()) {
            qc::ShiftOptions so;
            so.key = opts.shift_key;
            so.num_bins = bins;
            so.range_start = opts.bin_start;
            so.conf_mode = opts.conf_mode;
            so.length_norm = opts.length_norm;
            const auto grid = qc::shift_grid(paired, so);
            const auto files = qc::write_shift_grid(grid, shift_out);
            for (const auto& f : files) std::cout << f.string() << "\n";
            return 0;
        }

        if (jsd->parsed()) {
            std::vector<qc::DatasetJsd> per_dataset;
            for (const auto& ds : paired) {
                auto [p, q] = qc::true_class_vectors(ds, opts.conf_mode, opts.length_norm);
                per_dataset.push_back({ds.model_id(), ds.dataset_id, qc::jsd(p, q, opts.jsd_mode)});
            }
            emit(qc::render_jsd_table(qc::mean_jsd_by_model(per_dataset), qc::report_format_from_string(format)),
                 out_path);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
