#include "quantconf/quantlab.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "quantconf/error.hpp"
#include "quantconf/scoring.hpp"

namespace quantconf {
namespace {

constexpr const char* kModule = "quantlab";
constexpr std::uint64_t kCalibrationStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kLabelStream = 0xD1B54A32D192ED03ULL;

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Eigen::MatrixXd m(rows, cols);
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    }
    return m;
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
    const double shift = logits.maxCoeff();
    const Eigen::ArrayXd centered = logits.array() - shift;
    return (centered - std::log(centered.exp().sum())).matrix();
}

const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

}  // namespace

void ModelDescriptor::validate() const {
    if (input_dim < 1) throw Error(kModule, "input_dim must be >= 1");
    for (int h : hidden_dims) {
        if (h < 1) throw Error(kModule, "hidden dims must be >= 1");
    }
    if (num_candidates < 2) throw Error(kModule, "num_candidates must be >= 2");
    if (max_continuation < 0) throw Error(kModule, "max_continuation must be >= 0");
    if (!(weight_scale > 0.0) || !std::isfinite(weight_scale)) {
        throw Error(kModule, "weight_scale must be positive");
    }
}

ToyModel ToyModel::build(const ModelDescriptor& desc) {
    desc.validate();
    ToyModel m;
    m.desc_ = desc;
    std::mt19937_64 rng(desc.seed);
    int fan_in = desc.input_dim;
    std::vector<int> widths = desc.hidden_dims;
    widths.push_back(desc.num_candidates);
    for (int width : widths) {
        DenseLayer layer;
        layer.weight = gaussian(rng, width, fan_in, desc.weight_scale / std::sqrt(static_cast<double>(fan_in)));
        layer.bias = gaussian(rng, width, 1, 0.1);
        m.layers_.push_back(std::move(layer));
        fan_in = width;
    }
    m.embedding_ = gaussian(rng, desc.num_candidates, desc.input_dim, 0.5);
    return m;
}

Eigen::MatrixXd ToyModel::apply_layer(std::size_t index, const Eigen::MatrixXd& input) const {
    const auto& layer = layers_.at(index);
    Eigen::MatrixXd out = layer.weight * input;
    out.colwise() += layer.bias;
    if (index + 1 < layers_.size()) {
        if (desc_.activation == Activation::tanh) {
            out = out.array().tanh().matrix();
        } else {
            out = out.cwiseMax(0.0);
        }
    }
    return out;
}

Eigen::MatrixXd ToyModel::layer_input(std::size_t index, const Eigen::MatrixXd& states) const {
    Eigen::MatrixXd h = states;
    for (std::size_t l = 0; l < index; ++l) h = apply_layer(l, h);
    return h;
}

Eigen::MatrixXd ToyModel::logits(const Eigen::MatrixXd& states) const {
    return apply_layer(layers_.size() - 1, layer_input(layers_.size() - 1, states));
}

Eigen::VectorXd ToyModel::log_probs(const Eigen::VectorXd& state) const {
    return log_softmax(logits(state).col(0));
}

std::vector<double> ToyModel::score_sequence(const Eigen::VectorXd& x, const std::vector<int>& tokens) const {
    std::vector<double> out;
    out.reserve(tokens.size());
    Eigen::VectorXd state = x;
    for (int t : tokens) {
        out.push_back(log_probs(state)(t));
        state += embedding_.row(t).transpose();
    }
    return out;
}

std::string ToyModel::model_id() const {
    std::string hidden;
    for (std::size_t i = 0; i < desc_.hidden_dims.size(); ++i) {
        hidden += (i ? "x" : "") + std::to_string(desc_.hidden_dims[i]);
    }
    return fmt::format("toy-d{}-h{}-k{}-s{}", desc_.input_dim, hidden.empty() ? "0" : hidden,
                       desc_.num_candidates, desc_.seed);
}

std::vector<Instance> sample_instances(const ModelDescriptor& desc, std::size_t n, std::uint64_t seed,
                                       const std::string& id_prefix) {
    desc.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> extra_len(0, desc.max_continuation);
    std::uniform_int_distribution<int> token(0, desc.num_candidates - 1);
    std::vector<Instance> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        Instance inst;
        inst.sample_id = fmt::format("{}-{:06d}", id_prefix, s);
        inst.x.resize(desc.input_dim);
        for (int i = 0; i < desc.input_dim; ++i) inst.x(i) = normal(rng);
        for (int k = 0; k < desc.num_candidates; ++k) {
            std::vector<int> seq{k};
            const int extra = extra_len(rng);
            for (int e = 0; e < extra; ++e) seq.push_back(token(rng));
            inst.candidates.push_back(std::move(seq));
        }
        out.push_back(std::move(inst));
    }
    return out;
}

Eigen::MatrixXd scorer_states(const ToyModel& model, const std::vector<Instance>& instances) {
    std::vector<Eigen::VectorXd> states;
    for (const auto& inst : instances) {
        for (const auto& seq : inst.candidates) {
            Eigen::VectorXd s = inst.x;
            for (int t : seq) {
                states.push_back(s);
                s += model.embedding().row(t).transpose();
            }
        }
    }
    Eigen::MatrixXd out(model.descriptor().input_dim, static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = states[i];
    return out;
}

Eigen::MatrixXd calibration_states(const ToyModel& model, std::uint64_t seed, std::size_t num_sequences) {
    const auto instances = sample_instances(model.descriptor(), num_sequences, seed ^ kCalibrationStream, "calib");
    return scorer_states(model, instances);
}

QuantizedModel quantize_model(const ToyModel& model, const QuantConfig& cfg,
                              const Eigen::MatrixXd& calib_states) {
    cfg.validate();
    QuantizedModel qm{model, {}, {}};
    Eigen::MatrixXd x_full = calib_states;
    Eigen::MatrixXd x_quant = calib_states;
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        const Eigen::MatrixXd& x = cfg.true_sequential ? x_quant : x_full;
        const Eigen::MatrixXd& w = model.layers()[l].weight;
        auto rtn = quantize_rtn(w, cfg);
        const Eigen::MatrixXd rtn_deq = rtn.dequantize();
        QuantizedLayer<double> layer =
            cfg.method == QuantMethod::rtn ? std::move(rtn) : quantize_compensated(w, x, cfg);
        const Eigen::MatrixXd deq = layer.dequantize();

        LayerQuantStats st;
        st.rows = w.rows();
        st.cols = w.cols();
        st.calib_error = calibration_error(w, deq, x);
        st.rtn_calib_error = calibration_error(w, rtn_deq, x);
        qm.stats.push_back(st);
        qm.layers.push_back(std::move(layer));
        qm.model.layers()[l].weight = deq;

        x_quant = qm.model.apply_layer(l, x_quant);
        x_full = model.apply_layer(l, x_full);
    }
    return qm;
}

std::string quant_suffix(const QuantConfig& cfg) {
    return fmt::format("w{}g{}-{}", cfg.num_bits, cfg.group_size,
                       cfg.method == QuantMethod::rtn ? "rtn" : "compensated");
}

FixturePair generate_fixtures(const ToyModel& model, const QuantConfig& cfg, std::size_t n,
                              std::uint64_t seed) {
    if (n < 1) throw Error(kModule, "n must be >= 1");
    const auto& desc = model.descriptor();
    const auto instances = sample_instances(desc, n, seed);
    const QuantizedModel qm = quantize_model(model, cfg, calibration_states(model, seed));

    const std::string dataset_id = fmt::format("toy-mc-k{}", desc.num_candidates);
    const std::string full_id = model.model_id();
    const std::string quant_id = full_id + "-" + quant_suffix(cfg);

    FixturePair fx;
    fx.layer_stats = qm.stats;
    std::mt19937_64 label_rng(seed ^ kLabelStream);
    auto score = [](const ToyModel& m, const Instance& inst, PredictionRecord& rec) {
        std::vector<std::vector<double>> tokens;
        for (const auto& seq : inst.candidates) {
            tokens.push_back(m.score_sequence(inst.x, seq));
            rec.candidate_logprobs.push_back(sequence_logprob(tokens.back()));
        }
        rec.candidate_token_logprobs = std::move(tokens);
    };
    for (const auto& inst : instances) {
        PredictionRecord full{dataset_id, inst.sample_id, full_id, 0, {}, std::nullopt};
        score(model, inst, full);
        const Eigen::VectorXd probs =
            softmax(Eigen::Map<const Eigen::VectorXd>(full.candidate_logprobs.data(),
                                                      static_cast<Eigen::Index>(full.candidate_logprobs.size())));
        std::discrete_distribution<std::size_t> draw(probs.data(), probs.data() + probs.size());
        full.true_index = draw(label_rng);

        PredictionRecord quant{dataset_id, inst.sample_id, quant_id, full.true_index, {}, std::nullopt};
        score(qm.model, inst, quant);
        validate_record(full, inst.sample_id);
        validate_record(quant, inst.sample_id);
        fx.full.push_back(std::move(full));
        fx.quantized.push_back(std::move(quant));
    }
    fx.manifest.full_run_path = "full.jsonl";
    fx.manifest.quantized_run_path = "quantized.jsonl";
    fx.manifest.dataset_id = dataset_id;
    fx.manifest.task_kind = desc.num_candidates == 2 ? TaskKind::binary : TaskKind::multiclass;
    fx.manifest.num_classes_hint = desc.num_candidates;
    fx.manifest.quant_label = quant_suffix(cfg);
    return fx;
}

void write_fixtures(const FixturePair& fixtures, const ModelDescriptor& desc,
                    const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_records(out_dir / fixtures.manifest.full_run_path, fixtures.full);
    write_records(out_dir / fixtures.manifest.quantized_run_path, fixtures.quantized);
    auto write_text = [&](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error(kModule, "cannot write " + p.string());
        out << text;
    };
    write_text(out_dir / "manifest.json", serialize_manifest(fixtures.manifest));
    write_text(out_dir / "model.json", serialize_model_descriptor(desc));
}

ModelDescriptor parse_model_descriptor(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, std::string("model descriptor: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(kModule, "model descriptor must be a JSON object");
    ModelDescriptor d;
    try {
        d.input_dim = j.value("input_dim", d.input_dim);
        d.hidden_dims = j.value("hidden_dims", d.hidden_dims);
        d.num_candidates = j.value("num_candidates", d.num_candidates);
        d.seed = j.value("seed", d.seed);
        d.max_continuation = j.value("max_continuation", d.max_continuation);
        d.weight_scale = j.value("weight_scale", d.weight_scale);
        const std::string act = j.value("activation", std::string("tanh"));
        if (act == "tanh") {
            d.activation = Activation::tanh;
        } else if (act == "relu") {
            d.activation = Activation::relu;
        } else {
            throw Error(kModule, "activation must be tanh or relu");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, std::string("model descriptor: ") + e.what());
    }
    d.validate();
    return d;
}

ModelDescriptor read_model_descriptor(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model_descriptor(ss.str());
}

std::string serialize_model_descriptor(const ModelDescriptor& d) {
    nlohmann::ordered_json j;
    j["input_dim"] = d.input_dim;
    j["hidden_dims"] = d.hidden_dims;
    j["num_candidates"] = d.num_candidates;
    j["activation"] = to_string(d.activation);
    j["seed"] = d.seed;
    j["max_continuation"] = d.max_continuation;
    j["weight_scale"] = d.weight_scale;
    return j.dump(2) + "\n";
}

const char* to_string(QuantMethod m) { return m == QuantMethod::rtn ? "rtn" : "compensated"; }

QuantMethod quant_method_from_string(const std::string& s) {
    if (s == "rtn") return QuantMethod::rtn;
    if (s == "compensated" || s == "error_compensated" || s == "gptq") return QuantMethod::error_compensated;
    throw Error(kModule, "method must be rtn or compensated, got '" + s + "'");
}

}  // namespace quantconf
