#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "quantconf/quantizer.hpp"
#include "quantconf/record.hpp"

namespace quantconf {

enum class Activation { tanh, relu };

// Architecture of the toy scorer; serialized as the model descriptor JSON.
struct ModelDescriptor {
    int input_dim = 16;
    std::vector<int> hidden_dims = {32};
    int num_candidates = 4;  // K; also the vocabulary size of the scorer
    Activation activation = Activation::tanh;
    std::uint64_t seed = 1;
    int max_continuation = 2;  // extra tokens per candidate beyond the first
    double weight_scale = 2.0;  // init std = weight_scale / sqrt(fan_in)

    void validate() const;
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // out × in
    Eigen::VectorXd bias;
};

// Feed-forward softmax classifier with a K-wide head. Used autoregressively:
// the state starts at the instance vector x and each emitted token t adds the
// embedding row t, so a candidate's log-probability is the sum of its token
// log-probabilities under successive states.
class ToyModel {
public:
    static ToyModel build(const ModelDescriptor& desc);

    const ModelDescriptor& descriptor() const noexcept { return desc_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const Eigen::MatrixXd& embedding() const noexcept { return embedding_; }

    // Inputs of layer `index` for a batch of states (columns).
    Eigen::MatrixXd layer_input(std::size_t index, const Eigen::MatrixXd& states) const;
    Eigen::MatrixXd logits(const Eigen::MatrixXd& states) const;
    Eigen::VectorXd log_probs(const Eigen::VectorXd& state) const;

    // Per-token log-probabilities of `tokens` continuing from state x.
    std::vector<double> score_sequence(const Eigen::VectorXd& x, const std::vector<int>& tokens) const;

    std::string model_id() const;

    // Affine map of layer `index`, followed by the activation on hidden layers.
    Eigen::MatrixXd apply_layer(std::size_t index, const Eigen::MatrixXd& input) const;

private:
    ModelDescriptor desc_;
    std::vector<DenseLayer> layers_;
    Eigen::MatrixXd embedding_;  // K × input_dim
};

struct Instance {
    std::string sample_id;
    Eigen::VectorXd x;
    std::vector<std::vector<int>> candidates;  // candidate k starts with token k
};

// Deterministic synthetic multiple-choice instances.
std::vector<Instance> sample_instances(const ModelDescriptor& desc, std::size_t n, std::uint64_t seed,
                                       const std::string& id_prefix = "toy");

// Every autoregressive state visited while scoring the instances (input_dim × states).
Eigen::MatrixXd scorer_states(const ToyModel& model, const std::vector<Instance>& instances);

struct LayerQuantStats {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    double calib_error = 0.0;      // ‖(W − Ŵ)X‖² for the configured method
    double rtn_calib_error = 0.0;  // same inputs, round-to-nearest
};

struct QuantizedModel {
    ToyModel model;  // dequantized weights; biases and embeddings stay full precision
    std::vector<QuantizedLayer<double>> layers;
    std::vector<LayerQuantStats> stats;
};

// `calib_states` feeds the first layer; with true_sequential, deeper layers see
// activations of the already-quantized prefix, otherwise of the full model.
QuantizedModel quantize_model(const ToyModel& model, const QuantConfig& cfg,
                              const Eigen::MatrixXd& calib_states);

// 128 calibration instances drawn from a stream derived from `seed`.
Eigen::MatrixXd calibration_states(const ToyModel& model, std::uint64_t seed,
                                   std::size_t num_sequences = 128);

struct FixturePair {
    std::vector<PredictionRecord> full;
    std::vector<PredictionRecord> quantized;
    RunManifest manifest;  // paths relative to the output directory
    std::vector<LayerQuantStats> layer_stats;
};

std::string quant_suffix(const QuantConfig& cfg);

// Samples n instances, labels each by drawing from the full model's candidate
// distribution, and scores it with both the full and the quantized model.
FixturePair generate_fixtures(const ToyModel& model, const QuantConfig& cfg, std::size_t n,
                              std::uint64_t seed);

// Writes full.jsonl, quantized.jsonl, manifest.json and model.json.
void write_fixtures(const FixturePair& fixtures, const ModelDescriptor& desc,
                    const std::filesystem::path& out_dir);

ModelDescriptor parse_model_descriptor(const std::string& json_text);
ModelDescriptor read_model_descriptor(const std::filesystem::path& path);
std::string serialize_model_descriptor(const ModelDescriptor& desc);

const char* to_string(QuantMethod m);
QuantMethod quant_method_from_string(const std::string& s);

}  // namespace quantconf
