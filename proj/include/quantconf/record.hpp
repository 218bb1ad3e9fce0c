#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace quantconf {

// One sample's scored candidate answers for one model run.
struct PredictionRecord {
    std::string dataset_id;
    std::string sample_id;
    std::string model_id;
    std::size_t true_index = 0;
    // Natural-log sequence probabilities log p(y|x), one per candidate.
    std::vector<double> candidate_logprobs;
    // Optional per-token decomposition; each inner list sums to the matching
    // candidate_logprobs entry.
    std::optional<std::vector<std::vector<double>>> candidate_token_logprobs;

    std::size_t num_candidates() const noexcept { return candidate_logprobs.size(); }

    bool operator==(const PredictionRecord&) const = default;
};

enum class TaskKind { binary, multiclass };

struct RunManifest {
    std::filesystem::path full_run_path;
    std::filesystem::path quantized_run_path;
    std::string dataset_id;
    TaskKind task_kind = TaskKind::multiclass;
    std::optional<int> num_classes_hint;
    // Row label for the quantized run in rendered tables.
    std::string quant_label = "quantized";
};

struct SamplePair {
    std::string sample_id;
    PredictionRecord full;
    PredictionRecord quantized;
};

// Full and quantized records aligned by sample_id, sorted lexicographically.
struct PairedDataset {
    std::string dataset_id;
    std::vector<SamplePair> samples;

    std::size_t size() const noexcept { return samples.size(); }
    // Model id of the full-precision run (first pair), empty when no pairs.
    std::string model_id() const;
    std::string quantized_model_id() const;
};

struct PairingResult {
    PairedDataset dataset;
    std::size_t unmatched_full = 0;
    std::size_t unmatched_quantized = 0;
};

// Throws Error if the record breaks an invariant; `where` prefixes the message.
void validate_record(const PredictionRecord& rec, const std::string& where = {});

// Newline-delimited JSON, one record per line. Blank lines are skipped.
std::vector<PredictionRecord> parse_records(std::istream& in);
std::vector<PredictionRecord> read_records(const std::filesystem::path& path);

std::string serialize_record(const PredictionRecord& rec);
void write_records(std::ostream& out, const std::vector<PredictionRecord>& records);
void write_records(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);

// Intersects the two runs by sample_id. Unmatched samples are dropped and
// logged; with strict=true they raise instead.
PairingResult pair_runs(const std::vector<PredictionRecord>& full,
                        const std::vector<PredictionRecord>& quantized, bool strict = false);

// Relative run paths are resolved against the manifest's directory.
RunManifest read_manifest(const std::filesystem::path& path);
RunManifest parse_manifest(const std::string& json_text,
                           const std::filesystem::path& base_dir = {});
std::string serialize_manifest(const RunManifest& manifest);

// Reads both runs, pairs them and checks the task_kind/K agreement.
PairingResult load_paired(const RunManifest& manifest, bool strict = false);

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

}  // namespace quantconf
