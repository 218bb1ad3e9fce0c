#include "quantconf/record.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "quantconf/error.hpp"
#include "quantconf/log.hpp"

namespace quantconf {
namespace {

constexpr const char* kModule = "record_model";
constexpr double kTokenSumTolerance = 1e-9;

const std::set<std::string> kRecordFields = {"dataset_id", "sample_id", "model_id", "true_index",
                                             "candidate_logprobs", "candidate_token_logprobs"};
const std::set<std::string> kManifestFields = {"full_run_path", "quantized_run_path",
                                               "dataset_id", "task_kind", "num_classes_hint",
                                               "quant_label"};

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
    throw Error(kModule, where.empty() ? msg : where + ": " + msg);
}

std::string id_suffix(const std::string& sample_id) {
    return sample_id.empty() ? std::string{} : " (sample_id=" + sample_id + ")";
}

std::string require_string(const nlohmann::json& j, const char* field, const std::string& where) {
    auto it = j.find(field);
    if (it == j.end()) fail(where, fmt::format("missing field {}", field));
    if (!it->is_string()) fail(where, fmt::format("field {} must be a string", field));
    return it->get<std::string>();
}

std::vector<double> to_real_list(const nlohmann::json& j, const std::string& field,
                                 const std::string& where, const std::string& sample_id) {
    if (!j.is_array()) fail(where, field + " must be an array" + id_suffix(sample_id));
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) fail(where, field + " entries must be numbers" + id_suffix(sample_id));
        out.push_back(v.get<double>());
    }
    return out;
}

PredictionRecord record_from_json(const nlohmann::json& j, const std::string& where,
                                  std::set<std::string>& warned) {
    if (!j.is_object()) fail(where, "record must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!kRecordFields.count(key) && warned.insert(key).second) {
            log::warn(fmt::format("{}: ignoring unknown field '{}'", where, key));
        }
    }
    PredictionRecord rec;
    rec.sample_id = require_string(j, "sample_id", where);
    rec.dataset_id = require_string(j, "dataset_id", where);
    rec.model_id = require_string(j, "model_id", where);

    auto ti = j.find("true_index");
    if (ti == j.end()) fail(where, "missing field true_index" + id_suffix(rec.sample_id));
    if (!ti->is_number_integer() || (!ti->is_number_unsigned() && ti->get<long long>() < 0)) {
        fail(where, "true_index must be a non-negative integer" + id_suffix(rec.sample_id));
    }
    rec.true_index = ti->get<std::size_t>();

    auto lp = j.find("candidate_logprobs");
    if (lp == j.end()) fail(where, "missing field candidate_logprobs" + id_suffix(rec.sample_id));
    rec.candidate_logprobs = to_real_list(*lp, "candidate_logprobs", where, rec.sample_id);

    auto tok = j.find("candidate_token_logprobs");
    if (tok != j.end() && !tok->is_null()) {
        if (!tok->is_array()) {
            fail(where, "candidate_token_logprobs must be an array" + id_suffix(rec.sample_id));
        }
        std::vector<std::vector<double>> lists;
        for (const auto& inner : *tok) {
            lists.push_back(to_real_list(inner, "candidate_token_logprobs", where, rec.sample_id));
        }
        rec.candidate_token_logprobs = std::move(lists);
    }
    validate_record(rec, where);
    return rec;
}

nlohmann::ordered_json record_to_json(const PredictionRecord& rec) {
    nlohmann::ordered_json j;
    j["dataset_id"] = rec.dataset_id;
    j["sample_id"] = rec.sample_id;
    j["model_id"] = rec.model_id;
    j["true_index"] = rec.true_index;
    j["candidate_logprobs"] = rec.candidate_logprobs;
    if (rec.candidate_token_logprobs) j["candidate_token_logprobs"] = *rec.candidate_token_logprobs;
    return j;
}

}  // namespace

std::string PairedDataset::model_id() const {
    return samples.empty() ? std::string{} : samples.front().full.model_id;
}

std::string PairedDataset::quantized_model_id() const {
    return samples.empty() ? std::string{} : samples.front().quantized.model_id;
}

void validate_record(const PredictionRecord& rec, const std::string& where) {
    const std::string id = id_suffix(rec.sample_id);
    const std::size_t k = rec.candidate_logprobs.size();
    if (k < 2) fail(where, "candidate_logprobs needs at least 2 candidates" + id);
    if (rec.true_index >= k) fail(where, "true_index out of range" + id);
    for (double v : rec.candidate_logprobs) {
        if (!std::isfinite(v)) fail(where, "candidate_logprobs must be finite" + id);
        if (v > 0.0) fail(where, "candidate_logprobs must be <= 0" + id);
    }
    if (!rec.candidate_token_logprobs) return;
    const auto& tokens = *rec.candidate_token_logprobs;
    if (tokens.size() != k) {
        fail(where, "candidate_token_logprobs must have one list per candidate" + id);
    }
    for (std::size_t c = 0; c < k; ++c) {
        double sum = 0.0;
        for (double v : tokens[c]) {
            if (!std::isfinite(v) || v > 0.0) {
                fail(where, "candidate_token_logprobs entries must be finite and <= 0" + id);
            }
            sum += v;
        }
        if (tokens[c].empty() || std::abs(sum - rec.candidate_logprobs[c]) > kTokenSumTolerance) {
            fail(where, fmt::format("candidate_token_logprobs[{}] does not sum to candidate_logprobs[{}]{}",
                                    c, c, id));
        }
    }
}

std::vector<PredictionRecord> parse_records(std::istream& in) {
    std::vector<PredictionRecord> records;
    std::set<std::string> warned;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = fmt::format("line {}", line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(where, std::string("malformed JSON: ") + e.what());
        }
        records.push_back(record_from_json(j, where, warned));
    }
    return records;
}

std::vector<PredictionRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open " + path.string());
    try {
        return parse_records(in);
    } catch (const Error& e) {
        // Re-tag with the file name; strip the "record_model: " prefix first.
        const std::string what = e.what();
        const std::string prefix = std::string(kModule) + ": ";
        throw Error(kModule, path.string() + ": " +
                                 (what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what));
    }
}

std::string serialize_record(const PredictionRecord& rec) { return record_to_json(rec).dump(); }

void write_records(std::ostream& out, const std::vector<PredictionRecord>& records) {
    for (const auto& r : records) out << serialize_record(r) << '\n';
}

void write_records(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(kModule, "cannot write " + path.string());
    write_records(out, records);
}

PairingResult pair_runs(const std::vector<PredictionRecord>& full,
                        const std::vector<PredictionRecord>& quantized, bool strict) {
    if (full.empty() || quantized.empty()) throw Error(kModule, "cannot pair an empty run");

    auto index = [](const std::vector<PredictionRecord>& run, const char* side) {
        std::map<std::string, const PredictionRecord*> by_id;
        for (const auto& r : run) {
            if (!by_id.emplace(r.sample_id, &r).second) {
                throw Error(kModule, fmt::format("duplicate sample_id in {} run: {}", side, r.sample_id));
            }
        }
        return by_id;
    };
    const auto full_ids = index(full, "full");
    const auto quant_ids = index(quantized, "quantized");

    PairingResult result;
    result.dataset.dataset_id = full.front().dataset_id;
    for (const auto& [id, f] : full_ids) {
        auto it = quant_ids.find(id);
        if (it == quant_ids.end()) {
            ++result.unmatched_full;
            continue;
        }
        const PredictionRecord* q = it->second;
        if (f->true_index != q->true_index) throw Error(kModule, "label mismatch: " + id);
        if (f->num_candidates() != q->num_candidates()) {
            throw Error(kModule, "candidate count mismatch: " + id);
        }
        result.dataset.samples.push_back({id, *f, *q});
    }
    result.unmatched_quantized = quant_ids.size() - result.dataset.samples.size();

    if (result.dataset.samples.empty()) throw Error(kModule, "runs share no sample_id");
    if (result.unmatched_full + result.unmatched_quantized > 0) {
        const std::string msg = fmt::format("unmatched samples dropped: {} full-only, {} quantized-only",
                                            result.unmatched_full, result.unmatched_quantized);
        if (strict) throw Error(kModule, msg);
        log::warn(msg);
    }
    return result;
}

const char* to_string(TaskKind kind) { return kind == TaskKind::binary ? "binary" : "multiclass"; }

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "binary") return TaskKind::binary;
    if (s == "multiclass") return TaskKind::multiclass;
    throw Error(kModule, "task_kind must be binary or multiclass, got '" + s + "'");
}

RunManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, std::string("manifest: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(kModule, "manifest must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!kManifestFields.count(key)) log::warn("manifest: ignoring unknown field '" + key + "'");
    }
    const std::string where = "manifest";
    RunManifest m;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return (path.is_relative() && !base_dir.empty()) ? base_dir / path : path;
    };
    m.full_run_path = resolve(require_string(j, "full_run_path", where));
    m.quantized_run_path = resolve(require_string(j, "quantized_run_path", where));
    m.dataset_id = require_string(j, "dataset_id", where);
    m.task_kind = task_kind_from_string(require_string(j, "task_kind", where));
    if (auto it = j.find("num_classes_hint"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<long long>() < 2) {
            throw Error(kModule, "manifest: num_classes_hint must be an integer >= 2");
        }
        m.num_classes_hint = it->get<int>();
    }
    if (auto it = j.find("quant_label"); it != j.end()) {
        if (!it->is_string()) throw Error(kModule, "manifest: quant_label must be a string");
        m.quant_label = it->get<std::string>();
    }
    if (m.full_run_path.lexically_normal() == m.quantized_run_path.lexically_normal()) {
        throw Error(kModule, "manifest: full_run_path and quantized_run_path must differ");
    }
    if (m.task_kind == TaskKind::binary && m.num_classes_hint && *m.num_classes_hint != 2) {
        throw Error(kModule, "manifest: binary task with num_classes_hint != 2");
    }
    return m;
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), path.parent_path());
}

std::string serialize_manifest(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["full_run_path"] = m.full_run_path.generic_string();
    j["quantized_run_path"] = m.quantized_run_path.generic_string();
    j["dataset_id"] = m.dataset_id;
    j["task_kind"] = to_string(m.task_kind);
    if (m.num_classes_hint) j["num_classes_hint"] = *m.num_classes_hint;
    j["quant_label"] = m.quant_label;
    return j.dump(2) + "\n";
}

PairingResult load_paired(const RunManifest& manifest, bool strict) {
    auto full = read_records(manifest.full_run_path);
    auto quant = read_records(manifest.quantized_run_path);
    if (full.empty()) throw Error(kModule, "no records in " + manifest.full_run_path.string());
    if (quant.empty()) throw Error(kModule, "no records in " + manifest.quantized_run_path.string());
    PairingResult result = pair_runs(full, quant, strict);
    result.dataset.dataset_id = manifest.dataset_id;

    for (const auto& s : result.dataset.samples) {
        const std::size_t ks = s.full.num_candidates();
        if (manifest.task_kind == TaskKind::binary && ks != 2) {
            throw Error(kModule, "binary task requires K = 2: " + s.sample_id);
        }
        if (manifest.num_classes_hint && ks != static_cast<std::size_t>(*manifest.num_classes_hint)) {
            throw Error(kModule, "candidate count disagrees with num_classes_hint: " + s.sample_id);
        }
    }
    return result;
}

}  // namespace quantconf
