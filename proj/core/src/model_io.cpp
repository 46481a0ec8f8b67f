#include <fstream>
#include <iterator>

#include <json.hpp>

#include "bovw/errors.hpp"
#include "bovw/svm.hpp"

namespace bovw {

namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "bovw-svm-model";
constexpr int kModelVersion = 1;

template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("model file is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("model field '") + key + "' has the wrong type: " + e.what());
    }
}

} // namespace

std::string model_to_json(const SvmModel& model) {
    json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["mode"] = to_string(model.mode);
    j["classes"] = model.classes;
    j["feature_length"] = model.feature_length;
    j["normalization"] = to_string(model.meta.normalization);
    j["penalty_c"] = model.meta.penalty;
    j["cv_accuracy"] = model.meta.cv_accuracy;
    j["seed"] = model.meta.seed;
    json table = json::array();
    for (const auto& e : model.meta.cv_table) table.push_back({{"c", e.penalty}, {"accuracy", e.accuracy}});
    j["cv_table"] = table;
    j["fingerprints"] = {{"vocab", model.meta.fingerprints.vocab}, {"scaler", model.meta.fingerprints.scaler}};
    json pairs = json::array();
    for (const auto& p : model.pairs) {
        pairs.push_back({{"i", p.class_i},
                         {"j", p.class_j},
                         {"w", p.w},
                         {"b", p.b},
                         {"platt_a", p.platt_a},
                         {"platt_b", p.platt_b},
                         {"platt_degenerate", p.platt_degenerate}});
    }
    j["pairs"] = pairs;
    return j.dump(1) + "\n";
}

SvmModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("model file is not valid JSON (truncated?): ") + e.what());
    }
    if (!j.is_object()) throw FormatError("model file must hold a JSON object");
    if (field<std::string>(j, "format") != kModelFormat) throw FormatError("not a bovw SVM model file");
    const int version = field<int>(j, "version");
    if (version != kModelVersion) {
        throw FormatError("model format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kModelVersion) + ")");
    }

    SvmModel model;
    try {
        model.mode = parse_mode(field<std::string>(j, "mode"));
    } catch (const PreconditionError& e) {
        throw FormatError(e.what());
    }
    model.classes = field<std::vector<std::string>>(j, "classes");
    if (model.classes != class_names(model.mode)) {
        throw FormatError("model class list does not match its " + to_string(model.mode) + "-category mode");
    }
    model.feature_length = field<std::size_t>(j, "feature_length");
    model.meta.normalization = parse_normalization(field<std::string>(j, "normalization"));
    model.meta.penalty = field<double>(j, "penalty_c");
    model.meta.cv_accuracy = field<double>(j, "cv_accuracy");
    model.meta.seed = field<std::uint64_t>(j, "seed");
    for (const auto& e : field<json>(j, "cv_table")) {
        model.meta.cv_table.push_back({field<double>(e, "c"), field<double>(e, "accuracy")});
    }
    const auto fp = field<json>(j, "fingerprints");
    model.meta.fingerprints.vocab = field<std::string>(fp, "vocab");
    model.meta.fingerprints.scaler = field<std::string>(fp, "scaler");

    const int n = static_cast<int>(model.classes.size());
    const auto pairs = field<json>(j, "pairs");
    const std::size_t expected_pairs = static_cast<std::size_t>(n * (n - 1) / 2);
    if (!pairs.is_array() || pairs.size() != expected_pairs) {
        throw FormatError("model has " + std::to_string(pairs.is_array() ? pairs.size() : 0) + " pairs, expected " +
                          std::to_string(expected_pairs));
    }
    for (const auto& p : pairs) {
        BinarySvm svm;
        svm.class_i = field<int>(p, "i");
        svm.class_j = field<int>(p, "j");
        svm.w = field<std::vector<double>>(p, "w");
        svm.b = field<double>(p, "b");
        svm.platt_a = field<double>(p, "platt_a");
        svm.platt_b = field<double>(p, "platt_b");
        svm.platt_degenerate = field<bool>(p, "platt_degenerate");
        if (svm.class_i < 0 || svm.class_j >= n || svm.class_i >= svm.class_j ||
            pair_index(svm.class_i, svm.class_j, n) != model.pairs.size()) {
            throw FormatError("model pair table is out of order");
        }
        if (svm.w.size() != model.feature_length) {
            throw FormatError("model feature length is " + std::to_string(model.feature_length) + " but pair (" +
                              std::to_string(svm.class_i) + "," + std::to_string(svm.class_j) + ") has " +
                              std::to_string(svm.w.size()) + " weights");
        }
        model.pairs.push_back(std::move(svm));
    }
    return model;
}

void save_model(const SvmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot create model file");
    out << model_to_json(model);
    if (!out) throw IoError(path.string(), "write failed");
}

SvmModel load_model(const std::filesystem::path& path, std::optional<Mode> expected_mode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open model file");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    SvmModel model;
    try {
        model = model_from_json(text);
    } catch (const FormatError& e) {
        throw FormatError(std::string(e.what()) + ": " + path.string());
    }
    if (expected_mode && model.mode != *expected_mode) {
        throw ConfigError("model " + path.string() + " is a " + to_string(model.mode) +
                          "-category model but a " + to_string(*expected_mode) + "-category run was requested");
    }
    return model;
}

} // namespace bovw
