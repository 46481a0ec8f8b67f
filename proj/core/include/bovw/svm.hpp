#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bovw/features.hpp"

namespace bovw {

// Two categories: type A vs everything else. Three categories: A, B, C3.
enum class Mode { two, three };

std::string to_string(Mode mode);
Mode parse_mode(std::string_view name);
std::vector<std::string> class_names(Mode mode);

struct Sample {
    std::vector<double> features;
    int label = 0;  // index into the active class list
};

struct SolverOptions {
    // Stop once primal - dual objective falls below this. Anything up to 1e-3
    // meets the solver contract; the tighter default keeps near-boundary
    // predictions stable.
    double duality_gap = 1e-6;
    int max_epochs = 10000;
    std::uint64_t seed = 0;
};

// Soft-margin hinge-loss linear SVM; the bias is learned as the weight of a
// constant feature 1 (and is therefore regularized).
struct LinearSvm {
    std::vector<double> w;
    double b = 0.0;
    int epochs = 0;
    double duality_gap = 0.0;
    bool converged = false;

    double decision(std::span<const double> x) const;
};

// Dual coordinate descent. labels are +1 / -1; throws PreconditionError when
// only one label value is present.
LinearSvm train_binary(std::span<const std::vector<double>> features, std::span<const int> labels, double penalty,
                       const SolverOptions& options = {});

// Primal and dual objectives of the bias-augmented problem, exposed for checks.
double svm_primal_objective(const LinearSvm& model, std::span<const std::vector<double>> features,
                            std::span<const int> labels, double penalty);

struct PlattFit {
    double a = 0.0;
    double b = 0.0;
    bool degenerate = false;
    int iterations = 0;
};

// P(positive | f) = 1 / (1 + exp(a f + b)).
double platt_probability(double decision_value, double a, double b) noexcept;

// Cross-entropy of the sigmoid against prior-corrected targets
// t+ = (N+ + 1) / (N+ + 2), t- = 1 / (N- + 2).
double platt_objective(std::span<const double> decision_values, std::span<const int> labels, double a, double b);

// Newton iterations with backtracking line search. Identical decision values
// give a = 0, b = log(N- / N+) and degenerate = true.
PlattFit fit_platt(std::span<const double> decision_values, std::span<const int> labels);

struct CvEntry {
    double penalty = 0.0;
    double accuracy = 0.0;
};

struct CvResult {
    double best_penalty = 0.0;
    double best_accuracy = 0.0;
    std::vector<CvEntry> table;
};

// 2^-5, 2^-3, ..., 2^5.
std::vector<double> default_penalty_grid();

// Per class, members are shuffled (seeded) and dealt round-robin so fold sizes
// differ by at most one within every class.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int n_classes, int folds,
                                                       std::uint64_t seed);

struct CvOptions {
    int folds = 5;
    std::uint64_t seed = 0;
    SolverOptions solver{};
};

// Accuracy of one-vs-one voting for every penalty; the best mean accuracy
// wins and ties go to the smallest penalty.
CvResult cross_validate(std::span<const Sample> samples, int n_classes, std::span<const double> penalty_grid,
                        const CvOptions& options = {});

// Combines pairwise probabilities r[i][j] = P(i | i or j) into a class
// distribution minimizing sum_{i<j} (r[j][i] p_i - r[i][j] p_j)^2 on the simplex.
std::vector<double> couple_pairwise(const std::vector<std::vector<double>>& r, double tolerance = 1e-10,
                                    int max_iterations = 1000);
double coupling_objective(const std::vector<std::vector<double>>& r, std::span<const double> p);

struct BinarySvm {
    int class_i = 0;  // positive side
    int class_j = 1;
    std::vector<double> w;
    double b = 0.0;
    double platt_a = 0.0;
    double platt_b = 0.0;
    bool platt_degenerate = false;

    double decision(std::span<const double> x) const;
    // Calibrated P(class_i | class_i or class_j).
    double probability(std::span<const double> x) const;
};

struct ModelFingerprints {
    std::string vocab;
    std::string scaler;

    friend bool operator==(const ModelFingerprints&, const ModelFingerprints&) = default;
};

struct TrainingMetadata {
    double penalty = 0.0;
    double cv_accuracy = 0.0;
    std::vector<CvEntry> cv_table;
    ModelFingerprints fingerprints;
    HistogramNormalization normalization = HistogramNormalization::raw_counts;
    std::uint64_t seed = 0;
};

struct SvmModel {
    Mode mode = Mode::three;
    std::vector<std::string> classes;
    std::size_t feature_length = 0;
    std::vector<BinarySvm> pairs;  // (0,1), (0,2), ..., (1,2), ...
    TrainingMetadata meta;
};

struct ClassProbabilities {
    std::vector<double> p;
    std::size_t argmax = 0;
};

struct ModelTrainOptions {
    std::vector<double> penalty_grid = default_penalty_grid();
    int folds = 5;
    std::uint64_t seed = 0;
    SolverOptions solver{};
};

// Cross-validates the penalty, trains every one-vs-one pair with it and fits a
// Platt sigmoid per pair on out-of-fold decision values.
SvmModel train_model(std::span<const Sample> samples, Mode mode, const ModelTrainOptions& options = {});

ClassProbabilities predict_proba(const SvmModel& model, std::span<const double> x);

// Index of the pair (i, j), i < j, in SvmModel::pairs.
std::size_t pair_index(int i, int j, int n_classes);

std::string model_to_json(const SvmModel& model);
SvmModel model_from_json(const std::string& text);
void save_model(const SvmModel& model, const std::filesystem::path& path);
// Throws ConfigError when expected_mode is given and differs from the file.
SvmModel load_model(const std::filesystem::path& path, std::optional<Mode> expected_mode = std::nullopt);

} // namespace bovw
