#include "bovw/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bovw/errors.hpp"
#include "bovw/random.hpp"

namespace bovw {

namespace {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double acc[4] = {0, 0, 0, 0};
    const std::size_t n = a.size();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    for (; k < n; ++k) acc[0] += a[k] * b[k];
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void check_binary_labels(std::span<const int> labels, const char* op) {
    bool pos = false, neg = false;
    for (int y : labels) {
        if (y == 1) pos = true;
        else if (y == -1) neg = true;
        else throw PreconditionError(std::string(op) + ": labels must be +1 or -1");
    }
    if (!pos || !neg) throw PreconditionError(std::string(op) + ": both classes must be present");
}

} // namespace

std::string to_string(Mode mode) { return mode == Mode::two ? "two" : "three"; }

Mode parse_mode(std::string_view name) {
    if (name == "two") return Mode::two;
    if (name == "three") return Mode::three;
    throw PreconditionError("unknown mode '" + std::string(name) + "' (expected two or three)");
}

std::vector<std::string> class_names(Mode mode) {
    if (mode == Mode::two) return {"A", "notA"};
    return {"A", "B", "C3"};
}

double LinearSvm::decision(std::span<const double> x) const { return dot(w, x) + b; }

double svm_primal_objective(const LinearSvm& model, std::span<const std::vector<double>> features,
                            std::span<const int> labels, double penalty) {
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        loss += std::max(0.0, 1.0 - labels[i] * model.decision(features[i]));
    }
    return 0.5 * (dot(model.w, model.w) + model.b * model.b) + penalty * loss;
}

LinearSvm train_binary(std::span<const std::vector<double>> features, std::span<const int> labels, double penalty,
                       const SolverOptions& options) {
    if (features.size() != labels.size()) throw PreconditionError("train_binary: features/labels size mismatch");
    if (features.empty()) throw PreconditionError("train_binary: no samples");
    check_binary_labels(labels, "train_binary");
    if (!(penalty > 0.0)) throw PreconditionError("train_binary: penalty must be positive");
    const std::size_t n = features.size();
    const std::size_t dim = features.front().size();
    for (const auto& x : features) {
        if (x.size() != dim) throw PreconditionError("train_binary: feature lengths differ");
    }

    LinearSvm model;
    model.w.assign(dim, 0.0);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = dot(features[i], features[i]) + 1.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(mix64(options.seed));

    for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            const double y = labels[i];
            const double g = y * (dot(model.w, features[i]) + model.b) - 1.0;
            double pg = g;
            if (alpha[i] == 0.0) pg = std::min(g, 0.0);
            else if (alpha[i] == penalty) pg = std::max(g, 0.0);
            if (pg == 0.0) continue;
            const double old = alpha[i];
            alpha[i] = std::clamp(old - g / diag[i], 0.0, penalty);
            const double step = (alpha[i] - old) * y;
            if (step == 0.0) continue;
            const auto& x = features[i];
            for (std::size_t k = 0; k < dim; ++k) model.w[k] += step * x[k];
            model.b += step;
        }
        model.epochs = epoch + 1;

        const double norm_sq = dot(model.w, model.w) + model.b * model.b;
        double hinge = 0.0;
        for (std::size_t i = 0; i < n; ++i) hinge += std::max(0.0, 1.0 - labels[i] * model.decision(features[i]));
        const double primal = 0.5 * norm_sq + penalty * hinge;
        const double dual = std::accumulate(alpha.begin(), alpha.end(), 0.0) - 0.5 * norm_sq;
        model.duality_gap = primal - dual;
        if (model.duality_gap <= options.duality_gap) {
            model.converged = true;
            break;
        }
    }
    return model;
}

// ---------------------------------------------------------------------------

double platt_probability(double f, double a, double b) noexcept {
    const double z = a * f + b;
    if (z >= 0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

namespace {

struct PlattTargets {
    std::vector<double> t;
    double n_pos = 0;
    double n_neg = 0;
};

PlattTargets platt_targets(std::span<const int> labels) {
    PlattTargets out;
    for (int y : labels) (y > 0 ? out.n_pos : out.n_neg) += 1;
    const double hi = (out.n_pos + 1.0) / (out.n_pos + 2.0);
    const double lo = 1.0 / (out.n_neg + 2.0);
    out.t.reserve(labels.size());
    for (int y : labels) out.t.push_back(y > 0 ? hi : lo);
    return out;
}

double platt_loss(std::span<const double> f, std::span<const double> t, double a, double b) {
    double loss = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double z = a * f[i] + b;
        // -(t log p + (1 - t) log(1 - p)) with p = 1 / (1 + e^z), written stably.
        if (z >= 0) loss += t[i] * z + std::log1p(std::exp(-z));
        else loss += (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return loss;
}

} // namespace

double platt_objective(std::span<const double> f, std::span<const int> labels, double a, double b) {
    const auto targets = platt_targets(labels);
    return platt_loss(f, targets.t, a, b);
}

PlattFit fit_platt(std::span<const double> f, std::span<const int> labels) {
    if (f.size() != labels.size()) throw PreconditionError("fit_platt: values/labels size mismatch");
    check_binary_labels(labels, "fit_platt");
    const auto targets = platt_targets(labels);
    const auto& t = targets.t;

    PlattFit fit;
    if (std::all_of(f.begin(), f.end(), [&](double v) { return v == f.front(); })) {
        fit.a = 0.0;
        fit.b = std::log(targets.n_neg / targets.n_pos);
        fit.degenerate = true;
        return fit;
    }

    constexpr int kMaxIterations = 100;
    constexpr double kTolerance = 1e-10;
    constexpr double kMinStep = 1e-10;
    constexpr double kHessianRidge = 1e-12;

    double a = 0.0;
    double b = std::log((targets.n_neg + 1.0) / (targets.n_pos + 1.0));
    double fval = platt_loss(f, t, a, b);
    int iter = 0;
    for (; iter < kMaxIterations; ++iter) {
        double h11 = kHessianRidge, h22 = kHessianRidge, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double p = platt_probability(f[i], a, b);
            const double q = 1.0 - p;
            const double d2 = p * q;
            h11 += f[i] * f[i] * d2;
            h22 += d2;
            h21 += f[i] * d2;
            const double d1 = t[i] - p;
            g1 += f[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < kTolerance && std::abs(g2) < kTolerance) break;

        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;

        double step = 1.0;
        bool moved = false;
        while (step >= kMinStep) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nval = platt_loss(f, t, na, nb);
            if (nval < fval + 1e-4 * step * gd) {
                a = na;
                b = nb;
                fval = nval;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;  // line search cannot make progress at machine precision
    }
    fit.a = a;
    fit.b = b;
    fit.iterations = iter;
    return fit;
}

// ---------------------------------------------------------------------------

std::vector<double> default_penalty_grid() {
    std::vector<double> grid;
    for (int e = -5; e <= 5; e += 2) grid.push_back(std::ldexp(1.0, e));
    return grid;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int n_classes, int folds,
                                                       std::uint64_t seed) {
    if (folds < 2) throw PreconditionError("stratified_folds: need at least two folds");
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
    for (int c = 0; c < n_classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) members.push_back(i);
        }
        SplitMix64 rng(mix64(seed ^ (0xC2B2AE3D27D4EB4FULL * static_cast<std::uint64_t>(c + 1))));
        rng.shuffle(members);
        // Rotate the starting fold per class so small classes do not all pile
        // into fold 0.
        for (std::size_t k = 0; k < members.size(); ++k) {
            out[(k + static_cast<std::size_t>(c)) % out.size()].push_back(members[k]);
        }
    }
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

std::size_t pair_index(int i, int j, int n_classes) {
    // Pairs enumerated as (0,1), (0,2), ..., (0,n-1), (1,2), ...
    std::size_t idx = 0;
    for (int a = 0; a < i; ++a) idx += static_cast<std::size_t>(n_classes - a - 1);
    return idx + static_cast<std::size_t>(j - i - 1);
}

namespace {

struct PairData {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
};

PairData pair_data(std::span<const Sample> samples, std::span<const std::size_t> members, int ci, int cj) {
    PairData d;
    for (std::size_t idx : members) {
        const auto& s = samples[idx];
        if (s.label != ci && s.label != cj) continue;
        d.x.push_back(s.features);
        d.y.push_back(s.label == ci ? 1 : -1);
    }
    return d;
}

int vote(const std::vector<LinearSvm>& pairs, int n_classes, std::span<const double> x) {
    std::vector<int> votes(static_cast<std::size_t>(n_classes), 0);
    std::size_t p = 0;
    for (int i = 0; i < n_classes; ++i) {
        for (int j = i + 1; j < n_classes; ++j, ++p) {
            ++votes[pairs[p].decision(x) > 0 ? i : j];
        }
    }
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

void check_samples(std::span<const Sample> samples, int n_classes, int min_per_class, const char* op) {
    if (samples.empty()) throw PreconditionError(std::string(op) + ": no samples");
    const std::size_t dim = samples.front().features.size();
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    for (const auto& s : samples) {
        if (s.label < 0 || s.label >= n_classes) {
            throw PreconditionError(std::string(op) + ": label " + std::to_string(s.label) + " outside class list");
        }
        if (s.features.size() != dim) throw PreconditionError(std::string(op) + ": feature lengths differ");
        ++counts[s.label];
    }
    for (int c = 0; c < n_classes; ++c) {
        if (counts[c] < min_per_class) {
            throw PreconditionError(std::string(op) + ": class " + std::to_string(c) + " has " +
                                    std::to_string(counts[c]) + " samples, need at least " +
                                    std::to_string(min_per_class));
        }
    }
}

} // namespace

CvResult cross_validate(std::span<const Sample> samples, int n_classes, std::span<const double> penalty_grid,
                        const CvOptions& options) {
    if (n_classes < 2) throw PreconditionError("cross_validate: need at least two classes");
    if (penalty_grid.empty()) throw PreconditionError("cross_validate: empty penalty grid");
    check_samples(samples, n_classes, options.folds, "cross_validate");

    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(s.label);
    const auto folds = stratified_folds(labels, n_classes, options.folds, options.seed);

    CvResult result;
    for (double c : penalty_grid) {
        std::size_t correct = 0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            std::vector<std::size_t> train;
            for (std::size_t g = 0; g < folds.size(); ++g) {
                if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
            }
            std::sort(train.begin(), train.end());
            std::vector<LinearSvm> pairs;
            for (int i = 0; i < n_classes; ++i) {
                for (int j = i + 1; j < n_classes; ++j) {
                    const auto d = pair_data(samples, train, i, j);
                    SolverOptions solver = options.solver;
                    solver.seed = mix64(options.seed + pair_index(i, j, n_classes) * 131 + f);
                    pairs.push_back(train_binary(d.x, d.y, c, solver));
                }
            }
            for (std::size_t idx : folds[f]) {
                if (vote(pairs, n_classes, samples[idx].features) == samples[idx].label) ++correct;
            }
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(samples.size());
        result.table.push_back({c, acc});
    }
    // Best accuracy; ties resolved toward the smallest penalty.
    std::size_t best = 0;
    for (std::size_t k = 1; k < result.table.size(); ++k) {
        const auto& e = result.table[k];
        const auto& cur = result.table[best];
        if (e.accuracy > cur.accuracy || (e.accuracy == cur.accuracy && e.penalty < cur.penalty)) best = k;
    }
    result.best_penalty = result.table[best].penalty;
    result.best_accuracy = result.table[best].accuracy;
    return result;
}

// ---------------------------------------------------------------------------

std::vector<double> couple_pairwise(const std::vector<std::vector<double>>& r, double tolerance, int max_iterations) {
    const std::size_t k = r.size();
    if (k < 2) throw PreconditionError("couple_pairwise: need at least two classes");
    for (const auto& row : r) {
        if (row.size() != k) throw PreconditionError("couple_pairwise: r must be square");
    }
    std::vector<std::vector<double>> q(k, std::vector<double>(k, 0.0));
    for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t j = 0; j < k; ++j) {
            if (j == t) continue;
            q[t][t] += r[j][t] * r[j][t];
            q[t][j] = -r[j][t] * r[t][j];
        }
    }
    std::vector<double> p(k, 1.0 / static_cast<double>(k));
    std::vector<double> qp(k, 0.0);
    for (int iter = 0; iter < max_iterations; ++iter) {
        double pqp = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            qp[t] = 0.0;
            for (std::size_t j = 0; j < k; ++j) qp[t] += q[t][j] * p[j];
            pqp += p[t] * qp[t];
        }
        double max_error = 0.0;
        for (std::size_t t = 0; t < k; ++t) max_error = std::max(max_error, std::abs(qp[t] - pqp));
        if (max_error < tolerance) break;
        for (std::size_t t = 0; t < k; ++t) {
            const double diff = (-qp[t] + pqp) / q[t][t];
            p[t] += diff;
            pqp = (pqp + diff * (diff * q[t][t] + 2.0 * qp[t])) / (1.0 + diff) / (1.0 + diff);
            for (std::size_t j = 0; j < k; ++j) {
                qp[j] = (qp[j] + diff * q[t][j]) / (1.0 + diff);
                p[j] /= (1.0 + diff);
            }
        }
    }
    // Guard the simplex against rounding.
    double sum = 0.0;
    for (double& v : p) {
        v = std::max(v, 0.0);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

double coupling_objective(const std::vector<std::vector<double>>& r, std::span<const double> p) {
    double total = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = i + 1; j < r.size(); ++j) {
            const double d = r[j][i] * p[i] - r[i][j] * p[j];
            total += d * d;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------

double BinarySvm::decision(std::span<const double> x) const { return dot(w, x) + b; }

double BinarySvm::probability(std::span<const double> x) const {
    return platt_probability(decision(x), platt_a, platt_b);
}

namespace {

// Out-of-fold decision values for Platt fitting.
std::vector<double> cross_fold_decisions(const PairData& d, double penalty, int folds, const SolverOptions& solver,
                                         std::uint64_t seed) {
    std::vector<int> cls(d.y.size());
    for (std::size_t i = 0; i < d.y.size(); ++i) cls[i] = d.y[i] > 0 ? 0 : 1;
    const auto parts = stratified_folds(cls, 2, folds, seed);
    std::vector<double> values(d.y.size(), 0.0);
    for (std::size_t f = 0; f < parts.size(); ++f) {
        if (parts[f].empty()) continue;
        PairData train;
        std::vector<bool> held(d.y.size(), false);
        for (std::size_t idx : parts[f]) held[idx] = true;
        int pos = 0, neg = 0;
        for (std::size_t i = 0; i < d.y.size(); ++i) {
            if (held[i]) continue;
            train.x.push_back(d.x[i]);
            train.y.push_back(d.y[i]);
            (d.y[i] > 0 ? pos : neg) += 1;
        }
        if (pos == 0 || neg == 0) {
            for (std::size_t idx : parts[f]) values[idx] = pos > 0 ? 1.0 : -1.0;
            continue;
        }
        SolverOptions s = solver;
        s.seed = mix64(seed + 7 * f + 1);
        const auto m = train_binary(train.x, train.y, penalty, s);
        for (std::size_t idx : parts[f]) values[idx] = m.decision(d.x[idx]);
    }
    return values;
}

} // namespace

SvmModel train_model(std::span<const Sample> samples, Mode mode, const ModelTrainOptions& options) {
    SvmModel model;
    model.mode = mode;
    model.classes = class_names(mode);
    const int n_classes = static_cast<int>(model.classes.size());
    check_samples(samples, n_classes, options.folds, "train_model");
    model.feature_length = samples.front().features.size();

    CvOptions cv;
    cv.folds = options.folds;
    cv.seed = options.seed;
    cv.solver = options.solver;
    const auto cv_result = cross_validate(samples, n_classes, options.penalty_grid, cv);
    model.meta.penalty = cv_result.best_penalty;
    model.meta.cv_accuracy = cv_result.best_accuracy;
    model.meta.cv_table = cv_result.table;
    model.meta.seed = options.seed;

    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (int i = 0; i < n_classes; ++i) {
        for (int j = i + 1; j < n_classes; ++j) {
            const auto d = pair_data(samples, all, i, j);
            const std::uint64_t pair_seed = mix64(options.seed ^ (0x51ED2701ULL + pair_index(i, j, n_classes)));
            SolverOptions solver = options.solver;
            solver.seed = pair_seed;
            const auto svm = train_binary(d.x, d.y, model.meta.penalty, solver);
            const auto oof = cross_fold_decisions(d, model.meta.penalty, options.folds, options.solver, pair_seed);
            const auto platt = fit_platt(oof, d.y);

            BinarySvm pair;
            pair.class_i = i;
            pair.class_j = j;
            pair.w = svm.w;
            pair.b = svm.b;
            pair.platt_a = platt.a;
            pair.platt_b = platt.b;
            pair.platt_degenerate = platt.degenerate;
            model.pairs.push_back(std::move(pair));
        }
    }
    return model;
}

ClassProbabilities predict_proba(const SvmModel& model, std::span<const double> x) {
    if (x.size() != model.feature_length) {
        throw PreconditionError("predict_proba: feature length " + std::to_string(x.size()) +
                                " does not match model length " + std::to_string(model.feature_length));
    }
    const std::size_t k = model.classes.size();
    ClassProbabilities out;
    if (k == 2) {
        const double p = model.pairs.front().probability(x);
        out.p = {p, 1.0 - p};
    } else {
        std::vector<std::vector<double>> r(k, std::vector<double>(k, 0.0));
        for (const auto& pair : model.pairs) {
            const double v = std::clamp(pair.probability(x), 1e-7, 1.0 - 1e-7);
            r[pair.class_i][pair.class_j] = v;
            r[pair.class_j][pair.class_i] = 1.0 - v;
        }
        out.p = couple_pairwise(r);
    }
    out.argmax = static_cast<std::size_t>(std::max_element(out.p.begin(), out.p.end()) - out.p.begin());
    return out;
}

} // namespace bovw
