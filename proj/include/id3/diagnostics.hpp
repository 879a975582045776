#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "id3/model.hpp"
#include "id3/selection.hpp"
#include "id3/trainer.hpp"

namespace id3 {

// Fraction of tensor parameters with no unmasked scalar.
inline double tensor_sparsity(const MaskSet& mask, const Model& model) {
    const std::size_t m = model.tensor_count();
    std::size_t untouched = 0;
    for (std::size_t t = 0; t < m; ++t)
        if (mask.count_in_tensor(t) == 0) ++untouched;
    return static_cast<double>(untouched) / static_cast<double>(m);
}

// Per-tensor unmask fraction p_j = |P_j intersect Lambda| / |P_j|.
inline std::vector<double> sparsity_probabilities(const MaskSet& mask, const Model& model) {
    std::vector<double> p;
    p.reserve(model.tensor_count());
    for (std::size_t t = 0; t < model.tensor_count(); ++t) {
        p.push_back(static_cast<double>(mask.count_in_tensor(t)) /
                    static_cast<double>(model.registry()[t].value.size()));
    }
    return p;
}

// Entropy of the normalized p_j distribution, natural log; p_j does not
// sum to one, so q_j = p_j / sum(p) is used.
inline double entropy_of(const std::vector<double>& p) {
    double total = 0.0;
    for (double v : p) total += v;
    if (total <= 0.0) throw InputError("sparsity_entropy: empty mask");
    double h = 0.0;
    for (double v : p) {
        if (v <= 0.0) continue;
        const double q = v / total;
        h -= q * std::log(q);
    }
    return h;
}

inline double sparsity_entropy(const MaskSet& mask, const Model& model) {
    return entropy_of(sparsity_probabilities(mask, model));
}

struct UpdateCountReport {
    std::size_t observed = 0;
    std::size_t predicted = 0;
    double ratio_vs_static = 0.0;  // observed / (T*B)
};

// Observed cumulative scalar updates vs the closed form: (T+1)B/2 for
// increment (exact when T divides B), T*B for static.
inline UpdateCountReport update_count_report(const TrainReport& report, Strategy strategy,
                                             std::size_t budget, std::size_t steps) {
    UpdateCountReport out;
    out.observed = report.cum_updates;
    out.predicted = strategy == Strategy::increment_s ? (steps + 1) * budget / 2
                                                      : steps * budget;
    out.ratio_vs_static =
        static_cast<double>(out.observed) / static_cast<double>(steps * budget);
    return out;
}

struct SparsityReport {
    std::vector<double> tensor_sparsity_per_step;
    std::vector<double> entropy_per_step;  // NaN while the mask is empty
    std::vector<double> probabilities;
    double entropy = 0.0;
    double final_tensor_sparsity = 0.0;
    std::size_t tensor_count = 0;
};

inline SparsityReport make_sparsity_report(const TrainReport& report, const MaskSet& mask,
                                           const Model& model) {
    SparsityReport out;
    out.tensor_count = model.tensor_count();
    const double m = static_cast<double>(model.tensor_count());
    for (const auto& hits : report.tensor_hits) {
        std::size_t untouched = 0;
        std::vector<double> p(hits.size());
        double total = 0.0;
        for (std::size_t t = 0; t < hits.size(); ++t) {
            if (hits[t] == 0) ++untouched;
            p[t] = static_cast<double>(hits[t]) /
                   static_cast<double>(model.registry()[t].value.size());
            total += p[t];
        }
        out.tensor_sparsity_per_step.push_back(static_cast<double>(untouched) / m);
        out.entropy_per_step.push_back(total > 0.0 ? entropy_of(p)
                                                   : std::numeric_limits<double>::quiet_NaN());
    }
    out.probabilities = sparsity_probabilities(mask, model);
    out.final_tensor_sparsity = tensor_sparsity(mask, model);
    out.entropy = mask.empty() ? std::numeric_limits<double>::quiet_NaN()
                               : sparsity_entropy(mask, model);
    return out;
}

// Bernoulli(p) score function d/dp log f(y; p) = y/p - (1-y)/(1-p).
inline double bernoulli_score(double p, bool y) {
    return y ? 1.0 / p : -1.0 / (1.0 - p);
}

struct FisherBoundResult {
    double e_h = 0.0;          // Monte-Carlo E[H(theta)]
    double e_h_stderr = 0.0;
    double sqrt_i = 0.0;       // Monte-Carlo sqrt(E[score^2])
    double e_abs_score = 0.0;  // Monte-Carlo E|score|
    double i_estimate = 0.0;
    bool holds = false;
};

// Monte-Carlo check of the Fisher bound E[H] <= sqrt(I) on a Bernoulli(p)
// head with theta = p. Valid regime only: eps >= 1, exp >= 0.
inline FisherBoundResult fisher_bound_check(double p, double epsilon, double exponent,
                                            std::size_t samples, std::uint64_t seed) {
    if (epsilon < 1.0) throw ConfigError("fisher_bound_check requires epsilon >= 1");
    if (exponent < 0.0) throw ConfigError("fisher_bound_check requires exp >= 0");
    if (samples < 10000) throw ConfigError("fisher_bound_check requires >= 1e4 samples");
    if (p <= 0.0 || p >= 1.0) throw ConfigError("p must be in (0, 1)");
    Rng rng(seed);
    const double denom = std::pow(std::abs(p) + epsilon, exponent);
    double sum_h = 0.0, sum_h2 = 0.0, sum_abs = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double s = bernoulli_score(p, rng.bernoulli(p));
        const double h = std::abs(s) / denom;
        sum_h += h;
        sum_h2 += h * h;
        sum_abs += std::abs(s);
        sum_sq += s * s;
    }
    const double n = static_cast<double>(samples);
    FisherBoundResult r;
    r.e_h = sum_h / n;
    const double var_h = std::max(0.0, sum_h2 / n - r.e_h * r.e_h);
    r.e_h_stderr = std::sqrt(var_h / n);
    r.e_abs_score = sum_abs / n;
    r.i_estimate = sum_sq / n;
    r.sqrt_i = std::sqrt(r.i_estimate);
    r.holds = r.e_h <= r.sqrt_i + 3.0 * r.e_h_stderr;
    return r;
}

}  // namespace id3
