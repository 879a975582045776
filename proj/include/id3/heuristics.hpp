#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "id3/model.hpp"
#include "id3/rng.hpp"

namespace id3 {

enum class HeuristicKind { d3, magnitude, fisher, random, bias_only };

struct HeuristicConfig {
    HeuristicKind kind = HeuristicKind::d3;
    double epsilon = 1.0;
    double exponent = 2.0;
    std::size_t fisher_samples = 1;
    std::uint64_t seed = 0;  // random kind only

    void validate() const {
        if (epsilon <= 0.0) throw ConfigError("heuristic epsilon must be > 0");
        if (fisher_samples < 1) throw ConfigError("fisher_samples must be >= 1");
    }

    // appendix preset: eps=1, exp=2; sweep preset: eps=0.5, exp=-1
    static HeuristicConfig d3_appendix() { return {HeuristicKind::d3, 1.0, 2.0, 1, 0}; }
    static HeuristicConfig d3_sweep() { return {HeuristicKind::d3, 0.5, -1.0, 1, 0}; }
};

struct ScoredParam {
    ParamId id;
    double score;
};

using ScoreField = std::vector<ScoredParam>;

// |grad| / (|theta| + eps)^exp
inline double d3_score(double theta, double grad, double epsilon, double exponent) {
    if (epsilon <= 0.0) throw ConfigError("d3_score: epsilon must be > 0");
    return std::abs(grad) / std::pow(std::abs(theta) + epsilon, exponent);
}

// negated magnitude so top-k picks the smallest-magnitude parameters
inline double magnitude_score(double theta) { return -std::abs(theta); }

// Uniform(0,1) score per candidate, deterministic per seed.
inline ScoreField random_score(const std::vector<ParamId>& candidates, std::uint64_t seed) {
    Rng rng(seed);
    ScoreField field;
    field.reserve(candidates.size());
    for (ParamId id : candidates) field.push_back({id, rng.uniform()});
    return field;
}

// All ParamIds of bias tensors, registry order.
inline std::vector<ParamId> bias_only_select(const Model& model) {
    std::vector<ParamId> out;
    const auto& reg = model.registry();
    for (std::size_t t = 0; t < reg.size(); ++t) {
        if (reg[t].kind != ParamKind::bias) continue;
        for (std::size_t o = 0; o < reg[t].value.size(); ++o)
            out.push_back({static_cast<std::uint32_t>(t), o});
    }
    return out;
}

// Empirical Fisher over a minibatch: mean squared gradient of the sampled
// log-likelihood, labels drawn from the model's own predictive distribution
// ("label" sampling). Returns one score per scalar parameter, registry order.
inline std::vector<Tensor> fisher_grad_squares(const Model& model, const Tensor& batch,
                                               std::size_t fisher_samples, Rng& rng) {
    if (fisher_samples < 1) throw ConfigError("fisher_samples must be >= 1");
    std::vector<Tensor> acc;
    for (const auto& p : model.registry()) acc.emplace_back(p.value.shape());
    const std::size_t b = batch.rows();
    for (std::size_t s = 0; s < fisher_samples; ++s) {
        auto fp = model.forward(batch);
        const Tensor& logits = fp.tape.value(fp.logits);
        const std::size_t c = logits.cols();
        std::vector<std::size_t> sampled(b);
        for (std::size_t i = 0; i < b; ++i) {
            double mx = logits.at(i, 0);
            for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
            double z = 0.0;
            for (std::size_t j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
            double u = rng.uniform() * z;
            std::size_t pick = c - 1;
            for (std::size_t j = 0; j < c; ++j) {
                u -= std::exp(logits.at(i, j) - mx);
                if (u < 0.0) {
                    pick = j;
                    break;
                }
            }
            sampled[i] = pick;
        }
        NodeId loss = fp.tape.softmax_cross_entropy(fp.logits, sampled);
        fp.tape.backward(loss);
        for (std::size_t t = 0; t < acc.size(); ++t) {
            const Tensor& g = fp.tape.grad(fp.param_nodes[t]);
            for (std::size_t i = 0; i < g.size(); ++i) acc[t][i] += g[i] * g[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(fisher_samples);
    for (auto& t : acc)
        for (std::size_t i = 0; i < t.size(); ++i) t[i] *= inv;
    return acc;
}

}  // namespace id3
