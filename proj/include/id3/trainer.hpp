#pragma once

#include <chrono>
#include <cstdint>
#include <iostream>
#include <vector>

#include "id3/data.hpp"
#include "id3/heuristics.hpp"
#include "id3/model.hpp"
#include "id3/selection.hpp"

namespace id3 {

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t steps = 100;
    std::size_t batch_size = 32;
    StrategyConfig strategy;
    std::uint64_t seed = 0;
    bool strict_budget = false;  // fail instead of clamping when B > N

    void validate() const {
        if (learning_rate <= 0.0) throw ConfigError("learning rate must be > 0");
        if (steps < 1) throw ConfigError("steps must be >= 1");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        strategy.heuristic.validate();
    }
};

struct TrainReport {
    std::vector<double> loss;             // per step
    std::vector<std::size_t> mask_size;   // |Lambda_t| per step
    std::vector<std::size_t> unmasked;    // u_t actually applied per step
    // per step, per tensor: number of unmasked scalars (for sparsity series)
    std::vector<std::vector<std::size_t>> tensor_hits;
    std::size_t cum_updates = 0;          // sum over steps of |Lambda_t|
    std::size_t distinct = 0;             // union of per-step selected sets
    double final_accuracy = 0.0;
    double wall_seconds = 0.0;
};

// Eq. 3: keep the gradient for parameters in the mask, zero elsewhere.
inline void mask_gradients(std::vector<Tensor>& grads, const MaskSet& mask) {
    for (std::size_t t = 0; t < grads.size(); ++t)
        for (std::size_t o = 0; o < grads[t].size(); ++o)
            if (!mask.contains({static_cast<std::uint32_t>(t), o})) grads[t][o] = 0.0;
}

// theta <- theta - eta * grad (plain SGD)
inline void sgd_step(Model& model, const std::vector<Tensor>& grads, double lr) {
    auto& reg = model.registry_mut();
    for (std::size_t t = 0; t < reg.size(); ++t) {
        if (!grads[t].same_shape(reg[t].value)) {
            throw DimensionError("gradient shape mismatch for " + reg[t].name);
        }
        for (std::size_t o = 0; o < grads[t].size(); ++o)
            reg[t].value[o] -= lr * grads[t][o];
    }
}

inline double evaluate(const Model& model, const Dataset& data) {
    if (data.size() == 0) throw InputError("evaluate: empty dataset");
    auto fp = model.forward(data.x);
    const Tensor& logits = fp.tape.value(fp.logits);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j)
            if (logits.at(i, j) > logits.at(i, best)) best = j;
        if (best == data.y[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace detail {

// sequential epochs over a seeded shuffle
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
        : indices_(n), batch_(std::min(batch, n)), rng_(seed) {
        for (std::size_t i = 0; i < n; ++i) indices_[i] = i;
        reshuffle();
    }

    std::pair<Tensor, std::vector<std::size_t>> next(const Dataset& data) {
        Tensor x({batch_, data.dims()});
        std::vector<std::size_t> y(batch_);
        for (std::size_t i = 0; i < batch_; ++i) {
            if (cursor_ == indices_.size()) {
                reshuffle();
                cursor_ = 0;
            }
            const std::size_t idx = indices_[cursor_++];
            for (std::size_t j = 0; j < data.dims(); ++j) x.at(i, j) = data.x.at(idx, j);
            y[i] = data.y[idx];
        }
        return {std::move(x), std::move(y)};
    }

private:
    void reshuffle() {
        for (std::size_t i = indices_.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng_.uniform_int(i));
            std::swap(indices_[i - 1], indices_[j]);
        }
    }

    std::vector<std::size_t> indices_;
    std::size_t batch_;
    std::size_t cursor_ = 0;
    Rng rng_;
};

inline std::vector<ParamId> trainable_candidates(const Model& model, const MaskSet* exclude) {
    std::vector<ParamId> out;
    const auto& reg = model.registry();
    for (std::size_t t = 0; t < reg.size(); ++t) {
        if (!reg[t].trainable) continue;
        for (std::size_t o = 0; o < reg[t].value.size(); ++o) {
            ParamId id{static_cast<std::uint32_t>(t), o};
            if (exclude && exclude->contains(id)) continue;
            out.push_back(id);
        }
    }
    return out;
}

inline ScoreField score_candidates(const Model& model, const std::vector<Tensor>& grads,
                                   const std::vector<ParamId>& candidates,
                                   const HeuristicConfig& h, std::size_t step,
                                   const Tensor& batch_x, std::uint64_t run_seed) {
    ScoreField field;
    field.reserve(candidates.size());
    switch (h.kind) {
        case HeuristicKind::d3:
            for (ParamId id : candidates)
                field.push_back({id, d3_score(model.get_scalar(id), grads[id.tensor][id.offset],
                                              h.epsilon, h.exponent)});
            return field;
        case HeuristicKind::magnitude:
            for (ParamId id : candidates)
                field.push_back({id, magnitude_score(model.get_scalar(id))});
            return field;
        case HeuristicKind::fisher: {
            Rng rng(derive_seed(derive_seed(run_seed, h.seed), step));
            auto sq = fisher_grad_squares(model, batch_x, h.fisher_samples, rng);
            for (ParamId id : candidates)
                field.push_back({id, sq[id.tensor][id.offset]});
            return field;
        }
        case HeuristicKind::random:
            return random_score(candidates, derive_seed(derive_seed(run_seed, h.seed), step));
        case HeuristicKind::bias_only:
            for (ParamId id : candidates)
                field.push_back(
                    {id, model.registry()[id.tensor].kind == ParamKind::bias ? 1.0 : 0.0});
            return field;
    }
    throw ConfigError("unknown heuristic kind");
}

}  // namespace detail

struct FinetuneResult {
    MaskSet mask;      // final Lambda_T
    MaskSet selected;  // union of all per-step selected sets; equals mask for
                       // the monotone strategies, may be larger for repeat
    TrainReport report;
};

// Incremental parameter updation loop: minibatch, forward, loss, backward,
// score the complement, advance the mask, zero masked gradients, SGD step.
inline FinetuneResult finetune(Model& model, const Dataset& train, const TrainConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_trainable = model.trainable_scalar_count();
    std::size_t budget = cfg.strategy.scheduler.budget;
    if (budget > n_trainable) {
        if (cfg.strict_budget) {
            throw ConfigError("budget " + std::to_string(budget) + " exceeds " +
                              std::to_string(n_trainable) + " trainable parameters");
        }
        std::cerr << "warning: budget " << budget << " clamped to " << n_trainable << "\n";
        budget = n_trainable;
    }
    const std::size_t steps = cfg.strategy.scheduler.steps ? cfg.strategy.scheduler.steps
                                                           : cfg.steps;
    const auto schedule = uniform_schedule(budget, steps);

    StrategyConfig strat = cfg.strategy;
    strat.scheduler.budget = budget;
    strat.scheduler.steps = steps;

    detail::BatchSampler sampler(train.size(), cfg.batch_size, derive_seed(cfg.seed, 11));
    MaskSet mask(model);
    MaskSet selected_union(model);
    TrainReport report;
    report.loss.reserve(steps);

    for (std::size_t t = 1; t <= steps; ++t) {
        auto [bx, by] = sampler.next(train);
        auto fp = model.forward(bx);
        NodeId loss = fp.tape.softmax_cross_entropy(fp.logits, by);
        fp.tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(model.tensor_count());
        for (std::size_t i = 0; i < model.tensor_count(); ++i)
            grads.push_back(fp.tape.grad(fp.param_nodes[i]));

        const std::size_t prev_size = mask.size();
        if (strat.strategy == Strategy::increment_s) {
            auto candidates = detail::trainable_candidates(model, &mask);
            auto scores = detail::score_candidates(model, grads, candidates, strat.heuristic,
                                                   t, bx, cfg.seed);
            mask = advance_mask(strat, mask, scores, t, schedule[t - 1], model);
        } else if (strat.strategy == Strategy::repeat_s ||
                   (strat.strategy == Strategy::static_s && t == 1)) {
            auto candidates = detail::trainable_candidates(model, nullptr);
            auto scores = detail::score_candidates(model, grads, candidates, strat.heuristic,
                                                   t, bx, cfg.seed);
            mask = advance_mask(strat, mask, scores, t, budget, model);
        }
        for (ParamId id : mask.ids()) selected_union.insert(id, static_cast<std::int32_t>(t));

        std::vector<std::size_t> hits(model.tensor_count());
        for (std::size_t i = 0; i < model.tensor_count(); ++i)
            hits[i] = mask.count_in_tensor(i);
        report.tensor_hits.push_back(std::move(hits));

        mask_gradients(grads, mask);
        sgd_step(model, grads, cfg.learning_rate);

        report.loss.push_back(fp.tape.value(loss)[0]);
        report.mask_size.push_back(mask.size());
        report.unmasked.push_back(mask.size() - (strat.strategy == Strategy::increment_s
                                                     ? prev_size
                                                     : 0));
        report.cum_updates += mask.size();
    }
    report.distinct = selected_union.size();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(mask), std::move(selected_union), std::move(report)};
}

// Full dense training: every trainable parameter updated each step.
inline TrainReport train_dense(Model& model, const Dataset& train, double lr,
                               std::size_t steps, std::size_t batch_size,
                               std::uint64_t seed) {
    if (lr <= 0.0 || steps < 1 || batch_size < 1) throw ConfigError("bad dense train config");
    detail::BatchSampler sampler(train.size(), batch_size, derive_seed(seed, 11));
    TrainReport report;
    for (std::size_t t = 1; t <= steps; ++t) {
        auto [bx, by] = sampler.next(train);
        auto fp = model.forward(bx);
        NodeId loss = fp.tape.softmax_cross_entropy(fp.logits, by);
        fp.tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(model.tensor_count());
        for (std::size_t i = 0; i < model.tensor_count(); ++i) {
            const auto& p = model.registry()[i];
            Tensor g = fp.tape.grad(fp.param_nodes[i]);
            if (!p.trainable)
                for (auto& v : g.data()) v = 0.0;
            grads.push_back(std::move(g));
        }
        sgd_step(model, grads, lr);
        report.loss.push_back(fp.tape.value(loss)[0]);
        report.mask_size.push_back(model.trainable_scalar_count());
        report.cum_updates += model.trainable_scalar_count();
    }
    report.distinct = model.trainable_scalar_count();
    return report;
}

}  // namespace id3
