#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "id3/heuristics.hpp"
#include "id3/model.hpp"

namespace id3 {

// Growing set of unmasked scalar parameters, with the step each entry was
// selected at (for diagnostics). Backed by per-tensor step maps.
class MaskSet {
public:
    MaskSet() = default;

    explicit MaskSet(const Model& model) {
        steps_.reserve(model.tensor_count());
        for (const auto& p : model.registry())
            steps_.emplace_back(p.value.size(), kUnselected);
    }

    bool contains(ParamId id) const { return steps_[id.tensor][id.offset] != kUnselected; }

    void insert(ParamId id, std::int32_t step) {
        auto& s = steps_[id.tensor][id.offset];
        if (s == kUnselected) {
            s = step;
            ++count_;
        }
    }

    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }

    std::int32_t step_of(ParamId id) const { return steps_[id.tensor][id.offset]; }

    // sorted (tensor, offset) ascending
    std::vector<ParamId> ids() const {
        std::vector<ParamId> out;
        out.reserve(count_);
        for (std::size_t t = 0; t < steps_.size(); ++t)
            for (std::size_t o = 0; o < steps_[t].size(); ++o)
                if (steps_[t][o] != kUnselected)
                    out.push_back({static_cast<std::uint32_t>(t), o});
        return out;
    }

    // scalars of tensor t currently unmasked
    std::size_t count_in_tensor(std::size_t t) const {
        std::size_t n = 0;
        for (auto s : steps_[t])
            if (s != kUnselected) ++n;
        return n;
    }

    std::size_t tensor_count() const { return steps_.size(); }

    bool operator==(const MaskSet& o) const { return steps_ == o.steps_; }

private:
    static constexpr std::int32_t kUnselected = -1;
    std::vector<std::vector<std::int32_t>> steps_;
    std::size_t count_ = 0;
};

enum class Strategy { static_s, repeat_s, increment_s };

struct Scheduler {
    std::size_t budget = 0;
    std::size_t steps = 1;
};

struct StrategyConfig {
    Strategy strategy = Strategy::increment_s;
    HeuristicConfig heuristic;
    Scheduler scheduler;
};

// u_t = floor(B/T), with the first (B mod T) steps getting one extra,
// so the quotas sum to B exactly.
inline std::vector<std::size_t> uniform_schedule(std::size_t budget, std::size_t steps) {
    if (steps < 1) throw ConfigError("uniform_schedule: steps must be >= 1");
    std::vector<std::size_t> u(steps, budget / steps);
    for (std::size_t t = 0; t < budget % steps; ++t) ++u[t];
    return u;
}

// Deterministic top-k by score, ties broken by smallest (tensor, offset).
inline std::vector<ParamId> select_topk(ScoreField scores, std::size_t k) {
    if (k > scores.size()) {
        throw SelectionError("top-k budget " + std::to_string(k) + " exceeds " +
                             std::to_string(scores.size()) + " free parameters");
    }
    auto better = [](const ScoredParam& a, const ScoredParam& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    };
    std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k),
                      scores.end(), better);
    std::vector<ParamId> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(scores[i].id);
    return out;
}

// One mask-advance step. increment: union in the top-u_t of the complement;
// static: freeze the t=1 top-B; repeat: fresh top-B each step.
inline MaskSet advance_mask(const StrategyConfig& cfg, const MaskSet& prev,
                            const ScoreField& scores, std::size_t step,
                            std::size_t quota, const Model& model) {
    for (const auto& s : scores) {
        if (cfg.strategy == Strategy::increment_s && prev.contains(s.id)) {
            throw UsageError("increment candidates must exclude the current mask");
        }
    }
    switch (cfg.strategy) {
        case Strategy::increment_s: {
            MaskSet next = prev;
            for (ParamId id : select_topk(scores, std::min(quota, scores.size())))
                next.insert(id, static_cast<std::int32_t>(step));
            return next;
        }
        case Strategy::static_s: {
            if (step > 1) return prev;  // frozen after the first step
            MaskSet next(model);
            const std::size_t b = std::min(cfg.scheduler.budget, scores.size());
            for (ParamId id : select_topk(scores, b))
                next.insert(id, static_cast<std::int32_t>(step));
            return next;
        }
        case Strategy::repeat_s: {
            MaskSet next(model);
            const std::size_t b = std::min(cfg.scheduler.budget, scores.size());
            for (ParamId id : select_topk(scores, b))
                next.insert(id, static_cast<std::int32_t>(step));
            return next;
        }
    }
    throw UsageError("unknown strategy");
}

// Cardinality of the union of all per-step selected sets.
inline std::size_t distinct_updated(const std::vector<std::vector<ParamId>>& per_step) {
    std::vector<ParamId> all;
    for (const auto& s : per_step) all.insert(all.end(), s.begin(), s.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all.size();
}

}  // namespace id3
