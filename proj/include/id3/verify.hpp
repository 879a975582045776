#pragma once

#include <iostream>
#include <string>
#include <vector>

#include "id3/data.hpp"
#include "id3/diagnostics.hpp"
#include "id3/mask_store.hpp"
#include "id3/trainer.hpp"

namespace id3 {

namespace verify_detail {

inline Model small_pretrained(std::uint64_t seed) {
    ModelConfig mc;
    mc.widths = {2, 16, 16, 2};
    mc.init_seed = seed;
    Model model = Model::build_mlp(mc);
    TaskSpec spec;
    LabeledSplit data = gen_synthetic(spec, seed);
    train_dense(model, data.train, 0.1, 100, 32, seed);
    return model;
}

inline FinetuneResult run_finetune(Model& model, Strategy strategy, std::size_t budget,
                                   std::size_t steps, std::uint64_t seed) {
    TaskSpec spec;
    spec.shift = {1.0, 1.0};
    LabeledSplit data = gen_synthetic(spec, seed);
    TrainConfig tc;
    tc.learning_rate = 0.05;
    tc.steps = steps;
    tc.batch_size = 32;
    tc.seed = seed;
    tc.strategy.strategy = strategy;
    tc.strategy.heuristic = HeuristicConfig::d3_appendix();
    tc.strategy.scheduler = {budget, steps};
    return finetune(model, data.train, tc);
}

}  // namespace verify_detail

// U_increment == (T+1)B/2 and U_static == T*B, integer equality.
inline bool check_update_count_law(std::ostream& log = std::cout) {
    bool ok = true;
    for (auto [steps, budget] : std::vector<std::pair<std::size_t, std::size_t>>{
             {10, 100}, {20, 200}}) {
        Model inc = verify_detail::small_pretrained(3);
        Model sta = inc;
        auto r_inc = verify_detail::run_finetune(inc, Strategy::increment_s, budget, steps, 3);
        auto r_sta = verify_detail::run_finetune(sta, Strategy::static_s, budget, steps, 3);
        const std::size_t want_inc = (steps + 1) * budget / 2;
        const std::size_t want_sta = steps * budget;
        if (r_inc.report.cum_updates != want_inc || r_sta.report.cum_updates != want_sta) {
            log << "  update-count mismatch at T=" << steps << " B=" << budget << ": got "
                << r_inc.report.cum_updates << "/" << r_sta.report.cum_updates << " want "
                << want_inc << "/" << want_sta << "\n";
            ok = false;
        }
    }
    return ok;
}

// decode(encode(x)) == x and apply(pretrained, ckpt) == finetuned.
inline bool check_codec_roundtrip(std::ostream& log = std::cout) {
    Model pretrained = verify_detail::small_pretrained(5);
    Model finetuned = pretrained;
    auto r = verify_detail::run_finetune(finetuned, Strategy::increment_s, 40, 20, 5);
    const std::string bytes = encode(finetuned, r.mask);
    SparseCheckpoint ckpt = decode(bytes);
    if (!(ckpt == make_checkpoint(finetuned, r.mask))) {
        log << "  decode(encode(x)) != x\n";
        return false;
    }
    Model restored = pretrained;
    apply(ckpt, restored);
    for (std::size_t t = 0; t < restored.tensor_count(); ++t) {
        if (restored.registry()[t].value.data() != finetuned.registry()[t].value.data()) {
            log << "  restored model differs from finetuned in "
                << restored.registry()[t].name << "\n";
            return false;
        }
    }
    return true;
}

inline bool frozen_params_identical(const Model& pretrained, const Model& finetuned,
                                    const MaskSet& selected, std::ostream& log = std::cout) {
    for (std::size_t t = 0; t < pretrained.tensor_count(); ++t) {
        const Tensor& a = pretrained.registry()[t].value;
        const Tensor& b = finetuned.registry()[t].value;
        for (std::size_t o = 0; o < a.size(); ++o) {
            if (selected.contains({static_cast<std::uint32_t>(t), o})) continue;
            if (a[o] != b[o]) {
                log << "  frozen parameter changed: " << pretrained.registry()[t].name
                    << "[" << o << "]\n";
                return false;
            }
        }
    }
    return true;
}

// Parameters never selected stay bitwise equal to their pretrained values.
inline bool check_frozen_identity(std::ostream& log = std::cout) {
    Model pretrained = verify_detail::small_pretrained(9);
    Model finetuned = pretrained;
    auto r = verify_detail::run_finetune(finetuned, Strategy::increment_s, 30, 15, 9);
    return frozen_params_identical(pretrained, finetuned, r.mask, log);
}

// Theorem regime sweep: E[H] <= sqrt(I) + 3 SE for Bernoulli heads.
inline bool check_fisher_bound(std::ostream& log = std::cout) {
    bool ok = true;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9})
        for (double eps : {1.0, 2.0})
            for (double ex : {0.0, 1.0, 2.0}) {
                auto r = fisher_bound_check(p, eps, ex, 100000, 42);
                if (!r.holds) {
                    log << "  fisher bound violated at p=" << p << " eps=" << eps
                        << " exp=" << ex << ": E[H]=" << r.e_h << " sqrt(I)=" << r.sqrt_i
                        << "\n";
                    ok = false;
                }
            }
    return ok;
}

// Built-in verification suite; prints one line per check.
inline bool run_verification(std::ostream& log = std::cout) {
    struct Check {
        const char* name;
        bool (*fn)(std::ostream&);
    };
    const Check checks[] = {
        {"update-count law", check_update_count_law},
        {"sparse checkpoint roundtrip", check_codec_roundtrip},
        {"frozen-parameter identity", check_frozen_identity},
        {"fisher bound", check_fisher_bound},
    };
    bool all = true;
    for (const auto& c : checks) {
        const bool ok = c.fn(log);
        log << (ok ? "PASS" : "FAIL") << "  " << c.name << "\n";
        all = all && ok;
    }
    return all;
}

}  // namespace id3
