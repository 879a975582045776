#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "id3/data.hpp"
#include "id3/diagnostics.hpp"
#include "id3/mask_store.hpp"
#include "id3/model.hpp"
#include "id3/trainer.hpp"

namespace id3 {

using json = nlohmann::json;

// shortest-roundtrip decimal form, locale independent
inline std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::static_s: return "static";
        case Strategy::repeat_s: return "repeat";
        case Strategy::increment_s: return "increment";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "static") return Strategy::static_s;
    if (s == "repeat") return Strategy::repeat_s;
    if (s == "increment") return Strategy::increment_s;
    throw ConfigError("unknown strategy: " + s);
}

inline std::string heuristic_name(HeuristicKind k) {
    switch (k) {
        case HeuristicKind::d3: return "d3";
        case HeuristicKind::magnitude: return "magnitude";
        case HeuristicKind::fisher: return "fisher";
        case HeuristicKind::random: return "random";
        case HeuristicKind::bias_only: return "bias_only";
    }
    return "?";
}

inline HeuristicKind parse_heuristic(const std::string& s) {
    if (s == "d3") return HeuristicKind::d3;
    if (s == "magnitude") return HeuristicKind::magnitude;
    if (s == "fisher") return HeuristicKind::fisher;
    if (s == "random") return HeuristicKind::random;
    if (s == "bias_only") return HeuristicKind::bias_only;
    throw ConfigError("unknown heuristic: " + s);
}

struct ExperimentConfig {
    TaskSpec source_task;
    std::vector<double> target_shift = {1.0, 1.0};
    ModelConfig model;
    bool train_adapters_only = false;
    double pretrain_lr = 0.1;
    std::size_t pretrain_steps = 400;
    std::size_t pretrain_batch = 32;
    std::uint64_t task_seed = 7;
    double finetune_lr = 0.1;
    std::size_t finetune_steps = 200;
    std::size_t finetune_batch = 32;
    bool strict_budget = false;
    std::vector<StrategyConfig> strategies;
    std::vector<std::size_t> budgets;
    std::vector<std::uint64_t> seeds;
    std::string out_dir = "out";
};

inline HeuristicConfig heuristic_from_json(const json& j) {
    HeuristicConfig h = HeuristicConfig::d3_appendix();
    if (j.contains("heuristic")) h.kind = parse_heuristic(j.at("heuristic").get<std::string>());
    if (j.contains("preset")) {
        const std::string p = j.at("preset").get<std::string>();
        if (p == "appendix") h = HeuristicConfig::d3_appendix();
        else if (p == "sweep") h = HeuristicConfig::d3_sweep();
        else throw ConfigError("unknown heuristic preset: " + p);
        if (j.contains("heuristic")) h.kind = parse_heuristic(j.at("heuristic").get<std::string>());
    }
    if (j.contains("epsilon")) h.epsilon = j.at("epsilon").get<double>();
    if (j.contains("exp")) h.exponent = j.at("exp").get<double>();
    if (j.contains("fisher_samples")) h.fisher_samples = j.at("fisher_samples").get<std::size_t>();
    if (j.contains("heuristic_seed")) h.seed = j.at("heuristic_seed").get<std::uint64_t>();
    h.validate();
    return h;
}

inline ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig cfg;
    try {
        if (j.contains("task")) {
            const json& t = j.at("task");
            if (t.contains("generator")) cfg.source_task.generator = t.at("generator");
            if (t.contains("classes")) cfg.source_task.classes = t.at("classes");
            if (t.contains("dims")) cfg.source_task.dims = t.at("dims");
            if (t.contains("separation")) cfg.source_task.separation = t.at("separation");
            if (t.contains("train_n")) cfg.source_task.train_n = t.at("train_n");
            if (t.contains("test_n")) cfg.source_task.test_n = t.at("test_n");
            if (t.contains("seed")) cfg.task_seed = t.at("seed");
            if (t.contains("shift")) cfg.target_shift = t.at("shift").get<std::vector<double>>();
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            cfg.model.widths = m.at("widths").get<std::vector<std::size_t>>();
            if (m.contains("activation")) {
                const std::string a = m.at("activation");
                if (a == "relu") cfg.model.activation = Activation::relu;
                else if (a == "tanh") cfg.model.activation = Activation::tanh;
                else throw ConfigError("unknown activation: " + a);
            }
            if (m.contains("adapter_rank")) cfg.model.adapter_rank = m.at("adapter_rank");
            if (m.contains("adapter_layers"))
                cfg.model.adapter_layers = m.at("adapter_layers").get<std::vector<std::size_t>>();
            if (m.contains("init_seed")) cfg.model.init_seed = m.at("init_seed");
            if (m.contains("train_adapters_only"))
                cfg.train_adapters_only = m.at("train_adapters_only");
        } else {
            throw ConfigError("config missing 'model'");
        }
        if (j.contains("pretrain")) {
            const json& p = j.at("pretrain");
            if (p.contains("lr")) cfg.pretrain_lr = p.at("lr");
            if (p.contains("steps")) cfg.pretrain_steps = p.at("steps");
            if (p.contains("batch_size")) cfg.pretrain_batch = p.at("batch_size");
        }
        if (j.contains("finetune")) {
            const json& f = j.at("finetune");
            if (f.contains("lr")) cfg.finetune_lr = f.at("lr");
            if (f.contains("steps")) cfg.finetune_steps = f.at("steps");
            if (f.contains("batch_size")) cfg.finetune_batch = f.at("batch_size");
        }
        if (j.contains("strict_budget")) cfg.strict_budget = j.at("strict_budget");
        for (const json& s : j.value("strategies", json::array())) {
            StrategyConfig sc;
            sc.strategy = parse_strategy(s.at("strategy").get<std::string>());
            sc.heuristic = heuristic_from_json(s);
            cfg.strategies.push_back(sc);
        }
        if (j.contains("budgets")) cfg.budgets = j.at("budgets").get<std::vector<std::size_t>>();
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("out")) cfg.out_dir = j.at("out");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    if (cfg.seeds.empty()) throw ConfigError("config needs at least one seed");
    return cfg;
}

inline Model build_configured_model(const ExperimentConfig& cfg) {
    Model m = Model::build_mlp(cfg.model);
    if (cfg.train_adapters_only) {
        for (auto& p : m.registry_mut()) {
            p.trainable = p.kind == ParamKind::adapter_a || p.kind == ParamKind::adapter_b;
        }
    }
    return m;
}

// FNV-1a over the canonical JSON of the pretraining-relevant config; keys
// pretrained checkpoints shared across a sweep.
inline std::uint64_t pretrain_cache_key(const ExperimentConfig& cfg) {
    json j;
    j["widths"] = cfg.model.widths;
    j["activation"] = cfg.model.activation == Activation::relu ? "relu" : "tanh";
    j["adapter_rank"] = cfg.model.adapter_rank;
    j["adapter_layers"] = cfg.model.adapter_layers;
    j["init_seed"] = cfg.model.init_seed;
    j["generator"] = cfg.source_task.generator;
    j["classes"] = cfg.source_task.classes;
    j["dims"] = cfg.source_task.dims;
    j["separation"] = cfg.source_task.separation;
    j["train_n"] = cfg.source_task.train_n;
    j["task_seed"] = cfg.task_seed;
    j["lr"] = cfg.pretrain_lr;
    j["steps"] = cfg.pretrain_steps;
    j["batch"] = cfg.pretrain_batch;
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Pretrain on the source task, or reuse a cached dense checkpoint.
inline Model pretrained_model(const ExperimentConfig& cfg, const std::string& cache_dir) {
    Model model = build_configured_model(cfg);
    namespace fs = std::filesystem;
    char key[17];
    std::snprintf(key, sizeof(key), "%016llx",
                  static_cast<unsigned long long>(pretrain_cache_key(cfg)));
    const fs::path path = fs::path(cache_dir) / ("pretrained_" + std::string(key) + ".bin");
    if (fs::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        model.load_dense(in);
        return model;
    }
    // dense pretraining updates every parameter, adapters included; the
    // adapter experiments re-freeze afterwards via train_adapters_only
    for (auto& p : model.registry_mut()) p.trainable = true;
    LabeledSplit source = gen_synthetic(cfg.source_task, cfg.task_seed);
    train_dense(model, source.train, cfg.pretrain_lr, cfg.pretrain_steps, cfg.pretrain_batch,
                derive_seed(cfg.task_seed, 0x9E7));
    if (cfg.train_adapters_only) {
        for (auto& p : model.registry_mut()) {
            p.trainable = p.kind == ParamKind::adapter_a || p.kind == ParamKind::adapter_b;
        }
    } else if (cfg.model.adapter_rank > 0) {
        for (auto& p : model.registry_mut())
            if (p.kind == ParamKind::weight) p.trainable = false;
    }
    fs::create_directories(cache_dir);
    std::ofstream out(path, std::ios::binary);
    model.save_dense(out);
    return model;
}

inline json train_report_json(const TrainReport& r) {
    json j;
    j["loss"] = r.loss;
    j["mask_size"] = r.mask_size;
    j["unmasked_per_step"] = r.unmasked;
    j["cum_updates"] = r.cum_updates;
    j["distinct_updated"] = r.distinct;
    j["final_accuracy"] = r.final_accuracy;
    return j;
}

inline json sparsity_report_json(const SparsityReport& r, std::size_t budget, std::size_t n) {
    json j;
    j["tensor_sparsity_per_step"] = r.tensor_sparsity_per_step;
    j["final_tensor_sparsity"] = r.final_tensor_sparsity;
    j["probabilities"] = r.probabilities;
    j["entropy"] = r.entropy;
    j["tensor_count"] = r.tensor_count;
    // the budget fraction B/N and its complement; both conventions are used
    j["budget_fraction"] = static_cast<double>(budget) / static_cast<double>(n);
    j["sparsity"] = 1.0 - static_cast<double>(budget) / static_cast<double>(n);
    return j;
}

struct CellResult {
    std::string strategy;
    std::string heuristic;
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double accuracy = 0.0;
    std::size_t distinct = 0;
    std::size_t cum_updates = 0;
};

inline std::string cell_dir_name(const CellResult& c) {
    return c.strategy + "_" + c.heuristic + "_b" + std::to_string(c.budget) + "_s" +
           std::to_string(c.seed);
}

// One sweep cell: finetune a copy of the pretrained model on the target
// task, evaluate, and write per-run artifacts.
inline CellResult run_cell(const ExperimentConfig& cfg, const Model& pretrained,
                           const LabeledSplit& target, const StrategyConfig& strat,
                           std::size_t budget, std::uint64_t seed, std::size_t cell_index) {
    CellResult cell;
    cell.strategy = strategy_name(strat.strategy);
    cell.heuristic = heuristic_name(strat.heuristic.kind);
    cell.budget = budget;
    cell.seed = seed;
    try {
        Model model = pretrained;
        TrainConfig tc;
        tc.learning_rate = cfg.finetune_lr;
        tc.steps = cfg.finetune_steps;
        tc.batch_size = cfg.finetune_batch;
        tc.strategy = strat;
        tc.strategy.scheduler.budget = budget;
        tc.strategy.scheduler.steps = cfg.finetune_steps;
        tc.seed = derive_seed(seed, cell_index);
        tc.strict_budget = cfg.strict_budget;
        auto result = finetune(model, target.train, tc);
        result.report.final_accuracy = evaluate(model, target.test);

        namespace fs = std::filesystem;
        const fs::path dir = fs::path(cfg.out_dir) / cell_dir_name(cell);
        fs::create_directories(dir);
        {
            std::ofstream f(dir / "train_report.json");
            f << train_report_json(result.report).dump(2) << "\n";
        }
        {
            auto sr = make_sparsity_report(result.report, result.mask, model);
            std::ofstream f(dir / "sparsity_report.json");
            f << sparsity_report_json(sr, budget, model.trainable_scalar_count()).dump(2)
              << "\n";
            std::ofstream csv(dir / "series.csv");
            csv << "step,loss,u_t,mask_size,cum_updates,tensor_sparsity,entropy\n";
            std::size_t cum = 0;
            for (std::size_t t = 0; t < result.report.loss.size(); ++t) {
                cum += result.report.mask_size[t];
                csv << (t + 1) << "," << fmt_double(result.report.loss[t]) << ","
                    << result.report.unmasked[t] << "," << result.report.mask_size[t] << ","
                    << cum << ","
                    << fmt_double(sr.tensor_sparsity_per_step[t]) << ",";
                if (!std::isnan(sr.entropy_per_step[t]))
                    csv << fmt_double(sr.entropy_per_step[t]);
                csv << "\n";
            }
        }
        {
            std::ofstream f(dir / "mask.idmk", std::ios::binary);
            // the union of selected sets, so applying the checkpoint to the
            // pretrained model reproduces the finetuned one for repeat too
            const std::string bytes = encode(model, result.selected);
            f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        }
        cell.ok = true;
        cell.accuracy = result.report.final_accuracy;
        cell.distinct = result.report.distinct;
        cell.cum_updates = result.report.cum_updates;
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
    }
    return cell;
}

// Full sweep: grid of (strategy, budget, seed) against one shared
// pretrained model; aggregate CSV written in deterministic cell order.
inline std::vector<CellResult> run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    Model pretrained = pretrained_model(cfg, cfg.out_dir);

    TaskSpec target_spec = cfg.source_task;
    target_spec.shift = cfg.target_shift;
    LabeledSplit target = gen_synthetic(target_spec, cfg.task_seed);

    std::vector<CellResult> results;
    std::size_t cell_index = 0;
    for (const auto& strat : cfg.strategies)
        for (std::size_t budget : cfg.budgets)
            for (std::uint64_t seed : cfg.seeds) {
                results.push_back(
                    run_cell(cfg, pretrained, target, strat, budget, seed, cell_index));
                ++cell_index;
            }

    std::ofstream csv(fs::path(cfg.out_dir) / "aggregate.csv");
    csv << "strategy,heuristic,budget,seed,status,accuracy,distinct_updated,cum_updates\n";
    for (const auto& c : results) {
        csv << c.strategy << "," << c.heuristic << "," << c.budget << "," << c.seed << ","
            << (c.ok ? "ok" : "failed") << "," << (c.ok ? fmt_double(c.accuracy) : "") << ","
            << c.distinct << "," << c.cum_updates << "\n";
    }
    return results;
}

}  // namespace id3
