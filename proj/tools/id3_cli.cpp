#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "id3/experiment.hpp"
#include "id3/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

id3::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw id3::ConfigError("cannot open config file: " + path);
    id3::json j;
    try {
        in >> j;
    } catch (const id3::json::exception& e) {
        throw id3::ConfigError(std::string("config parse failure in ") + path + ": " +
                               e.what());
    }
    return id3::parse_experiment_config(j);
}

struct Overrides {
    std::string strategy;
    std::string heuristic;
    long long budget = -1;
    long long steps = -1;
    double epsilon = -1.0;
    double exponent = std::numeric_limits<double>::quiet_NaN();
    long long seed = -1;
    std::string out;

    void apply(id3::ExperimentConfig& cfg) const {
        if (!out.empty()) cfg.out_dir = out;
        if (steps >= 0) cfg.finetune_steps = static_cast<std::size_t>(steps);
        if (budget >= 0) cfg.budgets = {static_cast<std::size_t>(budget)};
        if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
        if (cfg.strategies.empty()) cfg.strategies.push_back({});
        for (auto& s : cfg.strategies) {
            if (!strategy.empty()) s.strategy = id3::parse_strategy(strategy);
            if (!heuristic.empty()) s.heuristic.kind = id3::parse_heuristic(heuristic);
            if (epsilon > 0.0) s.heuristic.epsilon = epsilon;
            if (!std::isnan(exponent)) s.heuristic.exponent = exponent;
            s.heuristic.validate();
        }
    }
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--strategy", o.strategy, "static | repeat | increment");
    cmd->add_option("--heuristic", o.heuristic, "d3 | magnitude | fisher | random | bias_only");
    cmd->add_option("--budget", o.budget, "scalar-parameter budget B");
    cmd->add_option("--steps", o.steps, "fine-tuning steps T");
    cmd->add_option("--epsilon", o.epsilon, "heuristic epsilon");
    cmd->add_option("--exp", o.exponent, "heuristic exponent");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("--out", o.out, "output directory");
}

int cmd_pretrain(const std::string& config_path, const Overrides& o) {
    auto cfg = load_config(config_path);
    o.apply(cfg);
    id3::Model model = id3::pretrained_model(cfg, cfg.out_dir);
    auto source = id3::gen_synthetic(cfg.source_task, cfg.task_seed);
    std::cout << "pretrained model: N=" << model.scalar_count()
              << " source test accuracy=" << id3::evaluate(model, source.test) << "\n";
    return kExitOk;
}

int cmd_finetune(const std::string& config_path, const Overrides& o) {
    auto cfg = load_config(config_path);
    o.apply(cfg);
    if (cfg.strategies.empty()) cfg.strategies.push_back({});
    if (cfg.budgets.empty()) throw id3::ConfigError("no budget given (--budget or config)");
    id3::Model pretrained = id3::pretrained_model(cfg, cfg.out_dir);
    id3::TaskSpec target_spec = cfg.source_task;
    target_spec.shift = cfg.target_shift;
    auto target = id3::gen_synthetic(target_spec, cfg.task_seed);
    auto cell = id3::run_cell(cfg, pretrained, target, cfg.strategies.front(),
                              cfg.budgets.front(), cfg.seeds.front(), 0);
    if (!cell.ok) {
        std::cerr << "finetune failed: " << cell.error << "\n";
        return kExitRunFailure;
    }
    std::cout << "finetune " << id3::cell_dir_name(cell)
              << ": accuracy=" << id3::fmt_double(cell.accuracy)
              << " distinct_updated=" << cell.distinct << " updates=" << cell.cum_updates
              << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& mask_path,
             const Overrides& o) {
    auto cfg = load_config(config_path);
    o.apply(cfg);
    id3::Model model = id3::pretrained_model(cfg, cfg.out_dir);
    if (!mask_path.empty()) {
        std::ifstream in(mask_path, std::ios::binary);
        if (!in) throw id3::ConfigError("cannot open mask checkpoint: " + mask_path);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        id3::apply(id3::decode(bytes), model);
    }
    id3::TaskSpec target_spec = cfg.source_task;
    target_spec.shift = cfg.target_shift;
    auto target = id3::gen_synthetic(target_spec, cfg.task_seed);
    std::cout << "accuracy=" << id3::fmt_double(id3::evaluate(model, target.test)) << "\n";
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const Overrides& o) {
    auto cfg = load_config(config_path);
    o.apply(cfg);
    if (cfg.strategies.empty() || cfg.budgets.empty()) {
        throw id3::ConfigError("sweep needs at least one strategy and one budget");
    }
    auto results = id3::run_experiment(cfg);
    std::size_t failed = 0;
    for (const auto& c : results) {
        std::cout << id3::cell_dir_name(c) << ": "
                  << (c.ok ? "accuracy=" + id3::fmt_double(c.accuracy)
                           : "FAILED (" + c.error + ")")
                  << "\n";
        if (!c.ok) ++failed;
    }
    std::cout << results.size() - failed << "/" << results.size() << " cells ok, aggregate at "
              << (std::filesystem::path(cfg.out_dir) / "aggregate.csv").string() << "\n";
    return failed == 0 ? kExitOk : kExitRunFailure;
}

int cmd_mask_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw id3::ConfigError("cannot open mask checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    id3::SparseCheckpoint ckpt = id3::decode(bytes);
    std::cout << "tensor,row,col,value\n";
    for (const auto& b : ckpt.blocks)
        for (const auto& e : b.entries)
            std::cout << b.name << "," << e.row << "," << e.col << ","
                      << id3::fmt_double(e.value) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"id3: incremental importance-based selective fine-tuning"};
    app.require_subcommand(1);

    std::string config_path;
    std::string mask_path;
    std::string dump_path;
    Overrides o;

    auto* pretrain = app.add_subcommand("pretrain", "dense-train the source model");
    pretrain->add_option("--config", config_path, "experiment config JSON")->required();
    add_override_flags(pretrain, o);

    auto* finetune = app.add_subcommand("finetune", "run one selective fine-tuning cell");
    finetune->add_option("--config", config_path, "experiment config JSON")->required();
    add_override_flags(finetune, o);

    auto* eval = app.add_subcommand("eval", "evaluate on the target test split");
    eval->add_option("--config", config_path, "experiment config JSON")->required();
    eval->add_option("--mask", mask_path, "sparse mask checkpoint to apply");
    add_override_flags(eval, o);

    auto* sweep = app.add_subcommand("sweep", "run the full strategy/budget/seed grid");
    sweep->add_option("--config", config_path, "experiment config JSON")->required();
    add_override_flags(sweep, o);

    auto* verify = app.add_subcommand("verify", "run the built-in verification suite");

    auto* mask = app.add_subcommand("mask", "sparse mask checkpoint utilities");
    auto* dump = mask->add_subcommand("dump", "dump a checkpoint as CSV");
    dump->add_option("file", dump_path, "checkpoint file")->required();
    mask->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (pretrain->parsed()) return cmd_pretrain(config_path, o);
        if (finetune->parsed()) return cmd_finetune(config_path, o);
        if (eval->parsed()) return cmd_eval(config_path, mask_path, o);
        if (sweep->parsed()) return cmd_sweep(config_path, o);
        if (verify->parsed()) return id3::run_verification() ? kExitOk : kExitRunFailure;
        if (dump->parsed()) return cmd_mask_dump(dump_path);
    } catch (const id3::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRunFailure;
    }
    return kExitConfigError;
}
