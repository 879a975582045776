#include <cmath>
#include <numeric>

#include <catch2/catch_amalgamated.hpp>

#include "id3/selection.hpp"

using namespace id3;

namespace {

ScoreField field(std::vector<double> scores) {
    ScoreField f;
    for (std::size_t i = 0; i < scores.size(); ++i)
        f.push_back({{0, i}, scores[i]});
    return f;
}

std::vector<std::uint64_t> offsets(const std::vector<ParamId>& ids) {
    std::vector<std::uint64_t> out;
    for (ParamId id : ids) out.push_back(id.offset);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("uniform schedule sums to the budget exactly") {
    CHECK(uniform_schedule(100, 10) == std::vector<std::size_t>(10, 10));
    CHECK(uniform_schedule(10, 3) == std::vector<std::size_t>{4, 3, 3});
    CHECK(uniform_schedule(0, 5) == std::vector<std::size_t>(5, 0));
    CHECK_THROWS_AS(uniform_schedule(5, 0), ConfigError);

    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const std::size_t b = rng.uniform_int(5000);
        const std::size_t t = 1 + rng.uniform_int(97);
        auto u = uniform_schedule(b, t);
        CHECK(std::accumulate(u.begin(), u.end(), std::size_t{0}) == b);
    }
}

TEST_CASE("top-k selection") {
    CHECK(offsets(select_topk(field({3, 1, 2, 5}), 2)) == std::vector<std::uint64_t>{0, 3});
    CHECK(offsets(select_topk(field({1, 1, 0}), 1)) == std::vector<std::uint64_t>{0});
    CHECK(select_topk(field({1, 2}), 0).empty());
    CHECK_THROWS_AS(select_topk(field({1, 2}), 3), SelectionError);
}

TEST_CASE("top-k is invariant under strictly increasing score transforms") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores(20);
        for (auto& s : scores) s = rng.uniform(-2.0, 2.0);
        const std::size_t k = rng.uniform_int(21);
        auto base = select_topk(field(scores), k);
        std::vector<double> warped = scores;
        for (auto& s : warped) s = std::atan(3.0 * s) + 10.0;
        CHECK(offsets(base) == offsets(select_topk(field(warped), k)));
    }
}

namespace {

Model tiny_model() {
    ModelConfig mc;
    mc.widths = {2, 4, 2};
    return Model::build_mlp(mc);
}

}  // namespace

TEST_CASE("advance_mask strategies") {
    Model m = tiny_model();
    StrategyConfig cfg;
    cfg.scheduler = {3, 3};

    SECTION("increment unions the top of the complement") {
        cfg.strategy = Strategy::increment_s;
        MaskSet mask(m);
        mask.insert({0, 0}, 1);
        ScoreField complement;
        complement.push_back({{0, 1}, 0.2});
        complement.push_back({{0, 2}, 0.9});
        MaskSet next = advance_mask(cfg, mask, complement, 2, 1, m);
        CHECK(next.size() == 2);
        CHECK(next.contains({0, 0}));
        CHECK(next.contains({0, 2}));

        // candidates overlapping the mask are a usage error
        ScoreField bad;
        bad.push_back({{0, 0}, 1.0});
        CHECK_THROWS_AS(advance_mask(cfg, mask, bad, 2, 1, m), UsageError);
    }
    SECTION("static freezes the t=1 selection") {
        cfg.strategy = Strategy::static_s;
        ScoreField all = field({5, 1, 4, 2, 3, 0, 0, 0});
        MaskSet first = advance_mask(cfg, MaskSet(m), all, 1, 3, m);
        CHECK(first.size() == 3);
        MaskSet later = advance_mask(cfg, first, {}, 2, 3, m);
        CHECK(later == first);
    }
    SECTION("repeat reselects fresh each step") {
        cfg.strategy = Strategy::repeat_s;
        MaskSet a = advance_mask(cfg, MaskSet(m), field({5, 1, 4, 2}), 1, 3, m);
        MaskSet b = advance_mask(cfg, a, field({0, 9, 0, 8}), 2, 3, m);
        CHECK(a.size() == 3);
        CHECK(b.size() == 3);
        CHECK_FALSE(a == b);
    }
}

TEST_CASE("increment increments are pairwise disjoint and the trajectory reproducible") {
    Model m = tiny_model();
    StrategyConfig cfg;
    cfg.strategy = Strategy::increment_s;
    cfg.scheduler = {9, 3};

    auto run = [&](std::uint64_t seed) {
        MaskSet mask(m);
        std::vector<std::vector<ParamId>> increments;
        for (std::size_t t = 1; t <= 3; ++t) {
            std::vector<ParamId> candidates;
            for (std::uint32_t tensor = 0; tensor < m.tensor_count(); ++tensor)
                for (std::uint64_t o = 0; o < m.registry()[tensor].value.size(); ++o)
                    if (!mask.contains({tensor, o})) candidates.push_back({tensor, o});
            auto scores = random_score(candidates, derive_seed(seed, t));
            MaskSet next = advance_mask(cfg, mask, scores, t, 3, m);
            std::vector<ParamId> inc;
            for (ParamId id : next.ids())
                if (!mask.contains(id)) inc.push_back(id);
            increments.push_back(inc);
            mask = next;
        }
        return std::pair{mask, increments};
    };

    auto [mask1, inc1] = run(77);
    auto [mask2, inc2] = run(77);
    CHECK(mask1 == mask2);
    for (std::size_t i = 0; i < inc1.size(); ++i)
        CHECK(offsets(inc1[i]) == offsets(inc2[i]));

    // disjointness: union size equals sum of increment sizes
    std::size_t total = 0;
    for (const auto& inc : inc1) total += inc.size();
    CHECK(distinct_updated(inc1) == total);
    CHECK(mask1.size() == total);
}

TEST_CASE("distinct_updated counts the union") {
    std::vector<std::vector<ParamId>> steps = {{{0, 0}, {0, 1}}, {{0, 1}, {0, 2}}};
    CHECK(distinct_updated(steps) == 3);
    CHECK(distinct_updated({}) == 0);
}
