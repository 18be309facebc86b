#include "helpers.hpp"

#include "ia2u/classifier/classifier.hpp"
#include "ia2u/core/error.hpp"
#include "ia2u/core/ops.hpp"
#include "ia2u/core/rng.hpp"
#include "ia2u/priorgen/priorgen.hpp"

#include <doctest.h>

using namespace ia2u;
using namespace ia2u::priorgen;

namespace {

constexpr int64_t kC = 8;

std::vector<FeatureMap> stage_features(int64_t batch, int64_t side, uint64_t seed, double fill = NAN) {
    std::vector<FeatureMap> out;
    for (size_t i = 0; i < classifier::kNumStages; ++i) {
        const int64_t s = classifier::kStageScale[i];
        const std::vector<int64_t> shape = {batch, classifier::kStageChannels[i], side / s, side / s};
        auto t = std::isnan(fill) ? ia2u::testing::randn(shape, seed + i) : torch::full(shape, fill);
        out.emplace_back(t, s);
    }
    return out;
}

torch::Tensor one_hot(int64_t k) {
    auto p = torch::zeros({1, 9});
    p[0][k] = 1.0;
    return p;
}

}  // namespace

TEST_CASE("water_prior broadcasts the argmax embedding row") {
    seed_parameters(0);
    PriorGenerator gen(kC);
    const auto& emb = gen->embedding();
    CHECK(emb.sizes() == torch::IntArrayRef({9, kC}));
    for (int64_t a = 0; a < 9; ++a) {
        for (int64_t b = a + 1; b < 9; ++b) {
            CHECK_FALSE(torch::equal(emb[a], emb[b]));
        }
    }

    const auto w0 = water_prior(one_hot(0), emb, {4, 6, 1}).data();
    CHECK(w0.sizes() == torch::IntArrayRef({1, kC, 4, 6}));
    CHECK(torch::equal(w0, emb[0].view({1, kC, 1, 1}).expand({1, kC, 4, 6})));

    const auto prob = torch::tensor({0.1, 0.05, 0.05, 0.1, 0.4, 0.1, 0.05, 0.05, 0.1}).view({1, 9});
    const auto w4 = water_prior(prob, emb, {2, 2, 1}).data();
    CHECK(torch::equal(w4[0].select(1, 1).select(1, 0), emb[4]));

    const auto small = water_prior(prob, emb, {2, 2, 1}).data();
    const auto large = water_prior(prob, emb, {8, 16, 1}).data();
    CHECK(torch::equal(small.amax({2, 3}), small.amin({2, 3})));
    CHECK(torch::equal(small.amax({2, 3}), large.amax({2, 3})));
    CHECK(torch::equal(large.amax({2, 3}), large.amin({2, 3})));
}

TEST_CASE("water_prior depends on prob only through its argmax") {
    seed_parameters(1);
    PriorGenerator gen(kC);
    const auto prob = torch::softmax(ia2u::testing::randn({3, 9}, 5), 1);
    const auto a = water_prior(prob, gen->embedding(), {4, 4, 1}).data();
    for (const double k : {0.5, 3.0, 1e-3}) {
        CHECK(torch::equal(a, water_prior(prob * k, gen->embedding(), {4, 4, 1}).data()));
    }
    auto bad = prob.clone();
    bad[1][2] = NAN;
    CHECK_THROWS_AS(water_prior(bad, gen->embedding(), {4, 4, 1}), ValidationError);
    CHECK_THROWS_AS(water_prior(torch::ones({1, 8}), gen->embedding(), {4, 4, 1}), ValidationError);
}

TEST_CASE("water_prior gradient reaches only the selected row") {
    seed_parameters(2);
    PriorGenerator gen(kC);
    water_prior(one_hot(6), gen->embedding(), {4, 4, 1}).data().sum().backward();
    const auto g = gen->embedding().grad();
    REQUIRE(g.defined());
    CHECK(g[6].abs().sum().item<double>() > 0.0);
    CHECK(g.index({torch::indexing::Slice(0, 6)}).abs().sum().item<double>() == 0.0);
    CHECK(g.index({torch::indexing::Slice(7, 9)}).abs().sum().item<double>() == 0.0);
}

TEST_CASE("degradation prior: zero features give zeros, output is non-negative") {
    seed_parameters(3);
    PriorGenerator gen(kC);
    const auto zero = degradation_prior(gen, stage_features(1, 64, 0, 0.0), {64, 64, 1}).data();
    CHECK(zero.sizes() == torch::IntArrayRef({1, kC, 64, 64}));
    CHECK(torch::equal(zero, torch::zeros_like(zero)));

    const auto out = degradation_prior(gen, stage_features(2, 64, 10), {32, 32, 2}).data();
    CHECK(out.sizes() == torch::IntArrayRef({2, kC, 32, 32}));
    CHECK((out >= 0).all().item<bool>());
}

TEST_CASE("degradation prior: identity refinement keeps instance-norm statistics") {
    seed_parameters(4);
    PriorGenerator gen(kC);
    {
        torch::NoGradGuard no_grad;
        gen->refine()->weight.copy_(torch::eye(kC).view({kC, kC, 1, 1}));
        gen->refine()->bias.zero_();
    }
    const auto stages = gen->degradation_stages(stage_features(3, 64, 20), {64, 64, 1});
    CHECK(stages.fused_norm.sizes() == torch::IntArrayRef({3, kC, 16, 16}));
    CHECK(ia2u::testing::max_abs(stages.pre_relu.mean({2, 3})) < 1e-4);
    CHECK(torch::equal(stages.output.data().clamp_min(0), stages.output.data()));
}

TEST_CASE("degradation prior rejects misaligned stages") {
    seed_parameters(5);
    PriorGenerator gen(kC);
    auto feats = stage_features(1, 64, 1);
    feats[2] = FeatureMap(feats[2].data(), 8);
    CHECK_THROWS_AS(degradation_prior(gen, feats, {64, 64, 1}), ValidationError);
    auto short_list = stage_features(1, 64, 1);
    short_list.pop_back();
    CHECK_THROWS_AS(degradation_prior(gen, short_list, {64, 64, 1}), ValidationError);
}

TEST_CASE("sample prior is the identity and passes gradient") {
    const auto t = ia2u::testing::randn({1, kC, 4, 4}, 6).requires_grad_();
    const FeatureMap f(t, 1);
    const auto& s = sample_prior(f);
    CHECK(s.data().is_same(t));
    (s.data() * 2.0).sum().backward();
    CHECK(t.grad().abs().sum().item<double>() > 0.0);
}

TEST_CASE("fused prior statistics on random inputs") {
    for (uint64_t trial = 0; trial < 20; ++trial) {
        const std::vector<int64_t> shape = {2, kC, 8, 8};
        const FeatureMap w(ia2u::testing::randn(shape, 100 + trial) * 2.0 + 0.5, 1);
        const FeatureMap d(ia2u::testing::randn(shape, 200 + trial).relu(), 1);
        const FeatureMap s(ia2u::testing::randn(shape, 300 + trial) * 0.1, 1);
        const auto p = fuse_priors(w, d, s, {}).data().to(torch::kFloat64);
        CHECK(ia2u::testing::max_abs(p.mean({2, 3})) < 1e-4);
        CHECK(ia2u::testing::max_abs(p.var({2, 3}, false) - 1.0) < 1e-3);
    }
}

TEST_CASE("fuse_priors special cases") {
    const std::vector<int64_t> shape = {1, kC, 4, 4};
    const FeatureMap c1(torch::full(shape, 0.3), 1);
    const FeatureMap c2(torch::full(shape, -1.2), 1);
    const auto constant = fuse_priors(c1, c2, c1, {}).data();
    CHECK(torch::equal(constant, torch::zeros_like(constant)));

    const FeatureMap s(ia2u::testing::randn(shape, 7), 1);
    const FeatureMap w(ia2u::testing::randn(shape, 8), 1);
    const auto only_sample = fuse_priors(std::nullopt, std::nullopt, s, {false, false, true}).data();
    CHECK(torch::equal(only_sample, instance_norm(s.data())));

    // A disabled prior behaves exactly like a zero tensor in the sum.
    const FeatureMap d(ia2u::testing::randn(shape, 9), 1);
    const auto toggled = fuse_priors(w, d, s, {true, false, true}).data();
    const auto by_hand = instance_norm(w.data() + torch::zeros(shape) + s.data());
    CHECK(torch::equal(toggled, by_hand));

    CHECK_THROWS_AS(fuse_priors(w, d, s, {false, false, false}), ValidationError);
    CHECK_THROWS_AS(fuse_priors(std::nullopt, d, s, {true, true, true}), ValidationError);
    const FeatureMap other(torch::zeros({1, kC, 8, 8}), 1);
    CHECK_THROWS_AS(fuse_priors(w, other, s, {}), ValidationError);
}

TEST_CASE("block priors share the image priors and take F_j as the sample prior") {
    seed_parameters(6);
    PriorGenerator gen(kC);
    auto cls = classifier::freeze(classifier::ClassifierWeights());
    const ImageTensor x(ia2u::testing::random_images(2, 64, 64, 3));
    const auto pred = classifier::classify(x, cls);
    const TargetShape target{64, 64, 1};
    const auto image = image_priors(gen, pred, target, {});
    REQUIRE(image.water.has_value());
    REQUIRE(image.degrad.has_value());
    const FeatureMap f(ia2u::testing::randn({2, kC, 64, 64}, 4), 1);
    const auto bundle = block_priors(image, f, {});
    CHECK(bundle.p_sample.data().is_same(f.data()));
    CHECK(bundle.fused.data().sizes() == f.data().sizes());
    CHECK(torch::equal(bundle.p_water.data(), image.water->data()));

    const auto no_water = block_priors(image, f, {false, true, true});
    CHECK(torch::equal(no_water.p_water.data(), torch::zeros_like(f.data())));
    CHECK_FALSE(torch::equal(no_water.fused.data(), bundle.fused.data()));
}
