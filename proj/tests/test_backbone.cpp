#include <cmath>
#include <doctest.h>

#include "locans/answerer.hpp"
#include "locans/backbone.hpp"
#include "locans/synthetic.hpp"
#include "support/test_util.hpp"

using namespace locans;
using namespace locans::testing;

namespace {

std::vector<double> random_frame(Rng& rng, int dim) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.range(-1.5, 1.5);
    return v;
}

std::vector<std::string> concept_options(int n, int offset = 0) {
    std::vector<std::string> opts;
    for (int i = 0; i < n; ++i) opts.push_back(PlantedGeometry::concept_name(offset + i));
    return opts;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// gradient recovered from a unit-rate step: params - train_step(lr=1).params
template <typename Batch>
AdapterParams analytic_gradient(const Backbone& bb, const Batch& batch, const AdapterParams& params) {
    AdapterParams stepped = bb.train_step(batch, params, 1.0).first;
    AdapterParams grad = params;
    axpy_params(grad, -1.0, stepped);
    return grad;
}

template <typename Batch>
void check_gradients_against_fd(const Backbone& bb, const Batch& batch, AdapterParams params, double eps,
                                double tol) {
    AdapterParams grad = analytic_gradient(bb, batch, params);
    double worst = 0.0;
    for (size_t ai = 0; ai < params.arrays.size(); ++ai) {
        for (size_t i = 0; i < params.arrays[ai].values.size(); ++i) {
            double saved = params.arrays[ai].values[i];
            params.arrays[ai].values[i] = saved + eps;
            double up = bb.train_step(batch, params, 0.0).second;
            params.arrays[ai].values[i] = saved - eps;
            double down = bb.train_step(batch, params, 0.0).second;
            params.arrays[ai].values[i] = saved;
            double fd = (up - down) / (2.0 * eps);
            worst = std::max(worst, rel_err(grad.arrays[ai].values[i], fd));
        }
    }
    CHECK(worst <= tol);
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences, seeds 0-4") {
    const double eps = 1e-5, tol = 1e-4;
    for (uint64_t seed = 0; seed <= 4; ++seed) {
        CAPTURE(seed);
        BackboneConfig cfg = toy_backbone_config(12, seed);
        cfg.query_dim = 8;
        cfg.hidden_dim = 6;
        Backbone bb(cfg);
        Rng rng(mix_seed(99, seed));

        SUBCASE("answerer adapter") {
            AdapterParams params = bb.init_params(AdapterRole::answerer);
            LanguageContext ctx = build_qa_context("what is shown?", concept_options(4));
            EmbeddedContext embedded = bb.embed_context(ctx);

            std::vector<std::vector<double>> frames;
            for (int i = 0; i < 9; ++i) frames.push_back(random_frame(rng, cfg.feature_dim));
            std::vector<std::vector<double>> offsets;
            std::vector<QaTrainItem> batch(3);
            for (int b = 0; b < 3; ++b) {
                for (int kf = 0; kf < 3; ++kf) {
                    FoldComponents fc = frame_id_fold({kf, b * 3 + kf}, cfg.query_dim);
                    batch[b].frames.push_back(frames[b * 3 + kf].data());
                    batch[b].fold_scales.push_back(fc.scale);
                    offsets.push_back(std::move(fc.offset));
                }
                batch[b].context = &embedded;
                batch[b].target = b % 4;
            }
            size_t oi = 0;
            for (int b = 0; b < 3; ++b)
                for (int kf = 0; kf < 3; ++kf) batch[b].fold_offsets.push_back(offsets[oi++].data());

            check_gradients_against_fd(bb, batch, params, eps, tol);
        }

        SUBCASE("localizer adapter") {
            AdapterParams params = bb.init_params(AdapterRole::localizer);
            LanguageContext ctx = build_loc_context("what is shown?", concept_options(4));
            EmbeddedContext embedded = bb.embed_context(ctx);

            std::vector<std::vector<double>> frames;
            for (int i = 0; i < 3; ++i) frames.push_back(random_frame(rng, cfg.feature_dim));
            std::vector<LocTrainItem> batch;
            for (int i = 0; i < 3; ++i) batch.push_back({frames[i].data(), &embedded, i % 2, 1.0});

            check_gradients_against_fd(bb, batch, params, eps, tol);
        }
    }
}

TEST_CASE("adapt Jacobian columns match finite differences") {
    BackboneConfig cfg = toy_backbone_config(10, 3);
    cfg.query_dim = 7;
    cfg.hidden_dim = 5;
    Backbone bb(cfg);
    AdapterParams params = bb.init_params(AdapterRole::answerer);
    Rng rng(123);
    std::vector<double> h = random_frame(rng, cfg.feature_dim);

    const double eps = 1e-5;
    // forward pieces needed by the hand-derived Jacobian of affine-tanh-affine
    const auto& w1 = params.array("w1").values;
    const auto& b1 = params.array("b1").values;
    const auto& w2 = params.array("w2").values;
    const int fd = cfg.feature_dim, hd = cfg.hidden_dim, qd = cfg.query_dim;
    std::vector<double> a1(hd);
    for (int k = 0; k < hd; ++k) {
        double z = b1[k];
        for (int m = 0; m < fd; ++m) z += w1[k * fd + m] * h[m];
        a1[k] = std::tanh(z);
    }

    auto fd_column = [&](const std::string& name, size_t idx) {
        AdapterParams p = params;
        p.array(name).values[idx] += eps;
        std::vector<double> up = bb.adapt(h, p).vector;
        p.array(name).values[idx] -= 2 * eps;
        std::vector<double> down = bb.adapt(h, p).vector;
        for (int j = 0; j < qd; ++j) up[j] = (up[j] - down[j]) / (2 * eps);
        return up;
    };

    Rng pick(7);
    for (int rep = 0; rep < 40; ++rep) {
        int j = pick.below_int(qd);
        // d(out_q)/d(b2_j) = [q == j]
        auto col_b2 = fd_column("b2", j);
        for (int q = 0; q < qd; ++q) CHECK(rel_err(col_b2[q], q == j ? 1.0 : 0.0) <= 1e-4);

        int k = pick.below_int(hd);
        // d(out_q)/d(w2_{jk}) = [q == j] a1_k
        auto col_w2 = fd_column("w2", static_cast<size_t>(j) * hd + k);
        for (int q = 0; q < qd; ++q) CHECK(rel_err(col_w2[q], q == j ? a1[k] : 0.0) <= 1e-4);

        int m = pick.below_int(fd);
        // d(out_q)/d(w1_{km}) = w2_{qk} (1 - a1_k^2) h_m
        auto col_w1 = fd_column("w1", static_cast<size_t>(k) * fd + m);
        for (int q = 0; q < qd; ++q) CHECK(rel_err(col_w1[q], w2[q * hd + k] * (1 - a1[k] * a1[k]) * h[m]) <= 1e-4);

        // d(out_q)/d(b1_k) = w2_{qk} (1 - a1_k^2)
        auto col_b1 = fd_column("b1", k);
        for (int q = 0; q < qd; ++q) CHECK(rel_err(col_b1[q], w2[q * hd + k] * (1 - a1[k] * a1[k])) <= 1e-4);
    }
}

TEST_CASE("adapt with zero weights returns the bias vector") {
    BackboneConfig cfg = toy_backbone_config(8, 0);
    cfg.query_dim = 5;
    cfg.hidden_dim = 4;
    Backbone bb(cfg);
    AdapterParams params = bb.init_params(AdapterRole::answerer);
    for (auto& a : params.arrays) std::fill(a.values.begin(), a.values.end(), 0.0);
    std::vector<double> bias = {0.1, -0.2, 0.3, -0.4, 0.5};
    params.array("b2").values = bias;

    Rng rng(1);
    std::vector<double> h = random_frame(rng, cfg.feature_dim);
    CHECK(bb.adapt(h, params).vector == bias);

    SUBCASE("deterministic on repeated input") {
        AdapterParams p2 = bb.init_params(AdapterRole::answerer);
        CHECK(bb.adapt(h, p2).vector == bb.adapt(h, p2).vector);
    }

    SUBCASE("dimension mismatch is an argument error") {
        std::vector<double> wrong(cfg.feature_dim + 1, 0.0);
        CHECK_THROWS_AS(bb.adapt(wrong, params), ArgumentError);
    }
}

TEST_CASE("score_yes stays strictly inside (0,1)") {
    SyntheticConfig scfg = small_config();
    Backbone oracle(oracle_backbone_config(scfg));
    AdapterParams oracle_params = oracle.init_params(AdapterRole::localizer);

    Backbone toy(toy_backbone_config(64, 7));
    AdapterParams toy_params = toy.init_params(AdapterRole::localizer);

    LanguageContext ctx = build_loc_context("anything here?", concept_options(4));
    EmbeddedContext oracle_ctx = oracle.embed_context(ctx);
    EmbeddedContext toy_ctx = toy.embed_context(ctx);

    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> h(64);
        for (double& x : h) x = rng.range(-50.0, 50.0);  // extreme inputs included
        double po = oracle.score_yes(oracle.adapt(h, oracle_params), oracle_ctx, oracle_params);
        double pt = toy.score_yes(toy.adapt(h, toy_params), toy_ctx, toy_params);
        CHECK(po > 0.0);
        CHECK(po < 1.0);
        CHECK(pt > 0.0);
        CHECK(pt < 1.0);
    }
}

TEST_CASE("oracle separates in-window from out-of-window frames at zero noise") {
    SyntheticConfig cfg = small_config(0.0, 25);
    auto corpus = generate_synthetic_corpus(cfg, 11);
    Backbone oracle(oracle_backbone_config(cfg));
    AdapterParams params = oracle.init_params(AdapterRole::localizer);
    for (size_t i = 0; i < corpus.qa.size(); ++i) {
        const auto& e = corpus.qa[i];
        const auto& t = corpus.truth[i];
        LanguageContext ctx = build_loc_context(e.qa.question, e.qa.options);
        EmbeddedContext ec = oracle.embed_context(ctx);
        for (int f = 0; f < e.video->n_frames; ++f) {
            double s = oracle.score_yes(
                oracle.adapt(std::span<const double>(e.video->features->frame(f), cfg.feature_dim), params), ec,
                params);
            if (f >= t.window_start && f < t.window_end)
                REQUIRE(s > 0.5);
            else
                REQUIRE(s < 0.5);
        }
    }
}

TEST_CASE("score_options is equivariant under option permutation") {
    SyntheticConfig scfg = small_config();
    Backbone oracle(oracle_backbone_config(scfg));
    Backbone toy(toy_backbone_config(64, 5));
    Rng rng(33);

    for (int rep = 0; rep < 10; ++rep) {
        std::vector<std::string> options = concept_options(4, rep % 8);
        std::vector<std::string> permuted = {options[2], options[0], options[3], options[1]};
        const int perm[4] = {2, 0, 3, 1};  // permuted[i] == options[perm[i]]

        LanguageContext base = build_qa_context("which one?", options);
        LanguageContext perm_ctx = build_qa_context("which one?", permuted);

        for (const Backbone* bb : {&oracle, &toy}) {
            AdapterParams params = bb->init_params(AdapterRole::answerer);
            std::vector<QueryFeature> queries;
            for (int i = 0; i < 3; ++i) queries.push_back({random_frame(rng, bb->config().query_dim)});
            auto s1 = bb->score_options(queries, base, params);
            auto s2 = bb->score_options(queries, perm_ctx, params);
            for (int i = 0; i < 4; ++i) CHECK(s2[i] == doctest::Approx(s1[perm[i]]).epsilon(1e-12));
        }
    }
}

TEST_CASE("single irrelevant frame answers correctly at the chance rate") {
    SyntheticConfig cfg = small_config(0.0, 1000);
    auto corpus = generate_synthetic_corpus(cfg, 77);
    Backbone oracle(oracle_backbone_config(cfg));
    AdapterParams params = oracle.init_params(AdapterRole::answerer);

    int trials = 0, correct = 0;
    for (size_t i = 0; i < corpus.qa.size() && trials < 10000; ++i) {
        const auto& e = corpus.qa[i];
        const auto& t = corpus.truth[i];
        LanguageContext ctx = build_qa_context(e.qa.question, e.qa.options);
        for (int f = 0; f < e.video->n_frames && trials < 10000; ++f) {
            if (f >= t.window_start && f < t.window_end) continue;
            ++trials;
            if (answer_single_frame(*e.video, f, ctx, oracle, params).predicted_index == e.qa.answer_index)
                ++correct;
        }
    }
    REQUIRE(trials == 10000);
    CHECK(std::abs(static_cast<double>(correct) / trials - 0.25) <= 0.03);
}

TEST_CASE("train_step at zero learning rate reports loss and keeps params") {
    Backbone bb(toy_backbone_config(16, 2));
    AdapterParams params = bb.init_params(AdapterRole::localizer);
    LanguageContext ctx = build_loc_context("q?", {});
    EmbeddedContext ec = bb.embed_context(ctx);
    Rng rng(4);
    std::vector<double> h = random_frame(rng, 16);
    std::vector<LocTrainItem> batch = {{h.data(), &ec, 1, 1.0}};

    auto [updated, loss] = bb.train_step(batch, params, 0.0);
    CHECK(loss > 0.0);
    for (size_t a = 0; a < params.arrays.size(); ++a) CHECK(updated.arrays[a].values == params.arrays[a].values);
}

TEST_CASE("cross-entropy of a uniform-output model is ln C") {
    Backbone bb(toy_backbone_config(16, 6));
    AdapterParams params = bb.init_params(AdapterRole::answerer);
    // identical option texts embed identically, so every logit ties
    std::vector<std::string> options(5, "same_text");
    LanguageContext ctx = build_qa_context("q?", options);
    EmbeddedContext ec = bb.embed_context(ctx);

    Rng rng(8);
    std::vector<double> h = random_frame(rng, 16);
    FoldComponents fc = frame_id_fold({0, 0}, bb.config().query_dim);
    QaTrainItem item;
    item.frames = {h.data()};
    item.fold_scales = {fc.scale};
    item.fold_offsets = {fc.offset.data()};
    item.context = &ec;
    item.target = 2;

    auto [updated, loss] = bb.train_step(std::vector<QaTrainItem>{item}, params, 0.0);
    CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(1e-6));
}

TEST_CASE("training never touches frozen head weights or input features") {
    Backbone bb(toy_backbone_config(16, 9));
    std::vector<double> frozen_before = bb.frozen_head();
    AdapterParams params = bb.init_params(AdapterRole::localizer);

    LanguageContext ctx = build_loc_context("q?", {});
    EmbeddedContext ec = bb.embed_context(ctx);
    Rng rng(14);
    std::vector<double> h = random_frame(rng, 16);
    std::vector<double> h_before = h;
    std::vector<LocTrainItem> batch = {{h.data(), &ec, 1, 1.0}, {h.data(), &ec, 0, 1.0}};

    AdapterParams p = params;
    for (int step = 0; step < 25; ++step) p = bb.train_step(batch, p, 0.5).first;

    CHECK(bb.frozen_head() == frozen_before);
    CHECK(h == h_before);
    bool params_moved = false;
    for (size_t a = 0; a < p.arrays.size(); ++a) params_moved |= p.arrays[a].values != params.arrays[a].values;
    CHECK(params_moved);
}

TEST_CASE("train_step on the synthetic oracle is unsupported") {
    SyntheticConfig scfg = small_config();
    Backbone oracle(oracle_backbone_config(scfg));
    AdapterParams params = oracle.init_params(AdapterRole::localizer);
    LanguageContext ctx = build_loc_context("q?", {});
    EmbeddedContext ec = oracle.embed_context(ctx);
    std::vector<double> h(scfg.feature_dim, 0.0);
    std::vector<LocTrainItem> batch = {{h.data(), &ec, 1, 1.0}};
    CHECK_THROWS_AS(oracle.train_step(batch, params, 0.1), UnsupportedError);
}

TEST_CASE("checkpoint save/load round trip") {
    TempDir dir("ckpt");
    BackboneConfig cfg = toy_backbone_config(24, 13);
    Backbone bb(cfg);
    AdapterParams params = bb.init_params(AdapterRole::answerer);

    std::string p1 = dir.file("a.ckpt");
    std::string p2 = dir.file("b.ckpt");
    save_model(p1, bb, params);
    Model m1 = load_model(p1);
    save_model(p2, *m1.backbone, m1.params);
    Model m2 = load_model(p2);

    CHECK(read_file(p1) == read_file(p2));
    CHECK(m1.params.role == AdapterRole::answerer);
    CHECK(m1.backbone->config().feature_dim == cfg.feature_dim);
    CHECK(m1.backbone->config().seed == cfg.seed);
    for (size_t a = 0; a < params.arrays.size(); ++a) {
        CHECK(m1.params.arrays[a].values == params.arrays[a].values);
        CHECK(m2.params.arrays[a].values == params.arrays[a].values);
    }

    // identical adapt outputs before save and after load
    Rng rng(3);
    std::vector<double> h = random_frame(rng, cfg.feature_dim);
    CHECK(bb.adapt(h, params).vector == m2.backbone->adapt(h, m2.params).vector);
}

TEST_CASE("backbone config validation") {
    BackboneConfig cfg = toy_backbone_config();
    cfg.hidden_dim = 0;
    CHECK_THROWS_AS(Backbone{cfg}, ConfigError);

    BackboneConfig oracle = oracle_backbone_config(small_config());
    oracle.query_dim = oracle.feature_dim + 1;
    CHECK_THROWS_AS(Backbone{oracle}, ConfigError);
}
