// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <doctest.h>

#include "deepbroadcast/net.hpp"
#include "deepbroadcast/objective.hpp"
#include "helpers.hpp"

using namespace deepbroadcast;
using namespace deepbroadcast::nn;

namespace {

ModelConfig default_config(int n_users, std::vector<TaskHead> heads) {
    ModelConfig cfg;
    cfg.n_users = n_users;
    cfg.heads = std::move(heads);
    return cfg;
}

}  // namespace

TEST_CASE("model config pins the quarter compression ratio") {
    auto cfg = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    CHECK(cfg.c2() == 512);
    CHECK(cfg.c3() == 512);
    CHECK(cfg.c2() * 4 == cfg.c1 * cfg.h1 * cfg.w1);

    cfg.c1 = 5;
    cfg.h1 = 2;
    cfg.w1 = 3;  // volume 30, not divisible by 4
    CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("extractor shape contract and determinism") {
    auto cfg = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    Model<float> model(Variant::deepbroadcast, cfg, 1234);
    RngStream rng(5, 0, RngStream::kGeneric);
    auto imgs = testutil::random_images<float>(8, 32, 32, rng);
    auto f = model.extract_semantics(imgs);
    CHECK(f->value.shape == std::vector<std::int64_t>{8, 8, 8, 32});
    for (float x : f->value.v) CHECK(std::isfinite(x));

    auto f2 = model.extract_semantics(imgs);
    CHECK(f->value.v == f2->value.v);

    Tensor<float> zeros({2, 32, 32, 3});
    auto fz = model.extract_semantics(zeros);
    for (float x : fz->value.v) CHECK(std::isfinite(x));

    Tensor<float> bad({2, 16, 16, 3});
    CHECK_THROWS_AS((void)model.extract_semantics(bad), shape_error);
}

TEST_CASE("lca is the exact identity when merge parameters are zero") {
    ParameterStore<float> store;
    RngStream rng(7, 0, RngStream::kInit);
    auto lca = LcaBlock<float>::create(store, "lca", 32, rng);
    lca.merge.W->value.fill(0.0f);
    lca.merge.b->value.fill(0.0f);

    RngStream drng(8, 0, RngStream::kGeneric);
    Tensor<float> f({4, 8, 8, 32});
    for (auto& x : f.v) x = static_cast<float>(drng.gaussian());
    auto plane = snr_plane<float>(4, 8, 8, 13.0);
    auto out = lca(constant(f), plane);
    CHECK(out->value.shape == f.shape);
    CHECK(out->value.v == f.v);  // bitwise: residual add of exact zeros
}

TEST_CASE("lca preserves shape with live parameters") {
    ParameterStore<float> store;
    RngStream rng(9, 0, RngStream::kInit);
    auto lca = LcaBlock<float>::create(store, "lca", 32, rng);
    RngStream drng(10, 0, RngStream::kGeneric);
    Tensor<float> f({4, 8, 8, 32});
    for (auto& x : f.v) x = static_cast<float>(drng.gaussian());
    auto out = lca(constant(f), snr_plane<float>(4, 8, 8, -5.0));
    CHECK(out->value.shape == std::vector<std::int64_t>{4, 8, 8, 32});
}

TEST_CASE("attention softmax normalizes over channels at every position") {
    RngStream rng(11, 0, RngStream::kGeneric);
    Tensor<float> x({2, 4, 4, 8});
    for (auto& v : x.v) v = static_cast<float>(3.0 * rng.gaussian());
    auto y = softmax_last(constant(x));
    const std::int64_t positions = 2 * 4 * 4;
    for (std::int64_t p = 0; p < positions; ++p) {
        double sum = 0;
        for (std::int64_t c = 0; c < 8; ++c) sum += y->value.v[static_cast<std::size_t>(p * 8 + c)];
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("tce emits c2-length stats with strictly positive sigma") {
    auto cfg = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    Model<float> model(Variant::deepbroadcast, cfg, 99);
    RngStream rng(12, 0, RngStream::kGeneric);
    auto imgs = testutil::random_images<float>(3, 32, 32, rng);
    auto f = model.extract_semantics(imgs);
    auto stats = model.tce(0).forward(f, 7.0);
    CHECK(stats.mu->value.shape == std::vector<std::int64_t>{3, 512});
    CHECK(stats.sigma->value.shape == std::vector<std::int64_t>{3, 512});
    CHECK(cfg.c2() == cfg.c1 * cfg.h1 * cfg.w1 / 4);
    for (float s : stats.sigma->value.v) CHECK(s > 0.0f);
}

TEST_CASE("tce output responds to the conditioning SNR") {
    auto cfg = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    Model<float> model(Variant::deepbroadcast, cfg, 100);
    RngStream rng(13, 0, RngStream::kGeneric);
    auto imgs = testutil::random_images<float>(2, 32, 32, rng);
    auto f = model.extract_semantics(imgs);
    auto lo = model.tce(0).forward(f, -5.0);
    auto hi = model.tce(0).forward(f, 19.0);
    double max_diff = 0;
    for (std::size_t i = 0; i < lo.mu->value.v.size(); ++i)
        max_diff = std::max(max_diff, std::abs(static_cast<double>(lo.mu->value.v[i]) -
                                               hi.mu->value.v[i]));
    CHECK(max_diff > 1e-6);
}

TEST_CASE("gcf gates stay in (0,1) and the gated branch can vanish") {
    auto cfg = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    Model<float> model(Variant::deepbroadcast, cfg, 101);
    const auto& gcf = model.gcf(0);

    RngStream rng(14, 0, RngStream::kGeneric);
    Tensor<float> zr({5, cfg.c2()});
    for (auto& x : zr.v) x = static_cast<float>(rng.gaussian());
    Tensor<float> snr_rows({5, 2});
    for (std::int64_t i = 0; i < 5; ++i) {
        snr_rows.v[static_cast<std::size_t>(2 * i)] = -5.0f;
        snr_rows.v[static_cast<std::size_t>(2 * i + 1)] = 19.0f;
    }
    auto zrv = constant(zr);
    auto snrv = constant(snr_rows);

    auto m_key = sigmoid(gcf.key(gcf.norm(zrv)));
    auto m_query = sigmoid(gcf.query3(relu(gcf.query2(relu(gcf.query1(snrv))))));
    for (float g : m_key->value.v) {
        CHECK(g > 0.0f);
        CHECK(g < 1.0f);
    }
    for (float g : m_query->value.v) {
        CHECK(g > 0.0f);
        CHECK(g < 1.0f);
    }

    auto out = gcf(zrv, snrv);
    CHECK(out->value.shape == std::vector<std::int64_t>{5, cfg.c2()});
}

TEST_CASE("gcf reduces to the residual when the value branch is zero and out is identity") {
    auto cfg = testutil::tiny_config(2, {{TaskHead::Kind::classify, 2},
                                         {TaskHead::Kind::classify, 2}});
    Model<float> model(Variant::deepbroadcast, cfg, 102);
    auto& store = model.params();
    store.find("gcf0.value.weight")->value.fill(0.0f);
    store.find("gcf0.value.bias")->value.fill(0.0f);
    auto outW = store.find("gcf0.out.weight");
    outW->value.fill(0.0f);
    for (std::int64_t i = 0; i < cfg.c2(); ++i)
        outW->value.v[static_cast<std::size_t>(i * cfg.c2() + i)] = 1.0f;
    store.find("gcf0.out.bias")->value.fill(0.0f);

    RngStream rng(15, 0, RngStream::kGeneric);
    Tensor<float> zr({3, cfg.c2()});
    for (auto& x : zr.v) x = static_cast<float>(rng.gaussian());
    Tensor<float> snr_rows = Tensor<float>::full({3, 2}, 7.0f);
    auto out = model.gcf(0)(constant(zr), constant(snr_rows));
    for (std::size_t i = 0; i < zr.v.size(); ++i)
        CHECK(out->value.v[i] == doctest::Approx(zr.v[i]).epsilon(1e-6));
}

TEST_CASE("broadcast signal: length c_tx, unit power, N*c2 concat width") {
    auto cfg = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    Model<float> model(Variant::deepbroadcast, cfg, 103);
    RngStream rng(16, 0, RngStream::kGeneric);
    auto imgs = testutil::random_images<float>(4, 32, 32, rng);
    auto enc = model.encode(imgs, {3.0, 12.0});
    REQUIRE(enc.broadcast != nullptr);
    CHECK(enc.broadcast->value.shape == std::vector<std::int64_t>{4, 16});
    for (std::int64_t b = 0; b < 4; ++b) {
        double ms = 0;
        for (std::int64_t j = 0; j < 16; ++j) {
            const double x = enc.broadcast->value.v[static_cast<std::size_t>(b * 16 + j)];
            ms += x * x;
        }
        CHECK(std::abs(ms / 16.0 - 1.0) < 1e-6);
    }
    REQUIRE(enc.latents.size() == 2);
    auto zcat = concat_last<float>({enc.latents[0], enc.latents[1]});
    CHECK(zcat->value.last() == 1024);  // N*c2
}

TEST_CASE("receiver head contracts") {
    auto cfg = default_config(3, {{TaskHead::Kind::classify, 10},
                                  {TaskHead::Kind::classify, 2},
                                  {TaskHead::Kind::recover, 0}});
    Model<float> model(Variant::deepbroadcast, cfg, 104);
    RngStream rng(17, 0, RngStream::kGeneric);
    Tensor<float> zh({5, 16});
    for (auto& x : zh.v) x = static_cast<float>(rng.gaussian());
    auto logits10 = model.decode(0, constant(zh));
    CHECK(logits10->value.shape == std::vector<std::int64_t>{5, 10});
    auto logits2 = model.decode(1, constant(zh));
    CHECK(logits2->value.shape == std::vector<std::int64_t>{5, 2});
    auto image = model.decode(2, constant(zh));
    CHECK(image->value.shape == std::vector<std::int64_t>{5, 32, 32, 3});
    for (float x : image->value.v) {
        CHECK(x >= 0.0f);
        CHECK(x <= 1.0f);
    }
    CHECK_THROWS_AS((void)model.decode(3, constant(zh)), config_error);
}

TEST_CASE("variant contracts: unicast symbol split and e2e without stats") {
    auto cfg2 = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    Model<float> uni2(Variant::unicast, cfg2, 105);
    CHECK(uni2.tx_symbols(0) == 8);
    CHECK(uni2.tx_symbols(1) == 8);

    auto cfg3 = default_config(3, {{TaskHead::Kind::classify, 2},
                                   {TaskHead::Kind::classify, 2},
                                   {TaskHead::Kind::classify, 10}});
    Model<float> uni3(Variant::unicast, cfg3, 106);
    CHECK(uni3.tx_symbols(0) == 6);  // 18 total, slightly above the broadcast budget
    CHECK(uni3.tx_symbols(2) == 6);

    RngStream rng(18, 0, RngStream::kGeneric);
    auto imgs = testutil::random_images<float>(2, 32, 32, rng);
    auto enc = uni3.encode(imgs, {0.0, 0.0, 0.0});
    CHECK(enc.broadcast == nullptr);
    REQUIRE(enc.tx.size() == 3);
    for (const auto& tx : enc.tx) CHECK(tx->value.shape == std::vector<std::int64_t>{2, 6});

    Model<float> e2e(Variant::deepbroadcast_e2e, cfg2, 107);
    auto enc2 = e2e.encode(imgs, {5.0, 5.0});
    CHECK(enc2.stats.empty());
    CHECK(enc2.broadcast->value.shape == std::vector<std::int64_t>{2, 16});
}

TEST_CASE("every variant produces a unit-power signal of the right width") {
    auto cfg = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    RngStream rng(19, 0, RngStream::kGeneric);
    auto imgs = testutil::random_images<float>(2, 32, 32, rng);
    for (auto v : {Variant::deepbroadcast, Variant::deepbroadcast_e2e, Variant::mtoc,
                   Variant::mtoc_wlca, Variant::mtoc_wgcf, Variant::unicast, Variant::deeprc}) {
        Model<float> model(v, cfg, 108);
        auto enc = model.encode(imgs, {5.0, 9.0});
        for (int u = 0; u < 2; ++u) {
            const auto& tx = enc.tx[static_cast<std::size_t>(u)];
            CHECK(tx->value.last() == model.tx_symbols(u));
            for (std::int64_t b = 0; b < 2; ++b) {
                double ms = 0;
                const std::int64_t L = tx->value.last();
                for (std::int64_t j = 0; j < L; ++j) {
                    const double x = tx->value.v[static_cast<std::size_t>(b * L + j)];
                    ms += x * x;
                }
                CHECK(std::abs(ms / static_cast<double>(L) - 1.0) < 1e-5);
            }
        }
    }
}

TEST_CASE("same seed and parameters give bitwise-identical encodes") {
    auto cfg = default_config(2, {{TaskHead::Kind::classify, 2}, {TaskHead::Kind::classify, 2}});
    Model<float> a(Variant::deepbroadcast, cfg, 42);
    Model<float> b(Variant::deepbroadcast, cfg, 42);
    RngStream rng(20, 0, RngStream::kGeneric);
    auto imgs = testutil::random_images<float>(3, 32, 32, rng);
    auto ea = a.encode(imgs, {1.0, 2.0});
    auto eb = b.encode(imgs, {1.0, 2.0});
    CHECK(ea.broadcast->value.v == eb.broadcast->value.v);
}

TEST_CASE("tiny-config gradients match central differences per parameter group") {
    auto rig = testutil::tiny_variational_rig(2026);
    auto build = [&]() { return rig.build(); };
    for (const char* group : {"extractor.", ".lca", ".mu", ".sigma", "gcf", "fusion.", "rx"}) {
        auto rep = testutil::grad_check(rig.model->params(), build, 1e-5, group);
        INFO("group ", group, " worst ", rep.worst_param);
        CHECK(rep.checked > 0);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("tiny-config gradients for the recovery pipeline") {
    auto rig = testutil::tiny_recovery_rig(77);
    auto build = [&]() { return rig.build(); };
    auto rep = testutil::grad_check(rig.model->params(), build, 1e-5);
    INFO("worst ", rep.worst_param);
    CHECK(rep.checked > 0);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("unknown variant name is rejected") {
    CHECK_THROWS_AS((void)variant_from_string("squeezenet"), config_error);
    CHECK(variant_from_string("mtoc_wlca") == Variant::mtoc_wlca);
}
