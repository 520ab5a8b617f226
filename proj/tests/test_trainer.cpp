#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "laketemp/errors.hpp"
#include "laketemp/simulator.hpp"
#include "laketemp/trainer.hpp"

using namespace laketemp;
namespace fs = std::filesystem;

namespace {

/// Small self-contained bundle: simulated truth on a shallow lake with
/// profile observations every few days.
struct Fixture {
    MeteoSeries drivers;
    LakeGeometry geometry;
    TemperatureField truth;
    FeatureMatrix features;
    DataBundle bundle;

    explicit Fixture(int years = 1, int obs_every = 5, uint64_t seed = 3,
                     double max_depth = 2.0) {
        drivers = synth_drivers(Climate::temperate, years, seed);
        geometry = make_geometry("cone", 1e6, max_depth);
        truth = simulate(drivers, geometry, SimConfig{}).field;
        features = build_features(drivers, geometry, FeatureConfig{},
                                  {{0, drivers.size()}});
        bundle.features = &features;
        bundle.drivers = &drivers;
        bundle.geometry = &geometry;
        bundle.observations = mint_profile_observations(truth, obs_every, {0, drivers.size()});
    }
};

}  // namespace

TEST_CASE("combined loss with lambda zero equals the supervised loss exactly") {
    Fixture fx;
    ModelParams p = ModelParams::init(fx.features.n_features, 6, 11);
    TrainingConfig cfg;
    cfg.lambda_ec = 0.0;
    auto [loss, parts] = combined_loss(p, fx.bundle, {0, 60}, cfg);
    REQUIRE(loss.defined());
    // independent route: window forward + rmse only
    Tensor block = fx.features.window_tensor(0, 60);
    auto preds = forward_window(block, 60, fx.features.n_depths, p);
    std::vector<WindowObservation> wobs;
    for (const auto& o : fx.bundle.observations.obs)
        if (o.time_index < 60) wobs.push_back({o.depth_index, o.time_index, o.temp_c});
    CHECK(loss.item() == rmse_loss(preds, wobs).item());
    CHECK(parts.ec == 0.0);
    CHECK(parts.combined == parts.rmse);
}

TEST_CASE("combined loss hand example: rmse 1 plus thresholded residual 10") {
    // Zero parameters predict 0 C everywhere, so dU = 0 and the residual is
    // -net_flux(T_s = 0). Drivers are built so |net flux| = tau + 10 with the
    // latent and sensible terms vanishing, and a single observation at 1 C
    // contributes an rmse of exactly 1.
    LakeGeometry g = make_geometry("barrel", 50.0, 1.0);
    MeteoSeries drv;
    const auto d0 = std::chrono::sys_days(std::chrono::year{2002} / 7 / 1);
    for (int t = 0; t < 2; ++t) {
        MeteoDay d;
        d.date = d0 + std::chrono::days{t};
        d.shortwave = 0.0;
        d.air_temp = 0.0;
        d.rel_humidity = 100.0;
        d.wind = 3.0;
        d.longwave = (back_radiation(0.0) + 34.0) / (1.0 - 0.03);
        drv.days.push_back(d);
    }
    FeatureMatrix fm = build_features(drv, g, FeatureConfig{.driver_fields = {"air_temp"}},
                                      {{0, 2}});
    DataBundle bundle;
    bundle.features = &fm;
    bundle.drivers = &drv;
    bundle.geometry = &g;
    bundle.observations.obs = {{0, 0, 1.0}};
    ModelParams p = ModelParams::zeros(fm.n_features, 4);
    TrainingConfig cfg;  // lambda 0.01, tau 24
    auto [loss, parts] = combined_loss(p, bundle, {0, 2}, cfg);
    CHECK(parts.rmse == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(parts.ec == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(loss.item() == doctest::Approx(1.1).epsilon(1e-9));
}

TEST_CASE("chunks without observations contribute the conservation term only") {
    Fixture fx;
    ModelParams p = ModelParams::init(fx.features.n_features, 6, 13);
    TrainingConfig cfg;
    DataBundle no_obs = fx.bundle;
    no_obs.observations.obs.clear();
    auto [loss, parts] = combined_loss(p, no_obs, {0, 50}, cfg);
    REQUIRE(loss.defined());
    CHECK(parts.n_obs == 0);
    CHECK(parts.rmse == 0.0);
    CHECK(parts.ec > 0.0);
    CHECK(loss.item() == doctest::Approx(cfg.lambda_ec * parts.ec).epsilon(1e-12));
}

TEST_CASE("combined loss gradient matches finite differences through the physics chain") {
    // 2 depths x 10 days exercises prediction -> energy -> penalty end to end
    Fixture fx(1, 3, 5, 1.0);
    ModelParams p = ModelParams::init(fx.features.n_features, 4, 17);
    TrainingConfig cfg;
    cfg.tau_ec = 1.0;  // keep residuals clear of the ReLU kink
    auto loss_fn = [&] {
        auto [loss, parts] = combined_loss(p, fx.bundle, {30, 40}, cfg);
        return loss;
    };
    auto res = laketemp::testing::gradcheck(p.named(), loss_fn);
    INFO("worst ", res.worst_param, "[", res.worst_index, "] analytic=", res.analytic,
         " numeric=", res.numeric);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("zero epochs return the initial parameters unchanged") {
    Fixture fx;
    ModelParams init = ModelParams::init(fx.features.n_features, 5, 19);
    TrainingConfig cfg;
    cfg.epochs = 0;
    TrainResult r = train(init, fx.bundle, cfg);
    for (size_t i = 0; i < init.named().size(); ++i) {
        auto a = init.named()[i].second.values();
        auto b = r.params.named()[i].second.values();
        REQUIRE(a.size() == b.size());
        for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }
    CHECK(r.history.epochs.empty());
}

TEST_CASE("a small run reduces the training error") {
    Fixture fx;
    ModelParams init = ModelParams::init(fx.features.n_features, 8, 23);
    TrainingConfig cfg;
    cfg.epochs = 60;
    cfg.chunk_length = 120;
    cfg.chunk_stride = 120;
    cfg.early_stop_patience = 0;
    TrainResult r = train(init, fx.bundle, cfg);
    REQUIRE(static_cast<int>(r.history.epochs.size()) == 60);
    CHECK(r.history.epochs.back().rmse < 0.6 * r.history.epochs.front().rmse);
}

TEST_CASE("identical seeds give bit-identical histories") {
    Fixture fx;
    TrainingConfig cfg;
    cfg.epochs = 4;
    cfg.chunk_length = 90;
    cfg.chunk_stride = 60;
    auto run = [&] {
        ModelParams init = ModelParams::init(fx.features.n_features, 6, 29);
        return train(init, fx.bundle, cfg);
    };
    TrainResult a = run();
    TrainResult b = run();
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (size_t i = 0; i < a.history.epochs.size(); ++i) {
        CHECK(a.history.epochs[i].rmse == b.history.epochs[i].rmse);
        CHECK(a.history.epochs[i].ec == b.history.epochs[i].ec);
        CHECK(a.history.epochs[i].combined == b.history.epochs[i].combined);
    }
}

TEST_CASE("lambda zero training equals a hand-rolled supervised loop bit-exactly") {
    Fixture fx;
    TrainingConfig cfg;
    cfg.lambda_ec = 0.0;
    cfg.epochs = 3;
    cfg.chunk_length = 400;  // single chunk covers the window
    cfg.chunk_stride = 400;
    cfg.window = {0, 90};
    cfg.early_stop_patience = 0;
    ModelParams init = ModelParams::init(fx.features.n_features, 5, 31);

    TrainResult r = train(init, fx.bundle, cfg);

    // independent reference loop
    ModelParams ref = init.clone();
    auto named = ref.named();
    AdamState st = AdamState::init(named);
    Tensor block = fx.features.window_tensor(0, 90);
    std::vector<WindowObservation> wobs;
    for (const auto& o : fx.bundle.observations.obs)
        if (o.time_index < 90) wobs.push_back({o.depth_index, o.time_index, o.temp_c});
    for (int e = 0; e < 3; ++e) {
        ref.zero_grads();
        Tensor loss = rmse_loss(forward_window(block, 90, fx.features.n_depths, ref), wobs);
        loss.backward();
        adam_step(named, st, cfg.learning_rate);
    }
    auto got = r.params.named();
    auto want = ref.named();
    for (size_t i = 0; i < want.size(); ++i) {
        auto a = got[i].second.values();
        auto b = want[i].second.values();
        for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly and training resumes identically") {
    Fixture fx;
    const fs::path dir = fs::temp_directory_path() / "laketemp_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "model.json").string();

    TrainingConfig cfg;
    cfg.epochs = 6;
    cfg.chunk_length = 90;
    cfg.chunk_stride = 90;
    cfg.window = {0, 180};
    cfg.early_stop_patience = 0;
    ModelParams init = ModelParams::init(fx.features.n_features, 5, 37);
    TrainResult full = train(init, fx.bundle, cfg);

    TrainingConfig half = cfg;
    half.epochs = 3;
    TrainResult first = train(init, fx.bundle, half);
    Checkpoint cp;
    cp.params = first.params.clone();
    cp.stats = fx.features.stats;
    cp.has_adam = true;
    cp.adam = first.adam;
    cp.epoch = 3;
    cp.meta["note"] = "halfway";
    save_checkpoint(path, cp);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.epoch == 3);
    CHECK(back.meta.at("note") == "halfway");
    CHECK(back.stats.names == fx.features.stats.names);
    for (size_t i = 0; i < cp.params.named().size(); ++i) {
        auto a = cp.params.named()[i].second.values();
        auto b = back.params.named()[i].second.values();
        for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }
    REQUIRE(back.has_adam);
    CHECK(back.adam.step_count() == first.adam.step_count());

    TrainResult second = train(back.params, fx.bundle, half, &back.adam);
    auto a = full.params.named();
    auto b = second.params.named();
    for (size_t i = 0; i < a.size(); ++i) {
        auto av = a[i].second.values();
        auto bv = b[i].second.values();
        for (size_t k = 0; k < av.size(); ++k) CHECK(av[k] == bv[k]);
    }
    fs::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with the last checkpoint retained") {
    Fixture fx;
    const fs::path dir = fs::temp_directory_path() / "laketemp_abort_test";
    fs::create_directories(dir);
    const std::string path = (dir / "model.json").string();
    TrainingConfig cfg;
    cfg.epochs = 60;
    cfg.learning_rate = 1e12;  // guaranteed blow-up
    cfg.checkpoint_path = path;
    cfg.checkpoint_every = 1;
    cfg.early_stop_patience = 0;
    ModelParams init = ModelParams::init(fx.features.n_features, 5, 41);
    bool threw = false;
    try {
        train(init, fx.bundle, cfg);
    } catch (const NumericError&) {
        threw = true;
    }
    CHECK(threw);
    if (fs::exists(path)) {
        Checkpoint cp = load_checkpoint(path);
        for (const auto& [name, t] : cp.params.named())
            for (double v : t.values()) CHECK(std::isfinite(v));
    }
    fs::remove_all(dir);
}

TEST_CASE("pretraining then fine-tuning") {
    Fixture fx(1, 4, 7, 1.5);
    // teacher: same drivers, perturbed lake
    SimConfig teacher_cfg;
    teacher_cfg.kw *= 1.5;
    TemperatureField teacher = simulate(fx.drivers, fx.geometry, teacher_cfg).field;

    DataBundle pre = fx.bundle;
    pre.observations = dense_observations(teacher, {0, fx.drivers.size()});

    TrainingConfig pre_cfg;
    pre_cfg.epochs = 25;
    pre_cfg.chunk_length = 365;
    pre_cfg.chunk_stride = 365;
    pre_cfg.early_stop_patience = 0;
    pre_cfg.hidden_size = 8;
    TrainingConfig fine_cfg = pre_cfg;
    fine_cfg.epochs = 10;

    SUBCASE("empty fine-tune set returns the pretrained parameters") {
        DataBundle fine = fx.bundle;
        fine.observations.obs.clear();
        PretrainResult r = pretrain_then_finetune(pre, fine, pre_cfg, fine_cfg);
        auto a = r.pretrained.named();
        auto b = r.finetuned.named();
        for (size_t i = 0; i < a.size(); ++i) {
            auto av = a[i].second.values();
            auto bv = b[i].second.values();
            for (size_t k = 0; k < av.size(); ++k) CHECK(av[k] == bv[k]);
        }
        CHECK(r.fine_history.epochs.empty());
    }
    SUBCASE("pretrained model emulates its teacher") {
        PretrainResult r = pretrain_then_finetune(pre, fx.bundle, pre_cfg, fine_cfg);
        TemperatureField emu = predict_field(r.pretrained, fx.features, 200, 320);
        double sse = 0.0;
        int n = 0;
        for (int t = 0; t < emu.n_days; ++t)
            for (int d = 0; d < emu.n_depths; ++d) {
                const double e = emu.at(d, t) - teacher.at(d, 200 + t);
                sse += e * e;
                ++n;
            }
        CHECK(std::sqrt(sse / n) < 1.5);
        CHECK_FALSE(r.fine_history.epochs.empty());
    }
}
