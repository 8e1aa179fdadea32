// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "stereolab/experiment.hpp"
#include "stereolab/train.hpp"

using namespace stereolab;

namespace {
// Tiny but complete setup: enough to exercise every training path quickly.
ExperimentConfig tiny_config() {
    ExperimentConfig cfg = default_config();
    cfg.data.train_scenes = 6;
    cfg.data.test_scenes = 3;
    cfg.data.height = 32;
    cfg.data.width = 32;
    cfg.data.scene_max_disp = 12;
    cfg.net.channels = 8;
    cfg.net.stride = 4;
    cfg.net.max_disp = 16;
    cfg.net.aggregation_channels = 4;
    cfg.scf.queue_capacity = 32;
    cfg.scf.queue_push_per_step = 8;
    cfg.scf.negatives_per_query = 8;
    cfg.train.steps = 6;
    cfg.train.batch = 1;
    cfg.train.crop_height = 16;
    cfg.train.crop_width = 16;
    cfg.train.max_pairs_per_sample = 12;
    cfg.train.log_every = 3;
    cfg.train.probe_samples = 1;
    cfg.ssw.warmup_steps = 2;
    cfg.ssw.mask_refresh = 2;
    return cfg;
}
} // namespace

TEST_CASE("training runs for every ablation cell and logs the right fields") {
    const ExperimentConfig base = tiny_config();
    const auto corpus = make_corpus(base, false);

    struct Cell {
        bool scf, momentum, ssw;
    };
    for (const Cell cell : {Cell{false, false, false}, Cell{true, false, false}, Cell{true, true, false},
                            Cell{false, false, true}, Cell{true, true, true}}) {
        ExperimentConfig cfg = base;
        cfg.scf_enable = cell.scf;
        cfg.momentum_enable = cell.momentum;
        cfg.ssw_enable = cell.ssw;
        if (cell.ssw) {
            cfg.net.in_layers = {0, 1};
            cfg.ssw.layers = {0, 1};
        }
        std::ostringstream log;
        const TrainedModel model = train_model(cfg, corpus, &log);
        CHECK(model.steps == cfg.train.steps);
        CHECK(model.params.size() > 0);
        CHECK(model.key_params.empty() == !cell.momentum);
        CHECK((model.queue.size() > 0) == (cell.momentum && cell.scf));
        CHECK(model.ssw_stats.empty() == !cell.ssw);

        std::istringstream lines(log.str());
        std::string line;
        int n = 0;
        while (std::getline(lines, line)) {
            const auto j = nlohmann::json::parse(line);
            CHECK(j.contains("l_disp"));
            CHECK(j.contains("l_scf") == cell.scf);
            CHECK(j.contains("l_ssw") == cell.ssw);
            for (double v : {j["l_disp"].get<double>()}) CHECK(std::isfinite(v));
            ++n;
        }
        CHECK(n == cfg.train.steps);
    }
}

TEST_CASE("training is bit-deterministic") {
    ExperimentConfig cfg = tiny_config();
    cfg.scf_enable = true;
    cfg.momentum_enable = true;
    cfg.ssw_enable = true;
    cfg.net.in_layers = {0, 1};
    const auto corpus = make_corpus(cfg, false);

    std::ostringstream log_a, log_b;
    const TrainedModel a = train_model(cfg, corpus, &log_a);
    const TrainedModel b = train_model(cfg, corpus, &log_b);
    CHECK(log_a.str() == log_b.str());
    REQUIRE(a.params.size() == b.params.size());
    for (const auto& [name, t] : a.params) CHECK(t.vec() == b.params.at(name).vec());
    for (const auto& [name, t] : a.key_params) CHECK(t.vec() == b.key_params.at(name).vec());
    REQUIRE(a.queue.size() == b.queue.size());
    for (int i = 0; i < a.queue.size(); ++i) CHECK(a.queue.entry(i) == b.queue.entry(i));
}

TEST_CASE("key encoder tracks the query encoder under momentum") {
    ExperimentConfig cfg = tiny_config();
    cfg.scf_enable = true;
    cfg.momentum_enable = true;
    cfg.momentum = 0.5;
    const auto corpus = make_corpus(cfg, false);
    const TrainedModel model = train_model(cfg, corpus, nullptr);
    // after several steps at m = 0.5 the key must have moved away from its
    // initialization toward the query
    double drift = 0.0;
    for (const auto& [name, t] : model.key_params) {
        const Tensor& q = model.params.at(name);
        for (std::int64_t i = 0; i < t.size(); ++i) drift += std::abs(t[i] - q[i]);
    }
    CHECK(drift > 0.0); // not identical (EMA lag)

    ExperimentConfig frozen = cfg;
    frozen.momentum = 1.0;
    const TrainedModel f = train_model(frozen, corpus, nullptr);
    // m = 1: the key never moves from initialization
    Rng init_rng = Rng::derive(frozen.seed, 0x11);
    const ParamSet init = make_network_params(frozen.net, init_rng);
    for (const auto& [name, t] : f.key_params) CHECK(t.vec() == filter_prefix(init, "enc.").at(name).vec());
}

TEST_CASE("disparity loss decreases over a short run") {
    ExperimentConfig cfg = tiny_config();
    cfg.train.steps = 40;
    cfg.train.batch = 2;
    cfg.train.augment = false;
    const auto corpus = make_corpus(cfg, false);
    std::ostringstream log;
    train_model(cfg, corpus, &log);

    std::istringstream lines(log.str());
    std::string line;
    double first = -1.0, sum_tail = 0.0;
    int n = 0, tail = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        const double v = j["l_disp"].get<double>();
        if (n == 0) first = v;
        if (n >= 30) {
            sum_tail += v;
            ++tail;
        }
        ++n;
    }
    CHECK(first > 0.0);
    CHECK(sum_tail / tail < first); // learning happened
}
