// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/train.hpp"

#include <cmath>

#include <json.hpp>

#include "stereolab/error.hpp"
#include "stereolab/geometry.hpp"
#include "stereolab/metrics.hpp"

namespace stereolab {

namespace {

class Adam {
public:
    Adam(double b1, double b2, double eps) : b1_(b1), b2_(b2), eps_(eps) {}

    void step(ParamSet& params, const ParamSet& grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (auto& [name, p] : params) {
            const auto git = grads.find(name);
            if (git == grads.end() || git->second.empty()) continue; // no path to the loss this step
            const Tensor& g = git->second;
            if (!g.same_shape(p)) throw ShapeError("Adam: gradient shape mismatch for " + name);
            Tensor& m = m_.try_emplace(name, Tensor(p.shape())).first->second;
            Tensor& v = v_.try_emplace(name, Tensor(p.shape())).first->second;
            for (std::int64_t i = 0; i < p.size(); ++i) {
                m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
                v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            }
        }
    }

private:
    double b1_, b2_, eps_;
    long t_ = 0;
    ParamSet m_, v_;
};

// stream keys for per-purpose rng derivation
constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kDataStream = 0x22;
constexpr std::uint64_t kAugStream = 0x33;
constexpr std::uint64_t kScfStream = 0x44;
constexpr std::uint64_t kQueueStream = 0x55;
constexpr std::uint64_t kProbeStream = 0x66;

PositivePairSet subsample_pairs(const PositivePairSet& pairs, int max_count, Rng& rng) {
    if (static_cast<int>(pairs.pairs.size()) <= max_count) return pairs;
    PositivePairSet out;
    out.stride = pairs.stride;
    for (int idx : rng.sample_without_replacement(static_cast<int>(pairs.pairs.size()), max_count))
        out.pairs.push_back(pairs.pairs[static_cast<size_t>(idx)]);
    return out;
}

} // namespace

TrainedModel train_model(const ExperimentConfig& cfg, const std::vector<StereoSample>& corpus, std::ostream* log) {
    cfg.validate();
    if (corpus.empty()) throw DataError("train_model: empty corpus");
    const NetworkConfig& net = cfg.net;
    const int stride = net.stride;
    const double delta = cfg.eval.delta;

    Rng init_rng = Rng::derive(cfg.seed, kInitStream);
    TrainedModel model;
    model.params = make_network_params(net, init_rng);

    const bool use_momentum = cfg.momentum_enable;
    const bool use_scf = cfg.scf_enable;
    const bool use_ssw = cfg.ssw_enable;

    MomentumEncoderPair pair;
    if (use_momentum) {
        const double m_eff = std::pow(cfg.momentum, cfg.train.momentum_step_scale);
        pair = make_momentum_pair(filter_prefix(model.params, "enc."), m_eff);
    }

    model.queue = use_momentum && use_scf ? NegativeQueue(cfg.scf.queue_capacity, net.channels) : NegativeQueue();

    if (use_ssw) {
        // IN runs at stages 0/1 with channel counts fixed by the encoder
        for (int layer : cfg.ssw.layers) {
            const int ch = layer == 0 ? std::max(4, net.channels / 2) : net.channels;
            model.ssw_stats.emplace_back(ch, cfg.ssw.cluster_count);
        }
    }

    Adam opt(cfg.train.adam_beta1, cfg.train.adam_beta2, cfg.train.adam_eps);
    const int ch = cfg.train.crop_height, cw = cfg.train.crop_width;

    for (int step = 0; step < cfg.train.steps; ++step) {
        Rng data_rng = Rng::derive(hash_combine(cfg.seed, kDataStream), static_cast<std::uint64_t>(step));
        Rng aug_rng = Rng::derive(hash_combine(cfg.seed, kAugStream), static_cast<std::uint64_t>(step));
        Rng scf_rng = Rng::derive(hash_combine(cfg.seed, kScfStream), static_cast<std::uint64_t>(step));
        Rng queue_rng = Rng::derive(hash_combine(cfg.seed, kQueueStream), static_cast<std::uint64_t>(step));

        Tape tape;
        const TapeParams theta = put_params(tape, model.params, true);

        std::vector<int> disp_ids, scf_ids, ssw_ids;
        std::vector<Tensor> key_maps; // right key features for the queue push
        bool ssw_was_ready = true;

        for (int b = 0; b < cfg.train.batch; ++b) {
            const int idx = data_rng.index(static_cast<int>(corpus.size()));
            const StereoSample& base = corpus[static_cast<size_t>(idx)];
            const int y0r = base.height() - ch, x0r = base.width() - cw;
            const int y0 = y0r > 0 ? (data_rng.index(y0r / stride + 1)) * stride : 0;
            const int x0 = x0r > 0 ? (data_rng.index(x0r / stride + 1)) * stride : 0;
            StereoSample sample = crop_sample(base, y0, x0, ch, cw);

            if (cfg.train.augment) {
                const DomainStyle left_style = draw_augment_style(cfg.train.augment_cfg, aug_rng);
                const DomainStyle right_style =
                    cfg.train.augment_cfg.asymmetric ? draw_augment_style(cfg.train.augment_cfg, aug_rng) : left_style;
                sample = apply_style_per_view(sample, left_style, right_style, aug_rng.next_u64());
            }

            const ForwardOut fo = network_forward(tape, sample.left_image, sample.right_image, theta,
                                                  use_momentum ? &pair.key_params : nullptr, net);

            BoolGrid valid(ch, cw, true);
            disp_ids.push_back(
                tape.smooth_l1(fo.pred, sample.disparity_left, valid, cfg.loss.smooth_l1_beta, net.max_disp));

            if (use_scf) {
                const ReprojectionField field = reprojection_error(sample.disparity_left, sample.disparity_right);
                const MatchMask mask = matching_mask(field, delta);
                PositivePairSet pairs = collect_positive_pairs(sample.disparity_left, mask, stride);
                pairs = subsample_pairs(pairs, cfg.train.max_pairs_per_sample, scf_rng);
                const Tensor& right_vals = tape.val(fo.features_right);
                ScfLossResult scf = scf_loss_tape(tape, fo.features_left, fo.features_right, right_vals, stride, pairs,
                                                  model.queue, cfg.scf, Rng(scf_rng.next_u64()));
                if (scf.skipped) ++model.contrastive_skipped;
                model.replacement_warnings += scf.replacement_warnings;
                scf_ids.push_back(scf.loss_id);
                if (use_momentum) key_maps.push_back(right_vals);
            }

            if (use_ssw) {
                const auto as_rows = [](const Tensor& t, int layer) {
                    NormalizedFeature f;
                    f.layer_index = layer;
                    const int c = t.dim(0);
                    f.x_hat = Tensor({c, static_cast<int>(t.size() / c)});
                    for (std::int64_t i = 0; i < t.size(); ++i) f.x_hat[i] = t[i];
                    return f;
                };
                std::vector<int> ssw_layer_ids;
                for (size_t li = 0; li < fo.in_left_ids.size(); ++li) {
                    const Tensor& lv = tape.val(fo.in_left_ids[li]);
                    const int c = lv.dim(0);
                    auto& stats = model.ssw_stats[li];
                    // covariance statistics come from both views (values only);
                    // the penalty applies to the left branch
                    stats.accumulate(covariance(as_rows(lv, static_cast<int>(li))),
                                     covariance(as_rows(fo.in_right_values[li], static_cast<int>(li))));

                    if (stats.mask_ready()) {
                        const int flat = tape.reshape(fo.in_left_ids[li], {c, static_cast<int>(lv.size() / c)});
                        ssw_layer_ids.push_back(tape.masked_abs_upper(tape.gram(flat), stats.mask()));
                    }
                }
                if (ssw_layer_ids.size() == model.ssw_stats.size() && !ssw_layer_ids.empty()) {
                    const double w = 1.0 / static_cast<double>(ssw_layer_ids.size());
                    ssw_ids.push_back(tape.weighted_sum(ssw_layer_ids, std::vector<double>(ssw_layer_ids.size(), w)));
                } else {
                    ssw_was_ready = false;
                }
            }
        }

        const double invb = 1.0 / static_cast<double>(cfg.train.batch);
        const int disp_mean = tape.weighted_sum(disp_ids, std::vector<double>(disp_ids.size(), invb));
        const int scf_mean = scf_ids.empty()
                                 ? tape.scalar(0.0)
                                 : tape.weighted_sum(scf_ids, std::vector<double>(scf_ids.size(), invb));
        const int ssw_mean = ssw_ids.empty()
                                 ? tape.scalar(0.0)
                                 : tape.weighted_sum(ssw_ids, std::vector<double>(ssw_ids.size(), invb));
        const int total = total_loss(tape, disp_mean, scf_mean, ssw_mean, cfg.loss);
        tape.backward(total);

        ParamSet grads;
        for (const auto& [name, id] : theta.ids) grads.emplace(name, tape.grad(id));
        const double lr = step < cfg.train.lr_switch ? cfg.train.lr : cfg.train.lr2;
        opt.step(model.params, grads, lr);

        if (use_momentum) {
            pair.query_params = filter_prefix(model.params, "enc.");
            momentum_update(pair);
        }

        if (use_momentum && use_scf && cfg.scf.queue_push_per_step > 0 && !key_maps.empty()) {
            const int per_map = std::max(1, cfg.scf.queue_push_per_step / static_cast<int>(key_maps.size()));
            std::vector<std::vector<double>> keys;
            for (const Tensor& km : key_maps) {
                const int c = km.dim(0), fh = km.dim(1), fw = km.dim(2);
                for (int i = 0; i < per_map; ++i) {
                    const int cell = queue_rng.index(fh * fw);
                    std::vector<double> vkey(static_cast<size_t>(c));
                    for (int cc = 0; cc < c; ++cc)
                        vkey[static_cast<size_t>(cc)] = km[static_cast<std::int64_t>(cc) * fh * fw + cell];
                    keys.push_back(std::move(vkey));
                }
            }
            model.queue.push(keys);
        }

        if (use_ssw) {
            const int done = step + 1;
            if (done == cfg.ssw.warmup_steps ||
                (done > cfg.ssw.warmup_steps && (done - cfg.ssw.warmup_steps) % cfg.ssw.mask_refresh == 0))
                for (auto& stats : model.ssw_stats) stats.refresh_mask();
        }

        if (log) {
            nlohmann::json line;
            line["step"] = step;
            line["lr"] = lr;
            line["l_disp"] = tape.val(disp_mean)(0);
            line["l_total"] = tape.val(total)(0);
            if (use_scf) line["l_scf"] = tape.val(scf_mean)(0);
            if (use_ssw) {
                line["l_ssw"] = tape.val(ssw_mean)(0);
                line["ssw_ready"] = ssw_was_ready;
            }
            if (cfg.train.log_every > 0 && (step % cfg.train.log_every == 0 || step + 1 == cfg.train.steps)) {
                // probe consistency under a fixed asymmetric perturbation
                double acc = 0.0;
                long pairs = 0;
                const int n_probe = std::min<int>(cfg.train.probe_samples, static_cast<int>(corpus.size()));
                for (int i = 0; i < n_probe; ++i) {
                    Rng probe_rng = Rng::derive(hash_combine(cfg.seed, kProbeStream), static_cast<std::uint64_t>(i));
                    const DomainStyle l = draw_augment_style(cfg.train.augment_cfg, probe_rng);
                    const DomainStyle r = draw_augment_style(cfg.train.augment_cfg, probe_rng);
                    const StereoSample styled =
                        apply_style_per_view(corpus[static_cast<size_t>(i)], l, r, hash_combine(cfg.seed, 900 + i));
                    const FeatureMap fl = extract_features(styled.left_image, model.params, net, View::left);
                    const FeatureMap fr = extract_features(styled.right_image, model.params, net, View::right);
                    const ConsistencyResult c = stereo_consistency(fl, fr, styled, delta, cfg.scf.normalize);
                    if (c.pair_count > 0) {
                        acc += c.masked * static_cast<double>(c.pair_count);
                        pairs += c.pair_count;
                    }
                }
                if (pairs > 0) line["probe_cosine"] = acc / static_cast<double>(pairs);
            }
            *log << line.dump() << "\n";
        }
        ++model.steps;
    }

    if (use_momentum) model.key_params = pair.key_params;
    model.steps = cfg.train.steps;
    return model;
}

} // namespace stereolab
