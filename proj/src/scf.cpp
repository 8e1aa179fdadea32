// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/scf.hpp"

#include <algorithm>
#include <cmath>

#include "stereolab/error.hpp"

namespace stereolab {

MomentumEncoderPair make_momentum_pair(const ParamSet& query, double momentum) {
    if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("momentum must be in [0, 1]");
    MomentumEncoderPair pair;
    pair.query_params = query;
    pair.key_params = query; // eta == theta at t = 0
    pair.momentum = momentum;
    pair.iteration = 0;
    return pair;
}

void momentum_update(MomentumEncoderPair& pair) {
    if (!(pair.momentum >= 0.0 && pair.momentum <= 1.0)) throw ConfigError("momentum must be in [0, 1]");
    const double m = pair.momentum;
    auto qi = pair.query_params.begin();
    auto ki = pair.key_params.begin();
    for (; qi != pair.query_params.end() && ki != pair.key_params.end(); ++qi, ++ki) {
        if (qi->first != ki->first || !qi->second.same_shape(ki->second))
            throw ShapeError("momentum_update: query/key parameter mismatch at " + qi->first);
        Tensor& eta = ki->second;
        const Tensor& theta = qi->second;
        for (std::int64_t i = 0; i < eta.size(); ++i) eta[i] = m * eta[i] + (1.0 - m) * theta[i];
    }
    if (qi != pair.query_params.end() || ki != pair.key_params.end())
        throw ShapeError("momentum_update: query/key parameter name sets differ");
    ++pair.iteration;
}

NegativeQueue::NegativeQueue(int capacity, int dim) : capacity_(capacity), dim_(dim) {
    if (capacity < 1) throw ConfigError("NegativeQueue: capacity must be >= 1");
    if (dim < 1) throw ConfigError("NegativeQueue: dimension must be >= 1");
}

void NegativeQueue::push(const std::vector<std::vector<double>>& keys) {
    for (const auto& k : keys) {
        if (static_cast<int>(k.size()) != dim_) throw ShapeError("NegativeQueue::push: dimension mismatch");
        entries_.push_back(k);
        if (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
    }
}

void ScfConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("ScfConfig: tau must be positive");
    if (negatives_per_query < 1) throw ConfigError("ScfConfig: N must be >= 1");
    if (!(window >= 3.0)) throw ConfigError("ScfConfig: window must be >= 3");
    if (queue_capacity < 1) throw ConfigError("ScfConfig: K must be >= 1");
    if (exclusion_radius < 0) throw ConfigError("ScfConfig: exclusion_radius must be >= 0");
}

NegativeSample sample_negatives(const FeatureMap& right, std::pair<int, int> center_coord, const ScfConfig& cfg,
                                Rng& rng) {
    cfg.validate();
    const int fh = right.height(), fw = right.width();
    const int cu = center_coord.first, cv = center_coord.second;
    if (cu < 0 || cu >= fw || cv < 0 || cv >= fh) throw ShapeError("sample_negatives: coordinate out of bounds");

    const double cells = cfg.window_is_pixels ? cfg.window / static_cast<double>(right.stride) : cfg.window;
    const int half = std::max(1, static_cast<int>(std::llround(cells / 2.0)));
    const int u0 = std::max(0, cu - half), u1 = std::min(fw - 1, cu + half);
    const int v0 = std::max(0, cv - half), v1 = std::min(fh - 1, cv + half);

    std::vector<std::pair<int, int>> candidates;
    candidates.reserve(static_cast<size_t>(u1 - u0 + 1) * static_cast<size_t>(v1 - v0 + 1));
    for (int v = v0; v <= v1; ++v)
        for (int u = u0; u <= u1; ++u) {
            if (v == cv && std::abs(u - cu) <= cfg.exclusion_radius) continue;
            candidates.emplace_back(u, v);
        }

    NegativeSample out;
    const int n = cfg.negatives_per_query;
    const int m = static_cast<int>(candidates.size());
    if (m == 0) throw Error("sample_negatives: empty candidate window");
    out.coords.reserve(static_cast<size_t>(n));
    if (m >= n) {
        for (int idx : rng.sample_without_replacement(m, n)) out.coords.push_back(candidates[static_cast<size_t>(idx)]);
    } else {
        out.with_replacement = true;
        for (int i = 0; i < n; ++i) out.coords.push_back(candidates[static_cast<size_t>(rng.index(m))]);
    }
    return out;
}

namespace {

double vec_norm(const double* v, int c) {
    double s = 0.0;
    for (int i = 0; i < c; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

// One contrastive term with optional gradients. Vector layout:
//   vecs[0] = query, vecs[1] = positive, vecs[2..] = negatives.
// grads (when non-null) receives dL/d(vec) in the same layout.
double infonce_core(const std::vector<const double*>& vecs, int c, double tau, bool normalize,
                    InfoNceDenominator denom, std::vector<std::vector<double>>* grads) {
    const int total = static_cast<int>(vecs.size());
    const int n_neg = total - 2;

    std::vector<std::vector<double>> unit(static_cast<size_t>(total));
    std::vector<double> norms(static_cast<size_t>(total), 1.0);
    for (int i = 0; i < total; ++i) {
        unit[static_cast<size_t>(i)].assign(vecs[static_cast<size_t>(i)], vecs[static_cast<size_t>(i)] + c);
        if (normalize) {
            const double nm = vec_norm(vecs[static_cast<size_t>(i)], c);
            if (nm < 1e-12) throw Error("pixel_infonce: zero vector under normalization (degenerate feature)");
            norms[static_cast<size_t>(i)] = nm;
            for (auto& x : unit[static_cast<size_t>(i)]) x /= nm;
        }
    }
    const auto& q = unit[0];

    auto dot_q = [&](int i) {
        double s = 0.0;
        for (int k = 0; k < c; ++k) s += q[static_cast<size_t>(k)] * unit[static_cast<size_t>(i)][static_cast<size_t>(k)];
        return s;
    };

    std::vector<double> z(static_cast<size_t>(total - 1)); // z[0] positive, z[1..] negatives
    for (int i = 1; i < total; ++i) z[static_cast<size_t>(i - 1)] = dot_q(i) / tau;

    double loss = 0.0;
    std::vector<double> wz(z.size(), 0.0); // dL/dz
    if (denom == InfoNceDenominator::standard) {
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double s = 0.0;
        for (double v : z) s += std::exp(v - zmax);
        const double lse = zmax + std::log(s);
        loss = lse - z[0];
        if (grads) {
            for (size_t i = 0; i < z.size(); ++i) wz[i] = std::exp(z[i] - lse);
            wz[0] -= 1.0;
        }
    } else {
        if (n_neg == 0) return 0.0; // no denominator terms; defined as zero
        double zmax = z[1];
        for (size_t i = 1; i < z.size(); ++i) zmax = std::max(zmax, z[i]);
        double s = 0.0;
        for (size_t i = 1; i < z.size(); ++i) s += std::exp(z[i] - zmax);
        const double lse = zmax + std::log(s);
        loss = lse - z[0];
        if (grads) {
            wz[0] = -1.0;
            for (size_t i = 1; i < z.size(); ++i) wz[i] = std::exp(z[i] - lse);
        }
    }

    if (grads) {
        grads->assign(static_cast<size_t>(total), std::vector<double>(static_cast<size_t>(c), 0.0));
        // dL/d(unit q) then pull back through the normalization
        std::vector<double> dq_unit(static_cast<size_t>(c), 0.0);
        for (int i = 1; i < total; ++i) {
            const double w = wz[static_cast<size_t>(i - 1)] / tau;
            if (w == 0.0) continue;
            auto& gv = (*grads)[static_cast<size_t>(i)];
            const auto& ui = unit[static_cast<size_t>(i)];
            for (int k = 0; k < c; ++k) {
                dq_unit[static_cast<size_t>(k)] += w * ui[static_cast<size_t>(k)];
                gv[static_cast<size_t>(k)] += w * q[static_cast<size_t>(k)]; // dL/d(unit v_i)
            }
        }
        auto project = [&](const std::vector<double>& u, const std::vector<double>& du, double norm,
                           std::vector<double>& out) {
            if (!normalize) {
                out = du;
                return;
            }
            double udu = 0.0;
            for (int k = 0; k < c; ++k) udu += u[static_cast<size_t>(k)] * du[static_cast<size_t>(k)];
            for (int k = 0; k < c; ++k)
                out[static_cast<size_t>(k)] = (du[static_cast<size_t>(k)] - u[static_cast<size_t>(k)] * udu) / norm;
        };
        project(q, dq_unit, norms[0], (*grads)[0]);
        for (int i = 1; i < total; ++i) {
            std::vector<double> du = (*grads)[static_cast<size_t>(i)];
            project(unit[static_cast<size_t>(i)], du, norms[static_cast<size_t>(i)], (*grads)[static_cast<size_t>(i)]);
        }
    }
    return loss;
}

} // namespace

double pixel_infonce(const std::vector<double>& query, const std::vector<double>& positive,
                     const std::vector<std::vector<double>>& negatives, double tau, bool normalize,
                     InfoNceDenominator denominator) {
    if (!(tau > 0.0)) throw ConfigError("pixel_infonce: tau must be positive");
    const int c = static_cast<int>(query.size());
    if (static_cast<int>(positive.size()) != c) throw ShapeError("pixel_infonce: dimension mismatch");
    std::vector<const double*> vecs{query.data(), positive.data()};
    for (const auto& n : negatives) {
        if (static_cast<int>(n.size()) != c) throw ShapeError("pixel_infonce: dimension mismatch");
        vecs.push_back(n.data());
    }
    return infonce_core(vecs, c, tau, normalize, denominator, nullptr);
}

namespace {

struct PairPlan {
    PixelPair pair;
    std::vector<std::pair<int, int>> negatives; // right-map cells
};

void load_cell(const Tensor& map, int u, int v, std::vector<double>& out) {
    const int c = map.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(map.dim(1)) * map.dim(2);
    const double* p = map.data() + (static_cast<std::int64_t>(v) * map.dim(2) + u);
    out.resize(static_cast<size_t>(c));
    for (int i = 0; i < c; ++i) out[static_cast<size_t>(i)] = p[static_cast<std::int64_t>(i) * plane];
}

void scatter_cell(Tensor& gmap, int u, int v, const std::vector<double>& g) {
    const int c = gmap.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(gmap.dim(1)) * gmap.dim(2);
    double* p = gmap.data() + (static_cast<std::int64_t>(v) * gmap.dim(2) + u);
    for (int i = 0; i < c; ++i) p[static_cast<std::int64_t>(i) * plane] += g[static_cast<size_t>(i)];
}

// Replayable forward/backward over a fixed sampling plan. Gradient buffers
// are optional; per-pair gradients are pre-scaled by 1/P.
double scf_replay(const std::vector<PairPlan>& plan, const NegativeQueue& queue, const ScfConfig& cfg,
                  const Tensor& lv, const Tensor& rv, Tensor* per_pixel, Tensor* gleft, Tensor* gright) {
    const int c = lv.dim(0);
    const int n_queue = queue.size();
    const double inv_pairs = 1.0 / static_cast<double>(plan.size());
    std::vector<double> q, p, tmp;
    double total = 0.0;
    for (const auto& pp : plan) {
        load_cell(lv, pp.pair.query_u, pp.pair.query_v, q);
        load_cell(rv, pp.pair.key_u, pp.pair.key_v, p);
        std::vector<std::vector<double>> negs;
        negs.reserve(pp.negatives.size() + static_cast<size_t>(n_queue));
        for (const auto& [nu, nv] : pp.negatives) {
            load_cell(rv, nu, nv, tmp);
            negs.push_back(tmp);
        }
        for (int i = 0; i < n_queue; ++i) negs.push_back(queue.entry(i));

        std::vector<const double*> vecs{q.data(), p.data()};
        for (const auto& n : negs) vecs.push_back(n.data());

        const bool want_grads = gleft != nullptr;
        std::vector<std::vector<double>> grads;
        const double loss =
            infonce_core(vecs, c, cfg.tau, cfg.normalize, cfg.denominator, want_grads ? &grads : nullptr);
        total += loss;
        if (per_pixel) (*per_pixel)(pp.pair.query_v, pp.pair.query_u) += loss;
        if (want_grads) {
            for (auto& g : grads)
                for (auto& x : g) x *= inv_pairs;
            scatter_cell(*gleft, pp.pair.query_u, pp.pair.query_v, grads[0]);
            if (gright) {
                scatter_cell(*gright, pp.pair.key_u, pp.pair.key_v, grads[1]);
                for (size_t i = 0; i < pp.negatives.size(); ++i)
                    scatter_cell(*gright, pp.negatives[i].first, pp.negatives[i].second, grads[i + 2]);
            }
            // queue entries receive no gradient
        }
    }
    return total * inv_pairs;
}

} // namespace

ScfLossResult scf_loss_tape(Tape& tape, int left_id, int right_id, const Tensor& right_values, int stride,
                            const PositivePairSet& pairs, const NegativeQueue& queue, const ScfConfig& cfg, Rng rng) {
    cfg.validate();
    const Tensor& left = tape.val(left_id);
    if (left.rank() != 3 || right_values.rank() != 3 || !left.same_shape(right_values))
        throw ShapeError("scf_loss: feature map shape mismatch");
    if (pairs.stride != stride) throw ShapeError("scf_loss: stride mismatch between maps and pairs");
    const int fh = left.dim(1), fw = left.dim(2);

    ScfLossResult result;
    result.per_pixel = Tensor({fh, fw});
    if (pairs.pairs.empty()) {
        result.skipped = true;
        result.loss_id = tape.scalar(0.0);
        return result;
    }

    FeatureMap right_map{right_values, stride, View::right};

    // Sampling happens once, up front; the tape closure replays the fixed plan.
    std::vector<PairPlan> plan;
    plan.reserve(pairs.pairs.size());
    for (const auto& pr : pairs.pairs) {
        PairPlan pp;
        pp.pair = pr;
        const auto center = cfg.center == NegativeCenter::match ? std::make_pair(pr.key_u, pr.key_v)
                                                                : std::make_pair(pr.query_u, pr.query_v);
        NegativeSample ns = sample_negatives(right_map, center, cfg, rng);
        if (ns.with_replacement) ++result.replacement_warnings;
        pp.negatives = std::move(ns.coords);
        plan.push_back(std::move(pp));
    }

    const double value = scf_replay(plan, queue, cfg, left, right_values, &result.per_pixel, nullptr, nullptr);

    // The closure owns copies of everything it replays; the tape may outlive
    // the caller's queue and config.
    NegativeQueue queue_copy = queue;
    ScfConfig cfg_copy = cfg;
    Tensor right_copy = right_values;
    result.loss_id = tape.make_node(
        Tensor::full({1}, value), {left_id, right_id},
        [left_id, right_id, right_copy, plan, queue_copy, cfg_copy](Tape& t, int self) {
            const double go = t.grad(self)(0);
            if (go == 0.0) return;
            const Tensor& lv = t.val(left_id);
            const Tensor& rv = right_id >= 0 ? t.val(right_id) : right_copy;
            Tensor gl(lv.shape());
            Tensor gr(rv.shape());
            const bool want_right = right_id >= 0 && t.requires_grad(right_id);
            scf_replay(plan, queue_copy, cfg_copy, lv, rv, nullptr, &gl, want_right ? &gr : nullptr);
            if (t.requires_grad(left_id)) {
                Tensor& dst = t.grad(left_id);
                for (std::int64_t i = 0; i < gl.size(); ++i) dst[i] += go * gl[i];
            }
            if (want_right) {
                Tensor& dst = t.grad(right_id);
                for (std::int64_t i = 0; i < gr.size(); ++i) dst[i] += go * gr[i];
            }
        });
    return result;
}

ScfLossValue scf_loss(const FeatureMap& left, const FeatureMap& right, const PositivePairSet& pairs,
                      const NegativeQueue& queue, const ScfConfig& cfg, Rng rng) {
    if (left.stride != right.stride) throw ShapeError("scf_loss: stride mismatch");
    Tape tape;
    const int left_id = tape.constant(left.values);
    ScfLossResult r = scf_loss_tape(tape, left_id, -1, right.values, left.stride, pairs, queue, cfg, rng);
    ScfLossValue out;
    out.value = tape.val(r.loss_id)(0);
    out.per_pixel = std::move(r.per_pixel);
    out.skipped = r.skipped;
    out.replacement_warnings = r.replacement_warnings;
    return out;
}

} // namespace stereolab
