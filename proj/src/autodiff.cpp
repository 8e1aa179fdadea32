// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/autodiff.hpp"

#include <cmath>

#include "stereolab/error.hpp"

namespace stereolab {

int Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.val = std::move(value);
    n.needs = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::make_node(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> backward) {
    Node n;
    n.val = std::move(value);
    n.parents = std::move(parents);
    n.needs = any_needs(n.parents);
    if (n.needs) n.back = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

bool Tape::any_needs(const std::vector<int>& ids) const {
    for (int id : ids)
        if (id >= 0 && nodes_[static_cast<size_t>(id)].needs) return true;
    return false;
}

void Tape::backward(int root) {
    if (val(root).size() != 1) throw ShapeError("backward: root must be scalar");

    // Reachability from the root (over grad-requiring parents only).
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<int> stack{root};
    reach[static_cast<size_t>(root)] = 1;
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        for (int p : nodes_[static_cast<size_t>(id)].parents)
            if (p >= 0 && !reach[static_cast<size_t>(p)] && nodes_[static_cast<size_t>(p)].needs) {
                reach[static_cast<size_t>(p)] = 1;
                stack.push_back(p);
            }
    }
    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (!reach[i]) continue;
        auto& n = nodes_[i];
        if (n.grad.size() != n.val.size()) n.grad = Tensor(n.val.shape());
        else n.grad.fill(0.0);
    }
    grad(root)[0] = 1.0;
    for (int id = root; id >= 0; --id) {
        auto& n = nodes_[static_cast<size_t>(id)];
        if (!reach[static_cast<size_t>(id)] || !n.back) continue;
        n.back(*this, id);
    }
}

// ---------------------------------------------------------------------------

int Tape::add(int a, int b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (!x.same_shape(y)) throw ShapeError("add: shape mismatch");
    Tensor out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return make_node(std::move(out), {a, b}, [a, b](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad(b);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
}

int Tape::weighted_sum(const std::vector<int>& terms, const std::vector<double>& coef) {
    if (terms.empty() || terms.size() != coef.size()) throw ShapeError("weighted_sum: bad arguments");
    Tensor out(val(terms[0]).shape());
    for (size_t k = 0; k < terms.size(); ++k) {
        const Tensor& x = val(terms[k]);
        if (!x.same_shape(out)) throw ShapeError("weighted_sum: shape mismatch");
        for (std::int64_t i = 0; i < x.size(); ++i) out[i] += coef[k] * x[i];
    }
    return make_node(std::move(out), terms, [terms, coef](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        for (size_t k = 0; k < terms.size(); ++k) {
            if (!t.requires_grad(terms[k])) continue;
            Tensor& gp = t.grad(terms[k]);
            for (std::int64_t i = 0; i < g.size(); ++i) gp[i] += coef[k] * g[i];
        }
    });
}

int Tape::inner(int x, const Tensor& weights) {
    const Tensor& in = val(x);
    if (!in.same_shape(weights)) throw ShapeError("inner: shape mismatch");
    double s = 0.0;
    for (std::int64_t i = 0; i < in.size(); ++i) s += in[i] * weights[i];
    Tensor w_copy = weights;
    return make_node(Tensor::full({1}, s), {x}, [x, w_copy](Tape& t, int self) {
        if (!t.requires_grad(x)) return;
        const double go = t.grad(self)(0);
        Tensor& gx = t.grad(x);
        for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += go * w_copy[i];
    });
}

int Tape::elu(int x) {
    const Tensor& in = val(x);
    Tensor out(in.shape());
    for (std::int64_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : std::expm1(in[i]);
    return make_node(std::move(out), {x}, [x](Tape& t, int self) {
        if (!t.requires_grad(x)) return;
        const Tensor& g = t.grad(self);
        const Tensor& in = t.val(x);
        Tensor& gx = t.grad(x);
        for (std::int64_t i = 0; i < in.size(); ++i) gx[i] += g[i] * (in[i] > 0.0 ? 1.0 : std::exp(in[i]));
    });
}

// ---------------------------------------------------------------------------

int Tape::conv2d(int x, int w, int b, int stride, int pad) {
    const Tensor& in = val(x);
    const Tensor& wt = val(w);
    if (in.rank() != 3 || wt.rank() != 4) throw ShapeError("conv2d: expects CxHxW input, OxCxKhxKw weights");
    const int ci = in.dim(0), h = in.dim(1), wd = in.dim(2);
    const int co = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
    if (wt.dim(1) != ci) throw ShapeError("conv2d: channel mismatch");
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;

    Tensor out({co, oh, ow});
    for (int oc = 0; oc < co; ++oc) {
        const double bias = b >= 0 ? val(b)(oc) : 0.0;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bias;
                for (int ic = 0; ic < ci; ++ic)
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= wd) continue;
                            acc += in(ic, iy, ix) * wt(oc, ic, ky, kx);
                        }
                    }
                out(oc, oy, ox) = acc;
            }
    }
    return make_node(std::move(out), {x, w, b}, [=](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& in2 = t.val(x);
        const Tensor& wt2 = t.val(w);
        const bool gx = t.requires_grad(x), gw = t.requires_grad(w);
        const bool gb = b >= 0 && t.requires_grad(b);
        for (int oc = 0; oc < co; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const double go = g(oc, oy, ox);
                    if (go == 0.0) continue;
                    if (gb) t.grad(b)(oc) += go;
                    for (int ic = 0; ic < ci; ++ic)
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= wd) continue;
                                if (gx) t.grad(x)(ic, iy, ix) += go * wt2(oc, ic, ky, kx);
                                if (gw) t.grad(w)(oc, ic, ky, kx) += go * in2(ic, iy, ix);
                            }
                        }
                }
    });
}

namespace {
// output columns for which ix = ox*stride - pad + k stays inside [0, limit)
inline void valid_span(int out_dim, int stride, int pad, int k, int limit, int& lo, int& hi) {
    lo = 0;
    while (lo < out_dim && lo * stride - pad + k < 0) ++lo;
    hi = out_dim;
    while (hi > lo && (hi - 1) * stride - pad + k >= limit) --hi;
}
} // namespace

int Tape::conv3d(int x, int w, int b, int sd, int sh, int sw, int pad) {
    const Tensor& in = val(x);
    const Tensor& wt = val(w);
    if (in.rank() != 4 || wt.rank() != 4) throw ShapeError("conv3d: expects CxDxHxW input");
    // cubic kernels; rank-4 weight layout (Co, Ci, K, K*K) with the two
    // trailing kernel dims flattened
    const int ci = in.dim(0), dd = in.dim(1), h = in.dim(2), wd = in.dim(3);
    const int co = wt.dim(0);
    if (wt.dim(1) != ci) throw ShapeError("conv3d: channel mismatch");
    const int k = wt.dim(2);
    if (wt.dim(3) != k * k) throw ShapeError("conv3d: weights must be (Co,Ci,K,K*K)");
    const int od = (dd + 2 * pad - k) / sd + 1;
    const int oh = (h + 2 * pad - k) / sh + 1;
    const int ow = (wd + 2 * pad - k) / sw + 1;

    const auto in_at = [&](int c, int z, int y) {
        return in.data() + ((static_cast<std::int64_t>(c) * dd + z) * h + y) * wd;
    };

    Tensor out({co, od, oh, ow});
    for (int oc = 0; oc < co; ++oc) {
        double* out_base = out.data() + static_cast<std::int64_t>(oc) * od * oh * ow;
        const double bias = b >= 0 ? val(b)(oc) : 0.0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(od) * oh * ow; ++i) out_base[i] = bias;
        for (int ic = 0; ic < ci; ++ic)
            for (int kz = 0; kz < k; ++kz)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = wt(oc, ic, kz, ky * k + kx);
                        if (wv == 0.0) continue;
                        int xlo, xhi;
                        valid_span(ow, sw, pad, kx, wd, xlo, xhi);
                        for (int oz = 0; oz < od; ++oz) {
                            const int iz = oz * sd - pad + kz;
                            if (iz < 0 || iz >= dd) continue;
                            for (int oy = 0; oy < oh; ++oy) {
                                const int iy = oy * sh - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                const double* in_row = in_at(ic, iz, iy) - pad + kx;
                                double* out_row = out_base + (static_cast<std::int64_t>(oz) * oh + oy) * ow;
                                if (sw == 1)
                                    for (int ox = xlo; ox < xhi; ++ox) out_row[ox] += wv * in_row[ox];
                                else
                                    for (int ox = xlo; ox < xhi; ++ox) out_row[ox] += wv * in_row[ox * sw];
                            }
                        }
                    }
    }
    return make_node(std::move(out), {x, w, b}, [=](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& in2 = t.val(x);
        const Tensor& wt2 = t.val(w);
        const bool gx = t.requires_grad(x), gw = t.requires_grad(w);
        const bool gb = b >= 0 && t.requires_grad(b);
        if (gb) {
            Tensor& gbias = t.grad(b);
            for (int oc = 0; oc < co; ++oc) {
                const double* grow = g.data() + static_cast<std::int64_t>(oc) * od * oh * ow;
                double acc = 0.0;
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(od) * oh * ow; ++i) acc += grow[i];
                gbias(oc) += acc;
            }
        }
        if (!gx && !gw) return;
        for (int oc = 0; oc < co; ++oc) {
            const double* gbase = g.data() + static_cast<std::int64_t>(oc) * od * oh * ow;
            for (int ic = 0; ic < ci; ++ic)
                for (int kz = 0; kz < k; ++kz)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const double wv = wt2(oc, ic, kz, ky * k + kx);
                            double wacc = 0.0;
                            int xlo, xhi;
                            valid_span(ow, sw, pad, kx, wd, xlo, xhi);
                            for (int oz = 0; oz < od; ++oz) {
                                const int iz = oz * sd - pad + kz;
                                if (iz < 0 || iz >= dd) continue;
                                for (int oy = 0; oy < oh; ++oy) {
                                    const int iy = oy * sh - pad + ky;
                                    if (iy < 0 || iy >= h) continue;
                                    const double* grow = gbase + (static_cast<std::int64_t>(oz) * oh + oy) * ow;
                                    const std::int64_t in_off = ((static_cast<std::int64_t>(ic) * dd + iz) * h + iy) *
                                                                    wd -
                                                                pad + kx;
                                    const double* in_row = in2.data() + in_off;
                                    double* gx_row = gx ? t.grad(x).data() + in_off : nullptr;
                                    if (sw == 1) {
                                        for (int ox = xlo; ox < xhi; ++ox) {
                                            const double go = grow[ox];
                                            if (gx) gx_row[ox] += go * wv;
                                            if (gw) wacc += go * in_row[ox];
                                        }
                                    } else {
                                        for (int ox = xlo; ox < xhi; ++ox) {
                                            const double go = grow[ox];
                                            if (gx) gx_row[ox * sw] += go * wv;
                                            if (gw) wacc += go * in_row[ox * sw];
                                        }
                                    }
                                }
                            }
                            if (gw) t.grad(w)(oc, ic, kz, ky * k + kx) += wacc;
                        }
        }
    });
}

int Tape::instance_norm(int x, double eps) {
    const Tensor& in = val(x);
    if (in.rank() != 3) throw ShapeError("instance_norm: expects CxHxW");
    const int c = in.dim(0);
    const std::int64_t n = static_cast<std::int64_t>(in.dim(1)) * in.dim(2);

    Tensor out(in.shape());
    Tensor inv_sigma({c});
    for (int i = 0; i < c; ++i) {
        const double* p = in.data() + static_cast<std::int64_t>(i) * n;
        double mean = 0.0;
        for (std::int64_t j = 0; j < n; ++j) mean += p[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            const double d = p[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_sigma(i) = inv;
        double* q = out.data() + static_cast<std::int64_t>(i) * n;
        for (std::int64_t j = 0; j < n; ++j) q[j] = (p[j] - mean) * inv;
    }
    return make_node(std::move(out), {x}, [x, c, n, inv_sigma](Tape& t, int self) {
        if (!t.requires_grad(x)) return;
        const Tensor& g = t.grad(self);
        const Tensor& y = t.val(self);
        Tensor& gx = t.grad(x);
        for (int i = 0; i < c; ++i) {
            const double* gp = g.data() + static_cast<std::int64_t>(i) * n;
            const double* yp = y.data() + static_cast<std::int64_t>(i) * n;
            double mg = 0.0, mgy = 0.0;
            for (std::int64_t j = 0; j < n; ++j) {
                mg += gp[j];
                mgy += gp[j] * yp[j];
            }
            mg /= static_cast<double>(n);
            mgy /= static_cast<double>(n);
            double* out = gx.data() + static_cast<std::int64_t>(i) * n;
            const double inv = inv_sigma(i);
            for (std::int64_t j = 0; j < n; ++j) out[j] += inv * (gp[j] - mg - yp[j] * mgy);
        }
    });
}

// ---------------------------------------------------------------------------

int Tape::concat_volume(int left, int right, int levels) {
    const Tensor& l = val(left);
    const Tensor& r = val(right);
    if (!l.same_shape(r) || l.rank() != 3) throw ShapeError("concat_volume: expects matching CxHxW maps");
    const int c = l.dim(0), h = l.dim(1), w = l.dim(2);
    if (levels < 1) throw ShapeError("concat_volume: levels must be >= 1");

    Tensor out({2 * c, levels, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int k = 0; k < levels; ++k)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    out(ch, k, y, x) = l(ch, y, x);
                    out(c + ch, k, y, x) = x - k >= 0 ? r(ch, y, x - k) : 0.0;
                }
    return make_node(std::move(out), {left, right}, [=](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const bool gl = t.requires_grad(left), gr = t.requires_grad(right);
        for (int ch = 0; ch < c; ++ch)
            for (int k = 0; k < levels; ++k)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        if (gl) t.grad(left)(ch, y, x) += g(ch, k, y, x);
                        if (gr && x - k >= 0) t.grad(right)(ch, y, x - k) += g(c + ch, k, y, x);
                    }
    });
}

int Tape::corr_volume(int left, int right, int levels) {
    const Tensor& l = val(left);
    const Tensor& r = val(right);
    if (!l.same_shape(r) || l.rank() != 3) throw ShapeError("corr_volume: expects matching CxHxW maps");
    const int c = l.dim(0), h = l.dim(1), w = l.dim(2);

    Tensor out({1, levels, h, w});
    for (int k = 0; k < levels; ++k)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (x - k < 0) continue;
                double acc = 0.0;
                for (int ch = 0; ch < c; ++ch) acc += l(ch, y, x) * r(ch, y, x - k);
                out(0, k, y, x) = acc;
            }
    return make_node(std::move(out), {left, right}, [=](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& l2 = t.val(left);
        const Tensor& r2 = t.val(right);
        const bool gl = t.requires_grad(left), gr = t.requires_grad(right);
        for (int k = 0; k < levels; ++k)
            for (int y = 0; y < h; ++y)
                for (int x = k; x < w; ++x) {
                    const double go = g(0, k, y, x);
                    if (go == 0.0) continue;
                    for (int ch = 0; ch < c; ++ch) {
                        if (gl) t.grad(left)(ch, y, x) += go * r2(ch, y, x - k);
                        if (gr) t.grad(right)(ch, y, x - k) += go * l2(ch, y, x);
                    }
                }
    });
}

// ---------------------------------------------------------------------------

namespace {
struct LinW {
    int lo;
    int hi;
    double whi;
};
LinW axis_weight(int out, int factor, int in_dim) {
    const double src = static_cast<double>(out) / static_cast<double>(factor);
    int lo = static_cast<int>(std::floor(src));
    double f = src - lo;
    if (lo >= in_dim - 1) {
        lo = in_dim - 1;
        f = 0.0;
    }
    const int hi = lo + (f > 0.0 ? 1 : 0);
    return {lo, hi, f};
}
} // namespace

int Tape::upsample3(int x, int factor) {
    const Tensor& in = val(x);
    if (in.rank() != 3) throw ShapeError("upsample3: expects DxHxW");
    const int d = in.dim(0), h = in.dim(1), w = in.dim(2);
    const int od = d * factor, oh = h * factor, ow = w * factor;

    Tensor out({od, oh, ow});
    for (int z = 0; z < od; ++z) {
        const LinW wz = axis_weight(z, factor, d);
        for (int y = 0; y < oh; ++y) {
            const LinW wy = axis_weight(y, factor, h);
            for (int xx = 0; xx < ow; ++xx) {
                const LinW wx = axis_weight(xx, factor, w);
                double acc = 0.0;
                for (int az = 0; az < 2; ++az)
                    for (int ay = 0; ay < 2; ++ay)
                        for (int ax = 0; ax < 2; ++ax) {
                            const double wgt = (az ? wz.whi : 1.0 - wz.whi) * (ay ? wy.whi : 1.0 - wy.whi) *
                                               (ax ? wx.whi : 1.0 - wx.whi);
                            if (wgt == 0.0) continue;
                            acc += wgt * in(az ? wz.hi : wz.lo, ay ? wy.hi : wy.lo, ax ? wx.hi : wx.lo);
                        }
                out(z, y, xx) = acc;
            }
        }
    }
    return make_node(std::move(out), {x}, [=](Tape& t, int self) {
        if (!t.requires_grad(x)) return;
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(x);
        for (int z = 0; z < od; ++z) {
            const LinW wz = axis_weight(z, factor, d);
            for (int y = 0; y < oh; ++y) {
                const LinW wy = axis_weight(y, factor, h);
                for (int xx = 0; xx < ow; ++xx) {
                    const LinW wx = axis_weight(xx, factor, w);
                    const double go = g(z, y, xx);
                    if (go == 0.0) continue;
                    for (int az = 0; az < 2; ++az)
                        for (int ay = 0; ay < 2; ++ay)
                            for (int ax = 0; ax < 2; ++ax) {
                                const double wgt = (az ? wz.whi : 1.0 - wz.whi) * (ay ? wy.whi : 1.0 - wy.whi) *
                                                   (ax ? wx.whi : 1.0 - wx.whi);
                                if (wgt == 0.0) continue;
                                gx(az ? wz.hi : wz.lo, ay ? wy.hi : wy.lo, ax ? wx.hi : wx.lo) += go * wgt;
                            }
                }
            }
        }
    });
}

int Tape::soft_argmin(int scores) {
    const Tensor& s = val(scores);
    if (s.rank() != 3) throw ShapeError("soft_argmin: expects DxHxW");
    const int d = s.dim(0), h = s.dim(1), w = s.dim(2);

    Tensor out({h, w});
    Tensor probs({d, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double zmax = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < d; ++k) zmax = std::max(zmax, -s(k, y, x));
            double denom = 0.0;
            for (int k = 0; k < d; ++k) denom += std::exp(-s(k, y, x) - zmax);
            double e = 0.0;
            for (int k = 0; k < d; ++k) {
                const double p = std::exp(-s(k, y, x) - zmax) / denom;
                probs(k, y, x) = p;
                e += p * static_cast<double>(k);
            }
            out(y, x) = e;
        }
    return make_node(std::move(out), {scores}, [scores, probs, d, h, w](Tape& t, int self) {
        if (!t.requires_grad(scores)) return;
        const Tensor& g = t.grad(self);
        const Tensor& o = t.val(self);
        Tensor& gs = t.grad(scores);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double go = g(y, x);
                if (go == 0.0) continue;
                const double e = o(y, x);
                for (int k = 0; k < d; ++k)
                    gs(k, y, x) += -go * probs(k, y, x) * (static_cast<double>(k) - e);
            }
    });
}

int Tape::smooth_l1(int pred, const Tensor& gt, const BoolGrid& valid, double beta, double d_max, bool* skipped) {
    const Tensor& p = val(pred);
    if (!p.same_shape(gt)) throw ShapeError("smooth_l1: shape mismatch");
    if (!(beta > 0.0)) throw ConfigError("smooth_l1: beta must be positive");
    const int h = p.dim(0), w = p.dim(1);

    std::int64_t count = 0;
    double total = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double g = gt(y, x);
            if (!valid.at(y, x) || !std::isfinite(g) || g >= d_max) continue;
            ++count;
            const double e = std::abs(p(y, x) - g);
            total += e < beta ? 0.5 * e * e / beta : e - 0.5 * beta;
        }
    if (skipped) *skipped = count == 0;
    if (count == 0) return scalar(0.0);

    const double inv = 1.0 / static_cast<double>(count);
    Tensor out = Tensor::full({1}, total * inv);
    Tensor gt_copy = gt;
    BoolGrid valid_copy = valid;
    return make_node(std::move(out), {pred}, [pred, gt_copy, valid_copy, beta, d_max, inv, h, w](Tape& t, int self) {
        if (!t.requires_grad(pred)) return;
        const double go = t.grad(self)(0) * inv;
        const Tensor& pv = t.val(pred);
        Tensor& gp = t.grad(pred);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double g = gt_copy(y, x);
                if (!valid_copy.at(y, x) || !std::isfinite(g) || g >= d_max) continue;
                const double e = pv(y, x) - g;
                const double de = std::abs(e) < beta ? e / beta : (e > 0.0 ? 1.0 : -1.0);
                gp(y, x) += go * de;
            }
    });
}

// ---------------------------------------------------------------------------

int Tape::reshape(int x, std::vector<int> shape) {
    const Tensor& in = val(x);
    if (Tensor::count(shape) != in.size()) throw ShapeError("reshape: element count mismatch");
    Tensor out(std::move(shape));
    for (std::int64_t i = 0; i < in.size(); ++i) out[i] = in[i];
    return make_node(std::move(out), {x}, [x](Tape& t, int self) {
        if (!t.requires_grad(x)) return;
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(x);
        for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

int Tape::gram(int x) {
    const Tensor& in = val(x);
    if (in.rank() != 2) throw ShapeError("gram: expects CxN");
    const int c = in.dim(0), n = in.dim(1);
    Tensor out({c, c});
    for (int i = 0; i < c; ++i)
        for (int j = i; j < c; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += in(i, k) * in(j, k);
            s /= n;
            out(i, j) = s;
            out(j, i) = s;
        }
    return make_node(std::move(out), {x}, [x, c, n](Tape& t, int self) {
        if (!t.requires_grad(x)) return;
        const Tensor& g = t.grad(self);
        const Tensor& in2 = t.val(x);
        Tensor& gx = t.grad(x);
        // dX = (G + G^T) X / N
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j) {
                const double w = (g(i, j) + g(j, i)) / n;
                if (w == 0.0) continue;
                for (int k = 0; k < n; ++k) gx(i, k) += w * in2(j, k);
            }
    });
}

int Tape::masked_abs_upper(int sigma, const BoolGrid& mask) {
    const Tensor& s = val(sigma);
    if (s.rank() != 2 || s.dim(0) != s.dim(1)) throw ShapeError("masked_abs_upper: expects square matrix");
    const int c = s.dim(0);
    if (mask.h != c || mask.w != c) throw ShapeError("masked_abs_upper: mask shape mismatch");

    double total = 0.0;
    for (int i = 0; i < c; ++i)
        for (int j = i + 1; j < c; ++j)
            if (mask.at(i, j)) total += std::abs(s(i, j));
    BoolGrid mask_copy = mask;
    return make_node(Tensor::full({1}, total), {sigma}, [sigma, mask_copy, c](Tape& t, int self) {
        if (!t.requires_grad(sigma)) return;
        const double go = t.grad(self)(0);
        const Tensor& s2 = t.val(sigma);
        Tensor& gs = t.grad(sigma);
        for (int i = 0; i < c; ++i)
            for (int j = i + 1; j < c; ++j) {
                if (!mask_copy.at(i, j)) continue;
                const double v = s2(i, j);
                gs(i, j) += go * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
            }
    });
}

} // namespace stereolab
