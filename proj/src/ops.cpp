#include "splatcast/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace splatcast::diff {

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    std::ostringstream os;
    os << op << ": shape mismatch " << shape_str(a) << " vs " << shape_str(b);
    throw OpError(os.str());
}

[[noreturn]] void op_error(const char* op, const std::string& what) {
    throw OpError(std::string(op) + ": " + what);
}

void require_rank(const char* op, const Tensor& t, int rank) {
    if (static_cast<int>(t.shape().size()) != rank) {
        op_error(op, "expected rank " + std::to_string(rank) + " tensor, got " +
                         shape_str(t.shape()));
    }
}

// Gradient accumulation guard: constants never allocate grad buffers.
bool wants_grad(const Node& n) { return n.requires_grad; }

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    auto an = a.node(), bn = b.node();
    return t.record("add", {a, b}, a.shape(), std::move(out), [an, bn](Node& n) {
        if (wants_grad(*an)) {
            an->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (wants_grad(*bn)) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i];
        }
    });
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    auto an = a.node(), bn = b.node();
    return t.record("sub", {a, b}, a.shape(), std::move(out), [an, bn](Node& n) {
        if (wants_grad(*an)) {
            an->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (wants_grad(*bn)) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
        }
    });
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
    const bool a_scalar = a.size() == 1;
    const bool b_scalar = b.size() == 1;
    if (a.shape() != b.shape() && !a_scalar && !b_scalar) {
        shape_error("mul", a.shape(), b.shape());
    }
    auto an = a.node(), bn = b.node();
    if (a.shape() == b.shape()) {
        std::vector<double> out(a.values());
        const auto& bv = b.values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
        return t.record("mul", {a, b}, a.shape(), std::move(out), [an, bn](Node& n) {
            if (wants_grad(*an)) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    an->grad[i] += n.grad[i] * bn->values[i];
            }
            if (wants_grad(*bn)) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    bn->grad[i] += n.grad[i] * an->values[i];
            }
        });
    }
    // One side is a broadcast scalar.
    const Tensor& s = a_scalar ? a : b;
    const Tensor& v = a_scalar ? b : a;
    auto sn = s.node(), vn = v.node();
    const double sv = s.values()[0];
    std::vector<double> out(v.values());
    for (auto& x : out) x *= sv;
    return t.record("mul", {a, b}, v.shape(), std::move(out), [sn, vn](Node& n) {
        const double sval = sn->values[0];
        if (wants_grad(*vn)) {
            vn->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) vn->grad[i] += n.grad[i] * sval;
        }
        if (wants_grad(*sn)) {
            sn->ensure_grad();
            double acc = 0.0;
            for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * vn->values[i];
            sn->grad[0] += acc;
        }
    });
}

Tensor scalar_mul(Tape& t, const Tensor& a, double c) {
    std::vector<double> out(a.values());
    for (auto& x : out) x *= c;
    auto an = a.node();
    return t.record("scalar_mul", {a}, a.shape(), std::move(out), [an, c](Node& n) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += c * n.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) shape_error("matmul", a.shape(), b.shape());

    const double* A = a.values().data();
    const double* B = b.values().data();
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        const double* arow = A + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    auto an = a.node(), bn = b.node();
    return t.record("matmul", {a, b}, {m, n}, std::move(out), [an, bn, m, k, n](Node& nd) {
        const double* G = nd.grad.data();
        if (wants_grad(*an)) {
            an->ensure_grad();
            // dA = G * B^T
            const double* B = bn->values.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = G + static_cast<std::size_t>(i) * n;
                double* darow = an->grad.data() + static_cast<std::size_t>(i) * k;
                for (int p = 0; p < k; ++p) {
                    const double* brow = B + static_cast<std::size_t>(p) * n;
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    darow[p] += acc;
                }
            }
        }
        if (wants_grad(*bn)) {
            bn->ensure_grad();
            // dB = A^T * G
            const double* A = an->values.data();
            for (int p = 0; p < k; ++p) {
                double* dbrow = bn->grad.data() + static_cast<std::size_t>(p) * n;
                for (int i = 0; i < m; ++i) {
                    const double av = A[static_cast<std::size_t>(i) * k + p];
                    const double* grow = G + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                }
            }
        }
    });
}

Tensor transpose(Tape& t, const Tensor& a) {
    require_rank("transpose", a, 2);
    const int m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(a.values().size());
    const double* A = a.values().data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = A[static_cast<std::size_t>(i) * n + j];
    auto an = a.node();
    return t.record("transpose", {a}, {n, m}, std::move(out), [an, m, n](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                an->grad[static_cast<std::size_t>(i) * n + j] +=
                    nd.grad[static_cast<std::size_t>(j) * m + i];
    });
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

Tensor conv2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
    require_rank("conv2d", x, 3);
    require_rank("conv2d", w, 4);
    require_rank("conv2d", b, 1);
    const int ci_n = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
    const int co_n = w.shape()[0], wci = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
    if (wci != ci_n) shape_error("conv2d", x.shape(), w.shape());
    if (b.shape()[0] != co_n) shape_error("conv2d", w.shape(), b.shape());
    if (kh % 2 == 0 || kw % 2 == 0) op_error("conv2d", "kernel dims must be odd, got " + shape_str(w.shape()));
    if (stride != 1 && stride != 2) op_error("conv2d", "stride must be 1 or 2");

    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const int oh = (h + 2 * ph - kh) / stride + 1;
    const int ow = (wd + 2 * pw - kw) / stride + 1;

    auto valid_range = [](int in_dim, int out_dim, int pad, int kk, int s, int& lo, int& hi) {
        // out index o is valid iff 0 <= o*s - pad + kk < in_dim
        lo = 0;
        while (lo < out_dim && lo * s - pad + kk < 0) ++lo;
        hi = out_dim;
        while (hi > lo && (hi - 1) * s - pad + kk >= in_dim) --hi;
    };

    std::vector<double> out(static_cast<std::size_t>(co_n) * oh * ow);
    const double* X = x.values().data();
    const double* W = w.values().data();
    for (int co = 0; co < co_n; ++co) {
        const double bias = b.values()[co];
        double* oc = out.data() + static_cast<std::size_t>(co) * oh * ow;
        std::fill(oc, oc + static_cast<std::size_t>(oh) * ow, bias);
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* xc = X + static_cast<std::size_t>(ci) * h * wd;
            const double* wc = W + ((static_cast<std::size_t>(co) * ci_n + ci) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                int oy_lo, oy_hi;
                valid_range(h, oh, ph, ky, stride, oy_lo, oy_hi);
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = wc[ky * kw + kx];
                    int ox_lo, ox_hi;
                    valid_range(wd, ow, pw, kx, stride, ox_lo, ox_hi);
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        const int iy = oy * stride - ph + ky;
                        const double* xrow = xc + static_cast<std::size_t>(iy) * wd;
                        double* orow = oc + static_cast<std::size_t>(oy) * ow;
                        for (int ox = ox_lo; ox < ox_hi; ++ox) {
                            orow[ox] += wv * xrow[ox * stride - pw + kx];
                        }
                    }
                }
            }
        }
    }

    auto xn = x.node(), wn = w.node(), bn = b.node();
    return t.record(
        "conv2d", {x, w, b}, {co_n, oh, ow}, std::move(out),
        [xn, wn, bn, ci_n, h, wd, co_n, kh, kw, ph, pw, oh, ow, stride, valid_range](Node& nd) {
            const double* G = nd.grad.data();
            const bool gx = wants_grad(*xn), gw = wants_grad(*wn), gb = wants_grad(*bn);
            if (gx) xn->ensure_grad();
            if (gw) wn->ensure_grad();
            if (gb) {
                bn->ensure_grad();
                for (int co = 0; co < co_n; ++co) {
                    const double* gc = G + static_cast<std::size_t>(co) * oh * ow;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += gc[i];
                    bn->grad[co] += acc;
                }
            }
            if (!gx && !gw) return;
            for (int co = 0; co < co_n; ++co) {
                const double* gc = G + static_cast<std::size_t>(co) * oh * ow;
                for (int ci = 0; ci < ci_n; ++ci) {
                    const double* xc = xn->values.data() + static_cast<std::size_t>(ci) * h * wd;
                    double* dxc = gx ? xn->grad.data() + static_cast<std::size_t>(ci) * h * wd : nullptr;
                    const std::size_t wbase = (static_cast<std::size_t>(co) * ci_n + ci) * kh * kw;
                    for (int ky = 0; ky < kh; ++ky) {
                        int oy_lo, oy_hi;
                        valid_range(h, oh, ph, ky, stride, oy_lo, oy_hi);
                        for (int kx = 0; kx < kw; ++kx) {
                            const double wv = wn->values[wbase + ky * kw + kx];
                            int ox_lo, ox_hi;
                            valid_range(wd, ow, pw, kx, stride, ox_lo, ox_hi);
                            double dwacc = 0.0;
                            for (int oy = oy_lo; oy < oy_hi; ++oy) {
                                const int iy = oy * stride - ph + ky;
                                const double* grow = gc + static_cast<std::size_t>(oy) * ow;
                                const double* xrow = xc + static_cast<std::size_t>(iy) * wd;
                                double* dxrow = gx ? dxc + static_cast<std::size_t>(iy) * wd : nullptr;
                                for (int ox = ox_lo; ox < ox_hi; ++ox) {
                                    const int ix = ox * stride - pw + kx;
                                    const double gv = grow[ox];
                                    if (gx) dxrow[ix] += wv * gv;
                                    dwacc += xrow[ix] * gv;
                                }
                            }
                            if (gw) wn->grad[wbase + ky * kw + kx] += dwacc;
                        }
                    }
                }
            }
        });
}

Tensor conv_transpose2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank("conv_transpose2d", x, 3);
    require_rank("conv_transpose2d", w, 4);
    require_rank("conv_transpose2d", b, 1);
    const int ci_n = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
    const int wci = w.shape()[0], co_n = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
    if (wci != ci_n) shape_error("conv_transpose2d", x.shape(), w.shape());
    if (b.shape()[0] != co_n) shape_error("conv_transpose2d", w.shape(), b.shape());
    if (kh % 2 == 0 || kw % 2 == 0)
        op_error("conv_transpose2d", "kernel dims must be odd, got " + shape_str(w.shape()));

    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const int oh = 2 * h, ow = 2 * wd;

    std::vector<double> out(static_cast<std::size_t>(co_n) * oh * ow);
    const double* X = x.values().data();
    const double* W = w.values().data();
    for (int co = 0; co < co_n; ++co) {
        double* oc = out.data() + static_cast<std::size_t>(co) * oh * ow;
        std::fill(oc, oc + static_cast<std::size_t>(oh) * ow, b.values()[co]);
    }
    for (int ci = 0; ci < ci_n; ++ci) {
        const double* xc = X + static_cast<std::size_t>(ci) * h * wd;
        for (int co = 0; co < co_n; ++co) {
            double* oc = out.data() + static_cast<std::size_t>(co) * oh * ow;
            const double* wc = W + ((static_cast<std::size_t>(ci) * co_n + co) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = wc[ky * kw + kx];
                    for (int oy = 0; oy < oh; ++oy) {
                        const int ty = oy + ph - ky;
                        if (ty < 0 || ty % 2 != 0) continue;
                        const int iy = ty / 2;
                        if (iy >= h) continue;
                        const double* xrow = xc + static_cast<std::size_t>(iy) * wd;
                        double* orow = oc + static_cast<std::size_t>(oy) * ow;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int tx = ox + pw - kx;
                            if (tx < 0 || tx % 2 != 0) continue;
                            const int ix = tx / 2;
                            if (ix >= wd) continue;
                            orow[ox] += wv * xrow[ix];
                        }
                    }
                }
            }
        }
    }

    auto xn = x.node(), wn = w.node(), bn = b.node();
    return t.record(
        "conv_transpose2d", {x, w, b}, {co_n, oh, ow}, std::move(out),
        [xn, wn, bn, ci_n, h, wd, co_n, kh, kw, ph, pw, oh, ow](Node& nd) {
            const double* G = nd.grad.data();
            const bool gx = wants_grad(*xn), gw = wants_grad(*wn), gb = wants_grad(*bn);
            if (gx) xn->ensure_grad();
            if (gw) wn->ensure_grad();
            if (gb) {
                bn->ensure_grad();
                for (int co = 0; co < co_n; ++co) {
                    const double* gc = G + static_cast<std::size_t>(co) * oh * ow;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += gc[i];
                    bn->grad[co] += acc;
                }
            }
            if (!gx && !gw) return;
            for (int ci = 0; ci < ci_n; ++ci) {
                const double* xc = xn->values.data() + static_cast<std::size_t>(ci) * h * wd;
                double* dxc = gx ? xn->grad.data() + static_cast<std::size_t>(ci) * h * wd : nullptr;
                for (int co = 0; co < co_n; ++co) {
                    const double* gc = G + static_cast<std::size_t>(co) * oh * ow;
                    const std::size_t wbase = (static_cast<std::size_t>(ci) * co_n + co) * kh * kw;
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const double wv = wn->values[wbase + ky * kw + kx];
                            double dwacc = 0.0;
                            for (int oy = 0; oy < oh; ++oy) {
                                const int ty = oy + ph - ky;
                                if (ty < 0 || ty % 2 != 0) continue;
                                const int iy = ty / 2;
                                if (iy >= h) continue;
                                const double* grow = gc + static_cast<std::size_t>(oy) * ow;
                                const double* xrow = xc + static_cast<std::size_t>(iy) * wd;
                                double* dxrow = gx ? dxc + static_cast<std::size_t>(iy) * wd : nullptr;
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int tx = ox + pw - kx;
                                    if (tx < 0 || tx % 2 != 0) continue;
                                    const int ix = tx / 2;
                                    if (ix >= wd) continue;
                                    const double gv = grow[ox];
                                    if (gx) dxrow[ix] += wv * gv;
                                    dwacc += xrow[ix] * gv;
                                }
                            }
                            if (gw) wn->grad[wbase + ky * kw + kx] += dwacc;
                        }
                    }
                }
            }
        });
}

Tensor maxpool2x2(Tape& t, const Tensor& x) {
    require_rank("maxpool2x2", x, 3);
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (h % 2 != 0 || w % 2 != 0)
        op_error("maxpool2x2", "spatial dims must be even, got " + shape_str(x.shape()));
    const int oh = h / 2, ow = w / 2;
    std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    const double* X = x.values().data();
    for (int ci = 0; ci < c; ++ci) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                std::size_t best_idx = 0;
                double best = -1.0;
                bool first = true;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const std::size_t idx =
                            (static_cast<std::size_t>(ci) * h + (2 * oy + dy)) * w + (2 * ox + dx);
                        if (first || X[idx] > best) {
                            best = X[idx];
                            best_idx = idx;
                            first = false;
                        }
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(ci) * oh + oy) * ow + ox;
                out[o] = best;
                (*argmax)[o] = best_idx;
            }
        }
    }
    auto xn = x.node();
    return t.record("maxpool2x2", {x}, {c, oh, ow}, std::move(out), [xn, argmax](Node& nd) {
        if (!wants_grad(*xn)) return;
        xn->ensure_grad();
        for (std::size_t o = 0; o < nd.grad.size(); ++o) xn->grad[(*argmax)[o]] += nd.grad[o];
    });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

Tensor concat0(Tape& t, const std::vector<Tensor>& parts) {
    if (parts.empty()) op_error("concat0", "no inputs");
    const Shape& first = parts[0].shape();
    int dim0 = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size()) shape_error("concat0", first, s);
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] != first[i]) shape_error("concat0", first, s);
        dim0 += s[0];
    }
    Shape out_shape = first;
    out_shape[0] = dim0;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(numel(out_shape)));
    auto offsets = std::make_shared<std::vector<std::size_t>>();
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& p : parts) {
        offsets->push_back(out.size());
        out.insert(out.end(), p.values().begin(), p.values().end());
        nodes.push_back(p.node());
    }
    return t.record("concat0", parts, std::move(out_shape), std::move(out),
                    [nodes, offsets](Node& nd) {
                        for (std::size_t k = 0; k < nodes.size(); ++k) {
                            if (!wants_grad(*nodes[k])) continue;
                            nodes[k]->ensure_grad();
                            const std::size_t off = (*offsets)[k];
                            for (std::size_t i = 0; i < nodes[k]->grad.size(); ++i)
                                nodes[k]->grad[i] += nd.grad[off + i];
                        }
                    });
}

Tensor reshape(Tape& t, const Tensor& a, Shape new_shape) {
    if (numel(new_shape) != a.size()) shape_error("reshape", a.shape(), new_shape);
    auto an = a.node();
    return t.record("reshape", {a}, std::move(new_shape), a.values(), [an](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < nd.grad.size(); ++i) an->grad[i] += nd.grad[i];
    });
}

Tensor flatten(Tape& t, const Tensor& a) {
    return reshape(t, a, {1, static_cast<int>(a.size())});
}

Tensor slice_row(Tape& t, const Tensor& a, int row) {
    require_rank("slice_row", a, 2);
    const int m = a.shape()[0], n = a.shape()[1];
    if (row < 0 || row >= m)
        op_error("slice_row", "row " + std::to_string(row) + " out of range for " + shape_str(a.shape()));
    std::vector<double> out(a.values().begin() + static_cast<std::size_t>(row) * n,
                            a.values().begin() + static_cast<std::size_t>(row + 1) * n);
    auto an = a.node();
    return t.record("slice_row", {a}, {1, n}, std::move(out), [an, row, n](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (int j = 0; j < n; ++j) an->grad[static_cast<std::size_t>(row) * n + j] += nd.grad[j];
    });
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

namespace {
struct ResizePlan {
    int c, h, w, oh, ow;
    bool rank2;
};

// align-corners source coordinate for one axis; clamped against fp drift.
inline void src_coord(int o, int out_dim, int in_dim, int& lo, int& hi, double& f) {
    if (out_dim == 1 || in_dim == 1) {
        lo = hi = 0;
        f = 0.0;
        return;
    }
    double s = static_cast<double>(o) * (in_dim - 1) / (out_dim - 1);
    if (s < 0.0) s = 0.0;
    if (s > in_dim - 1) s = in_dim - 1;
    lo = static_cast<int>(s);
    if (lo > in_dim - 2) lo = in_dim - 2;
    hi = lo + 1;
    f = s - lo;
}
}  // namespace

Tensor bilinear_resize(Tape& t, const Tensor& a, int oh, int ow) {
    const auto& s = a.shape();
    if (s.size() != 2 && s.size() != 3)
        op_error("bilinear_resize", "expected rank 2 or 3, got " + shape_str(s));
    if (oh < 1 || ow < 1) op_error("bilinear_resize", "target dims must be >= 1");
    ResizePlan p;
    p.rank2 = s.size() == 2;
    p.c = p.rank2 ? 1 : s[0];
    p.h = p.rank2 ? s[0] : s[1];
    p.w = p.rank2 ? s[1] : s[2];
    p.oh = oh;
    p.ow = ow;

    std::vector<double> out(static_cast<std::size_t>(p.c) * oh * ow);
    const double* X = a.values().data();
    for (int ci = 0; ci < p.c; ++ci) {
        const double* xc = X + static_cast<std::size_t>(ci) * p.h * p.w;
        double* oc = out.data() + static_cast<std::size_t>(ci) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            int y0, y1;
            double fy;
            src_coord(oy, oh, p.h, y0, y1, fy);
            for (int ox = 0; ox < ow; ++ox) {
                int x0, x1;
                double fx;
                src_coord(ox, ow, p.w, x0, x1, fx);
                const double v00 = xc[static_cast<std::size_t>(y0) * p.w + x0];
                const double v01 = xc[static_cast<std::size_t>(y0) * p.w + x1];
                const double v10 = xc[static_cast<std::size_t>(y1) * p.w + x0];
                const double v11 = xc[static_cast<std::size_t>(y1) * p.w + x1];
                // difference form: exact for constant inputs
                oc[static_cast<std::size_t>(oy) * ow + ox] =
                    v00 + fx * (v01 - v00) + fy * (v10 - v00) + fy * fx * (v11 - v10 - v01 + v00);
            }
        }
    }
    Shape out_shape = p.rank2 ? Shape{oh, ow} : Shape{p.c, oh, ow};
    auto an = a.node();
    return t.record("bilinear_resize", {a}, std::move(out_shape), std::move(out), [an, p](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (int ci = 0; ci < p.c; ++ci) {
            double* dxc = an->grad.data() + static_cast<std::size_t>(ci) * p.h * p.w;
            const double* gc = nd.grad.data() + static_cast<std::size_t>(ci) * p.oh * p.ow;
            for (int oy = 0; oy < p.oh; ++oy) {
                int y0, y1;
                double fy;
                src_coord(oy, p.oh, p.h, y0, y1, fy);
                for (int ox = 0; ox < p.ow; ++ox) {
                    int x0, x1;
                    double fx;
                    src_coord(ox, p.ow, p.w, x0, x1, fx);
                    const double g = gc[static_cast<std::size_t>(oy) * p.ow + ox];
                    dxc[static_cast<std::size_t>(y0) * p.w + x0] += (1 - fx) * (1 - fy) * g;
                    dxc[static_cast<std::size_t>(y0) * p.w + x1] += fx * (1 - fy) * g;
                    dxc[static_cast<std::size_t>(y1) * p.w + x0] += (1 - fx) * fy * g;
                    dxc[static_cast<std::size_t>(y1) * p.w + x1] += fx * fy * g;
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities and reductions
// ---------------------------------------------------------------------------

Tensor exp(Tape& t, const Tensor& a) {
    std::vector<double> out(a.values());
    for (auto& v : out) v = std::exp(v);
    auto an = a.node();
    auto saved = std::make_shared<std::vector<double>>(out);
    return t.record("exp", {a}, a.shape(), std::move(out), [an, saved](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < nd.grad.size(); ++i) an->grad[i] += nd.grad[i] * (*saved)[i];
    });
}

Tensor softmax(Tape& t, const Tensor& a, int axis) {
    const auto& s = a.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        op_error("softmax", "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    const int len = s[axis];
    if (len == 0) op_error("softmax", "axis of length 0");
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (int i = axis + 1; i < static_cast<int>(s.size()); ++i) inner *= s[i];

    std::vector<double> out(a.values().size());
    const double* X = a.values().data();
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::size_t base = static_cast<std::size_t>(o) * len * inner + in;
            double mx = X[base];
            for (int k = 1; k < len; ++k)
                mx = std::max(mx, X[base + static_cast<std::size_t>(k) * inner]);
            double sum = 0.0;
            for (int k = 0; k < len; ++k) {
                const double e = std::exp(X[base + static_cast<std::size_t>(k) * inner] - mx);
                out[base + static_cast<std::size_t>(k) * inner] = e;
                sum += e;
            }
            for (int k = 0; k < len; ++k) out[base + static_cast<std::size_t>(k) * inner] /= sum;
        }
    }
    auto an = a.node();
    auto saved = std::make_shared<std::vector<double>>(out);
    return t.record("softmax", {a}, s, std::move(out), [an, saved, outer, inner, len](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        const auto& y = *saved;
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::size_t base = static_cast<std::size_t>(o) * len * inner + in;
                double dot = 0.0;
                for (int k = 0; k < len; ++k) {
                    const std::size_t i = base + static_cast<std::size_t>(k) * inner;
                    dot += nd.grad[i] * y[i];
                }
                for (int k = 0; k < len; ++k) {
                    const std::size_t i = base + static_cast<std::size_t>(k) * inner;
                    an->grad[i] += y[i] * (nd.grad[i] - dot);
                }
            }
        }
    });
}

Tensor mean(Tape& t, const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    const double n = static_cast<double>(a.size());
    auto an = a.node();
    return t.record("mean", {a}, {1}, {acc / n}, [an, n](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        const double g = nd.grad[0] / n;
        for (auto& d : an->grad) d += g;
    });
}

Tensor sum(Tape& t, const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    auto an = a.node();
    return t.record("sum", {a}, {1}, {acc}, [an](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        const double g = nd.grad[0];
        for (auto& d : an->grad) d += g;
    });
}

Tensor abs(Tape& t, const Tensor& a) {
    std::vector<double> out(a.values());
    for (auto& v : out) v = std::fabs(v);
    auto an = a.node();
    return t.record("abs", {a}, a.shape(), std::move(out), [an](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < nd.grad.size(); ++i) {
            const double x = an->values[i];
            const double sg = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            an->grad[i] += nd.grad[i] * sg;
        }
    });
}

Tensor square(Tape& t, const Tensor& a) {
    std::vector<double> out(a.values());
    for (auto& v : out) v *= v;
    auto an = a.node();
    return t.record("square", {a}, a.shape(), std::move(out), [an](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < nd.grad.size(); ++i)
            an->grad[i] += nd.grad[i] * 2.0 * an->values[i];
    });
}

Tensor gelu(Tape& t, const Tensor& a) {
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    static const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
    std::vector<double> out(a.values());
    for (auto& v : out) v = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    auto an = a.node();
    return t.record("gelu", {a}, a.shape(), std::move(out), [an](Node& nd) {
        if (!wants_grad(*an)) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < nd.grad.size(); ++i) {
            const double x = an->values[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            an->grad[i] += nd.grad[i] * (cdf + x * pdf);
        }
    });
}

Tensor add_bias(Tape& t, const Tensor& x, const Tensor& b) {
    require_rank("add_bias", x, 2);
    require_rank("add_bias", b, 1);
    const int m = x.shape()[0], n = x.shape()[1];
    if (b.shape()[0] != n) shape_error("add_bias", x.shape(), b.shape());
    std::vector<double> out(x.values());
    const double* B = b.values().data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += B[j];
    auto xn = x.node(), bn = b.node();
    return t.record("add_bias", {x, b}, x.shape(), std::move(out), [xn, bn, m, n](Node& nd) {
        if (wants_grad(*xn)) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < nd.grad.size(); ++i) xn->grad[i] += nd.grad[i];
        }
        if (wants_grad(*bn)) {
            bn->ensure_grad();
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += nd.grad[static_cast<std::size_t>(i) * n + j];
                bn->grad[j] += acc;
            }
        }
    });
}

}  // namespace splatcast::diff
