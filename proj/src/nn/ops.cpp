#include "nilm/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nilm::nn {

namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
    if (a.shape() != b.shape()) throw ShapeError(std::string(op) + ": operand shapes differ", a.shape(), b.shape());
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
    if (a.value().rank() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank), a.shape(), Shape(rank, 1));
}

// Adds `src` (same size) into the gradient of node `id` if it wants one.
void accumulate(Graph& g, std::size_t id, const Tensor& src, double s = 1.0) {
    if (!g.requires_grad(id)) return;
    Tensor& dst = g.grad_buffer(id);
    double* d = dst.data();
    const double* x = src.data();
    for (std::size_t k = 0; k < dst.size(); ++k) d[k] += s * x[k];
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape("add", a, b);
    Tensor out = a.value();
    const double* y = b.value().data();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += y[k];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(std::move(out), {ia, ib}, [ia, ib](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_buffer(self);
        accumulate(g, ia, go);
        accumulate(g, ib, go);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape("sub", a, b);
    Tensor out = a.value();
    const double* y = b.value().data();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= y[k];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(std::move(out), {ia, ib}, [ia, ib](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_buffer(self);
        accumulate(g, ia, go);
        accumulate(g, ib, go, -1.0);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape("mul", a, b);
    Tensor out = a.value();
    const double* y = b.value().data();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= y[k];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(std::move(out), {ia, ib}, [ia, ib](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_buffer(self);
        const Tensor& va = g.value(ia);
        const Tensor& vb = g.value(ib);
        if (g.requires_grad(ia)) {
            Tensor& ga = g.grad_buffer(ia);
            for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += go[k] * vb[k];
        }
        if (g.requires_grad(ib)) {
            Tensor& gb = g.grad_buffer(ib);
            for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += go[k] * va[k];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (auto& v : out.values()) v *= s;
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {ia}, [ia, s](Graph& g, std::size_t self) {
        accumulate(g, ia, g.grad_buffer(self), s);
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (auto& v : out.values()) v += s;
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {ia}, [ia](Graph& g, std::size_t self) {
        accumulate(g, ia, g.grad_buffer(self));
    });
}

Var matmul(const Var& a, const Var& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) throw ShapeError("matmul: inner dimensions differ", a.shape(), b.shape());
    Tensor out({m, n}, 0.0);
    const double* pa = a.value().data();
    const double* pb = b.value().data();
    double* po = out.data();
    if (n == 1) {
        // matrix-vector product: contiguous dot products
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = pa + i * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * pb[p];
            po[i] = s;
        }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double av = pa[i * k + p];
                if (av == 0.0) continue;
                const double* brow = pb + p * n;
                double* orow = po + i * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
    }
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& g, std::size_t self) {
        const double* go = g.grad_buffer(self).data();
        const double* pa = g.value(ia).data();
        const double* pb = g.value(ib).data();
        if (g.requires_grad(ia)) {
            double* ga = g.grad_buffer(ia).data();
            if (n == 1) {
                for (std::size_t i = 0; i < m; ++i) {
                    const double gv = go[i];
                    if (gv == 0.0) continue;
                    double* garow = ga + i * k;
                    for (std::size_t p = 0; p < k; ++p) garow[p] += gv * pb[p];
                }
            } else {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double* brow = pb + p * n;
                        const double* grow = go + i * n;
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                        ga[i * k + p] += s;
                    }
            }
        }
        if (g.requires_grad(ib)) {
            double* gb = g.grad_buffer(ib).data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = pa[i * k + p];
                    if (av == 0.0) continue;
                    const double* grow = go + i * n;
                    double* gbrow = gb + p * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
        }
    });
}

Var transpose(const Var& a) {
    require_rank("transpose", a, 2);
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    Tensor out({c, r}, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.value().at(i, j);
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {ia}, [ia, r, c](Graph& g, std::size_t self) {
        if (!g.requires_grad(ia)) return;
        const Tensor& go = g.grad_buffer(self);
        Tensor& ga = g.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += go.at(j, i);
    });
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {ia}, [ia](Graph& g, std::size_t self) {
        accumulate(g, ia, g.grad_buffer(self));
    });
}

Var add_bias(const Var& x, const Var& b) {
    const std::size_t c = x.shape()[0];
    if (b.value().size() != c) throw ShapeError("add_bias: bias length must equal leading dimension", x.shape(), b.shape());
    const std::size_t inner = x.value().size() / c;
    Tensor out = x.value();
    for (std::size_t i = 0; i < c; ++i) {
        const double bv = b.value()[i];
        double* row = out.data() + i * inner;
        for (std::size_t j = 0; j < inner; ++j) row[j] += bv;
    }
    const std::size_t ix = x.id(), ib = b.id();
    return x.graph().record(std::move(out), {ix, ib}, [ix, ib, c, inner](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_buffer(self);
        accumulate(g, ix, go);
        if (g.requires_grad(ib)) {
            Tensor& gb = g.grad_buffer(ib);
            for (std::size_t i = 0; i < c; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < inner; ++j) s += go[i * inner + j];
                gb[i] += s;
            }
        }
    });
}

Var conv1d(const Var& x, const Var& w, std::size_t dilation, bool causal) {
    require_rank("conv1d input", x, 2);
    require_rank("conv1d kernel", w, 3);
    const std::size_t cin = x.shape()[0], len = x.shape()[1];
    const std::size_t cout = w.shape()[0], k = w.shape()[2];
    if (w.shape()[1] != cin) throw ShapeError("conv1d: kernel input channels differ from input channels", w.shape(), x.shape());
    if (dilation == 0) throw std::invalid_argument("conv1d: dilation must be >= 1");
    if (!causal && k % 2 == 0) throw std::invalid_argument("conv1d: centred convolution needs an odd kernel");

    std::vector<long> offsets(k);
    for (std::size_t j = 0; j < k; ++j) {
        offsets[j] = causal ? -static_cast<long>((k - 1 - j) * dilation)
                            : (static_cast<long>(j) - static_cast<long>((k - 1) / 2)) * static_cast<long>(dilation);
    }

    Tensor out({cout, len}, 0.0);
    const double* px = x.value().data();
    const double* pw = w.value().data();
    for (std::size_t co = 0; co < cout; ++co) {
        double* orow = out.data() + co * len;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xrow = px + ci * len;
            for (std::size_t j = 0; j < k; ++j) {
                const double wv = pw[(co * cin + ci) * k + j];
                const long off = offsets[j];
                const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
                const std::size_t t1 = off > 0 ? (len > static_cast<std::size_t>(off) ? len - off : 0) : len;
                for (std::size_t t = t0; t < t1; ++t) orow[t] += wv * xrow[t + off];
            }
        }
    }
    const std::size_t ix = x.id(), iw = w.id();
    return x.graph().record(std::move(out), {ix, iw}, [=](Graph& g, std::size_t self) {
        const double* go = g.grad_buffer(self).data();
        const double* px = g.value(ix).data();
        const double* pw = g.value(iw).data();
        double* gx = g.requires_grad(ix) ? g.grad_buffer(ix).data() : nullptr;
        double* gw = g.requires_grad(iw) ? g.grad_buffer(iw).data() : nullptr;
        for (std::size_t co = 0; co < cout; ++co) {
            const double* grow = go + co * len;
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* xrow = px + ci * len;
                for (std::size_t j = 0; j < k; ++j) {
                    const std::size_t widx = (co * cin + ci) * k + j;
                    const long off = offsets[j];
                    const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
                    const std::size_t t1 = off > 0 ? (len > static_cast<std::size_t>(off) ? len - off : 0) : len;
                    if (gw) {
                        double s = 0.0;
                        for (std::size_t t = t0; t < t1; ++t) s += grow[t] * xrow[t + off];
                        gw[widx] += s;
                    }
                    if (gx) {
                        const double wv = pw[widx];
                        double* gxrow = gx + ci * len;
                        for (std::size_t t = t0; t < t1; ++t) gxrow[t + off] += wv * grow[t];
                    }
                }
            }
        }
    });
}

Var conv2d(const Var& x, const Var& w, std::size_t stride, std::size_t padding) {
    require_rank("conv2d input", x, 3);
    require_rank("conv2d kernel", w, 4);
    const std::size_t cin = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
    const std::size_t cout = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    if (w.shape()[1] != cin) throw ShapeError("conv2d: kernel input channels differ from input channels", w.shape(), x.shape());
    if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (h + 2 * padding < kh || wd + 2 * padding < kw) throw ShapeError("conv2d: kernel larger than padded input", w.shape(), x.shape());
    const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
    const std::size_t ow = (wd + 2 * padding - kw) / stride + 1;

    // Valid output range along one axis for kernel tap `tap`.
    auto valid = [padding, stride](std::size_t tap, std::size_t in, std::size_t out_n, std::size_t& lo, std::size_t& hi) {
        // in_index = o * stride + tap - padding must lie in [0, in)
        lo = tap >= padding ? 0 : (padding - tap + stride - 1) / stride;
        const long top = static_cast<long>(in) - 1 + static_cast<long>(padding) - static_cast<long>(tap);
        hi = top < 0 ? 0 : std::min(out_n, static_cast<std::size_t>(top) / stride + 1);
        if (lo > hi) lo = hi;
    };

    Tensor out({cout, oh, ow}, 0.0);
    const double* px = x.value().data();
    const double* pw = w.value().data();
    for (std::size_t co = 0; co < cout; ++co) {
        double* oplane = out.data() + co * oh * ow;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xplane = px + ci * h * wd;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                std::size_t y0, y1;
                valid(ky, h, oh, y0, y1);
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    std::size_t x0, x1;
                    valid(kx, wd, ow, x0, x1);
                    const double wv = pw[((co * cin + ci) * kh + ky) * kw + kx];
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        const double* xrow = xplane + (oy * stride + ky - padding) * wd + kx - padding;
                        double* orow = oplane + oy * ow;
                        for (std::size_t ox = x0; ox < x1; ++ox) orow[ox] += wv * xrow[ox * stride];
                    }
                }
            }
        }
    }
    const std::size_t ix = x.id(), iw = w.id();
    return x.graph().record(std::move(out), {ix, iw}, [=](Graph& g, std::size_t self) {
        const double* go = g.grad_buffer(self).data();
        const double* px = g.value(ix).data();
        const double* pw = g.value(iw).data();
        double* gx = g.requires_grad(ix) ? g.grad_buffer(ix).data() : nullptr;
        double* gw = g.requires_grad(iw) ? g.grad_buffer(iw).data() : nullptr;
        for (std::size_t co = 0; co < cout; ++co) {
            const double* gplane = go + co * oh * ow;
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* xplane = px + ci * h * wd;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    std::size_t y0, y1;
                    valid(ky, h, oh, y0, y1);
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        std::size_t x0, x1;
                        valid(kx, wd, ow, x0, x1);
                        const std::size_t widx = ((co * cin + ci) * kh + ky) * kw + kx;
                        const double wv = pw[widx];
                        double s = 0.0;
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            const std::size_t base = (oy * stride + ky - padding) * wd + kx - padding;
                            const double* xrow = xplane + base;
                            const double* grow = gplane + oy * ow;
                            if (gw)
                                for (std::size_t ox = x0; ox < x1; ++ox) s += grow[ox] * xrow[ox * stride];
                            if (gx) {
                                double* gxrow = gx + ci * h * wd + base;
                                for (std::size_t ox = x0; ox < x1; ++ox) gxrow[ox * stride] += wv * grow[ox];
                            }
                        }
                        if (gw) gw[widx] += s;
                    }
                }
            }
        }
    });
}

namespace {

// Elementwise op with derivative expressed through (input, output).
template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
    Tensor out = a.value();
    for (auto& v : out.values()) v = fwd(v);
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {ia}, [ia, deriv](Graph& g, std::size_t self) {
        if (!g.requires_grad(ia)) return;
        const Tensor& go = g.grad_buffer(self);
        const Tensor& x = g.value(ia);
        const Tensor& y = g.value(self);
        Tensor& ga = g.grad_buffer(ia);
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += go[k] * deriv(x[k], y[k]);
    });
}

}  // namespace

Var relu(const Var& a) {
    return unary(a, [](double v) { return v > 0.0 ? v : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
    return unary(
        a,
        [](double v) {
            // Clamped so the output stays strictly inside (0, 1) in double precision.
            const double y = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            return std::clamp(y, std::numeric_limits<double>::min(), 1.0 - std::numeric_limits<double>::epsilon() / 2);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
    return unary(
        a, [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
        [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

Var exp(const Var& a) {
    return unary(a, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var square(const Var& a) {
    return unary(a, [](double v) { return v * v; }, [](double x, double) { return 2.0 * x; });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const std::size_t ia = a.id();
    return a.graph().record(Tensor::scalar(s), {ia}, [ia](Graph& g, std::size_t self) {
        if (!g.requires_grad(ia)) return;
        const double go = g.grad_buffer(self)[0];
        for (auto& v : g.grad_buffer(ia).values()) v += go;
    });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
    const std::size_t cols = parts[0].shape().at(1);
    std::size_t rows = 0;
    for (const auto& p : parts) {
        require_rank("concat_rows", p, 2);
        if (p.shape()[1] != cols) throw ShapeError("concat_rows: column counts differ", parts[0].shape(), p.shape());
        rows += p.shape()[0];
    }
    Tensor out({rows, cols}, 0.0);
    std::vector<std::size_t> ids;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p.value().raw().begin(), p.value().raw().end(), out.raw().begin() + static_cast<long>(offset));
        offset += p.value().size();
        ids.push_back(p.id());
    }
    Graph& g0 = parts[0].graph();
    return g0.record(std::move(out), ids, [ids](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_buffer(self);
        std::size_t off = 0;
        for (auto id : ids) {
            const std::size_t n = g.value(id).size();
            if (g.requires_grad(id)) {
                Tensor& gi = g.grad_buffer(id);
                for (std::size_t k = 0; k < n; ++k) gi[k] += go[off + k];
            }
            off += n;
        }
    });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
    const Shape& s = a.shape();
    if (begin >= end || end > s[0]) throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of bounds", s, Shape{end});
    const std::size_t inner = a.value().size() / s[0];
    Shape os = s;
    os[0] = end - begin;
    std::vector<double> data(a.value().raw().begin() + static_cast<long>(begin * inner),
                             a.value().raw().begin() + static_cast<long>(end * inner));
    const std::size_t ia = a.id();
    return a.graph().record(Tensor(std::move(os), std::move(data)), {ia}, [ia, begin, inner](Graph& g, std::size_t self) {
        if (!g.requires_grad(ia)) return;
        const Tensor& go = g.grad_buffer(self);
        Tensor& ga = g.grad_buffer(ia);
        for (std::size_t k = 0; k < go.size(); ++k) ga[begin * inner + k] += go[k];
    });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
    require_rank("slice_cols", a, 2);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (begin >= end || end > cols) throw ShapeError("slice_cols: range out of bounds", a.shape(), Shape{rows, end});
    const std::size_t w = end - begin;
    Tensor out({rows, w}, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) out.at(r, c) = a.value().at(r, begin + c);
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {ia}, [ia, rows, w, begin](Graph& g, std::size_t self) {
        if (!g.requires_grad(ia)) return;
        const Tensor& go = g.grad_buffer(self);
        Tensor& ga = g.grad_buffer(ia);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) ga.at(r, begin + c) += go.at(r, c);
    });
}

Var pairwise_sum(const Var& a, const Var& b) {
    require_rank("pairwise_sum", a, 2);
    require_same_shape("pairwise_sum", a, b);
    const std::size_t ch = a.shape()[0], n = a.shape()[1];
    Tensor out({ch, n, n}, 0.0);
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t i = 0; i < n; ++i) {
            const double ai = a.value().at(c, i);
            double* row = out.data() + (c * n + i) * n;
            for (std::size_t j = 0; j < n; ++j) row[j] = ai + b.value().at(c, j);
        }
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(std::move(out), {ia, ib}, [ia, ib, ch, n](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_buffer(self);
        Tensor* ga = g.requires_grad(ia) ? &g.grad_buffer(ia) : nullptr;
        Tensor* gb = g.requires_grad(ib) ? &g.grad_buffer(ib) : nullptr;
        for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = go.data() + (c * n + i) * n;
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    s += row[j];
                    if (gb) gb->at(c, j) += row[j];
                }
                if (ga) ga->at(c, i) += s;
            }
    });
}

namespace {

struct Tap {
    std::size_t lo, hi;
    double frac;
};

std::vector<Tap> interpolation_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double src = out > 1 ? static_cast<double>(o) * static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
        std::size_t lo = static_cast<std::size_t>(std::floor(src));
        if (lo > in - 1) lo = in - 1;
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[o] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
}

}  // namespace

Var resize_bilinear(const Var& a, std::size_t out_rows, std::size_t out_cols) {
    require_rank("resize_bilinear", a, 2);
    const std::size_t in_rows = a.shape()[0], in_cols = a.shape()[1];
    auto rt = interpolation_taps(in_rows, out_rows);
    auto ct = interpolation_taps(in_cols, out_cols);
    const Tensor& x = a.value();
    Tensor out({out_rows, out_cols}, 0.0);
    for (std::size_t r = 0; r < out_rows; ++r) {
        const auto [r0, r1, fr] = rt[r];
        for (std::size_t c = 0; c < out_cols; ++c) {
            const auto [c0, c1, fc] = ct[c];
            out.at(r, c) = (1 - fr) * ((1 - fc) * x.at(r0, c0) + fc * x.at(r0, c1)) +
                           fr * ((1 - fc) * x.at(r1, c0) + fc * x.at(r1, c1));
        }
    }
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {ia}, [ia, rt, ct](Graph& g, std::size_t self) {
        if (!g.requires_grad(ia)) return;
        const Tensor& go = g.grad_buffer(self);
        Tensor& ga = g.grad_buffer(ia);
        for (std::size_t r = 0; r < rt.size(); ++r) {
            const auto [r0, r1, fr] = rt[r];
            for (std::size_t c = 0; c < ct.size(); ++c) {
                const auto [c0, c1, fc] = ct[c];
                const double v = go.at(r, c);
                ga.at(r0, c0) += (1 - fr) * (1 - fc) * v;
                ga.at(r0, c1) += (1 - fr) * fc * v;
                ga.at(r1, c0) += fr * (1 - fc) * v;
                ga.at(r1, c1) += fr * fc * v;
            }
        }
    });
}

Var minmax_scale(const Var& a) {
    const Tensor& x = a.value();
    std::size_t imin = 0, imax = 0;
    for (std::size_t k = 1; k < x.size(); ++k) {
        if (x[k] < x[imin]) imin = k;
        if (x[k] > x[imax]) imax = k;
    }
    const double lo = x[imin];
    const double range = x[imax] - lo;
    const bool flat = !(range > 1e-12);
    Tensor out(x.shape(), 0.0);
    if (!flat)
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - lo) / range;
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {ia}, [ia, imin, imax, range, flat](Graph& g, std::size_t self) {
        if (flat || !g.requires_grad(ia)) return;
        const Tensor& go = g.grad_buffer(self);
        const Tensor& y = g.value(self);
        Tensor& ga = g.grad_buffer(ia);
        double dmin = 0.0, dmax = 0.0;
        for (std::size_t k = 0; k < go.size(); ++k) {
            ga[k] += go[k] / range;
            dmin += go[k] * (y[k] - 1.0) / range;
            dmax -= go[k] * y[k] / range;
        }
        ga[imin] += dmin;
        ga[imax] += dmax;
    });
}

Var avg_pool2d(const Var& x, std::size_t k) {
    require_rank("avg_pool2d", x, 3);
    const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (k == 0 || h % k || w % k) throw ShapeError("avg_pool2d: spatial size not divisible by pool", x.shape(), Shape{k, k});
    const std::size_t oh = h / k, ow = w / k;
    const double inv = 1.0 / static_cast<double>(k * k);
    Tensor out({c, oh, ow}, 0.0);
    const Tensor& v = x.value();
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t xx = 0; xx < w; ++xx) out[(ch * oh + y / k) * ow + xx / k] += inv * v[(ch * h + y) * w + xx];
    const std::size_t ix = x.id();
    return x.graph().record(std::move(out), {ix}, [=](Graph& g, std::size_t self) {
        if (!g.requires_grad(ix)) return;
        const Tensor& go = g.grad_buffer(self);
        Tensor& gx = g.grad_buffer(ix);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t xx = 0; xx < w; ++xx) gx[(ch * h + y) * w + xx] += inv * go[(ch * oh + y / k) * ow + xx / k];
    });
}

Var avg_pool1d(const Var& x, std::size_t k) {
    require_rank("avg_pool1d", x, 2);
    const std::size_t c = x.shape()[0], len = x.shape()[1];
    if (k == 0 || len % k) throw ShapeError("avg_pool1d: length not divisible by pool", x.shape(), Shape{k});
    const std::size_t ol = len / k;
    const double inv = 1.0 / static_cast<double>(k);
    Tensor out({c, ol}, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t t = 0; t < len; ++t) out.at(ch, t / k) += inv * x.value().at(ch, t);
    const std::size_t ix = x.id();
    return x.graph().record(std::move(out), {ix}, [=](Graph& g, std::size_t self) {
        if (!g.requires_grad(ix)) return;
        const Tensor& go = g.grad_buffer(self);
        Tensor& gx = g.grad_buffer(ix);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t t = 0; t < len; ++t) gx.at(ch, t) += inv * go.at(ch, t / k);
    });
}

Var binary_cross_entropy(const Var& probs, const Tensor& targets, double eps) {
    if (probs.value().size() != targets.size())
        throw ShapeError("binary_cross_entropy: prediction and label lengths differ", probs.shape(), targets.shape());
    const Tensor& p = probs.value();
    double loss = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double pc = std::clamp(p[k], eps, 1.0 - eps);
        loss -= targets[k] * std::log(pc) + (1.0 - targets[k]) * std::log(1.0 - pc);
    }
    const std::size_t ip = probs.id();
    return probs.graph().record(Tensor::scalar(loss), {ip}, [ip, targets, eps](Graph& g, std::size_t self) {
        if (!g.requires_grad(ip)) return;
        const double go = g.grad_buffer(self)[0];
        const Tensor& p = g.value(ip);
        Tensor& gp = g.grad_buffer(ip);
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (p[k] <= eps || p[k] >= 1.0 - eps) continue;
            gp[k] += go * (-targets[k] / p[k] + (1.0 - targets[k]) / (1.0 - p[k]));
        }
    });
}

Var mse(const Var& pred, const Tensor& target) {
    if (pred.value().size() != target.size()) throw ShapeError("mse: prediction and target sizes differ", pred.shape(), target.shape());
    Var t = pred.graph().constant(target.reshaped(pred.shape()));
    return mean(square(sub(pred, t)));
}

}  // namespace nilm::nn
