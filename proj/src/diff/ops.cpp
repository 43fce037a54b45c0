#include "lfcap/diff/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <type_traits>

namespace lfcap::diff {

namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op)
{
    if (a.shape() != b.shape())
        throw ValidationError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                              " vs " + shape_string(b.shape()));
}

template <typename T>
void accumulate(Graph<T>& g, std::size_t id, const std::vector<T>& delta, T factor = T(1))
{
    if (!g.requires_grad(id))
        return;
    auto& dst = g.grad_buffer(id).data;
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += factor * delta[i];
}

} // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b)
{
    require_same_shape(a, b, "add");
    Tensor<T> out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] += bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
        const auto& go = g.grad(self).data;
        accumulate(g, ia, go);
        accumulate(g, ib, go);
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b)
{
    require_same_shape(a, b, "sub");
    Tensor<T> out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] -= bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
        const auto& go = g.grad(self).data;
        accumulate(g, ia, go);
        accumulate(g, ib, go, T(-1));
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b)
{
    require_same_shape(a, b, "mul");
    Tensor<T> out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] *= bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
        const auto& go = g.grad(self).data;
        const auto& av = g.value(ia).data;
        const auto& bv = g.value(ib).data;
        if (g.requires_grad(ia)) {
            auto& da = g.grad_buffer(ia).data;
            for (std::size_t i = 0; i < go.size(); ++i)
                da[i] += go[i] * bv[i];
        }
        if (g.requires_grad(ib)) {
            auto& db = g.grad_buffer(ib).data;
            for (std::size_t i = 0; i < go.size(); ++i)
                db[i] += go[i] * av[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor)
{
    Tensor<T> out = a.value();
    for (T& v : out.data)
        v *= factor;
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {a}, [ia, factor](Graph<T>& g, std::size_t self) {
        accumulate(g, ia, g.grad(self).data, factor);
    });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, const Var<T>& s)
{
    if (s.value().size() != 1)
        throw ValidationError("mul_scalar: second operand must hold one element");
    const T sv = s.value().data[0];
    Tensor<T> out = a.value();
    for (T& v : out.data)
        v *= sv;
    const std::size_t ia = a.id(), is = s.id();
    return a.graph().record(std::move(out), {a, s}, [ia, is](Graph<T>& g, std::size_t self) {
        const auto& go = g.grad(self).data;
        const T sv = g.value(is).data[0];
        accumulate(g, ia, go, sv);
        if (g.requires_grad(is)) {
            const auto& av = g.value(ia).data;
            T acc = 0;
            for (std::size_t i = 0; i < go.size(); ++i)
                acc += go[i] * av[i];
            g.grad_buffer(is).data[0] += acc;
        }
    });
}

template <typename T>
Var<T> exp(const Var<T>& a)
{
    Tensor<T> out = a.value();
    for (T& v : out.data)
        v = std::exp(v);
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {a}, [ia](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(ia))
            return;
        const auto& go = g.grad(self).data;
        const auto& y = g.value(self).data;
        auto& da = g.grad_buffer(ia).data;
        for (std::size_t i = 0; i < go.size(); ++i)
            da[i] += go[i] * y[i];
    });
}

template <typename T>
Var<T> relu(const Var<T>& a)
{
    Tensor<T> out = a.value();
    for (T& v : out.data)
        v = v > T(0) ? v : T(0);
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {a}, [ia](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(ia))
            return;
        const auto& go = g.grad(self).data;
        const auto& x = g.value(ia).data;
        auto& da = g.grad_buffer(ia).data;
        for (std::size_t i = 0; i < go.size(); ++i)
            if (x[i] > T(0))
                da[i] += go[i];
    });
}

template <typename T>
Var<T> sum(const Var<T>& a)
{
    T acc = 0;
    for (T v : a.value().data)
        acc += v;
    const std::size_t ia = a.id();
    return a.graph().record(Tensor<T>::scalar(acc), {a}, [ia](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(ia))
            return;
        const T go = g.grad(self).data[0];
        for (T& d : g.grad_buffer(ia).data)
            d += go;
    });
}

template <typename T>
Var<T> dot(const Var<T>& a, const Var<T>& b)
{
    require_same_shape(a, b, "dot");
    T acc = 0;
    const auto& av = a.value().data;
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < av.size(); ++i)
        acc += av[i] * bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(Tensor<T>::scalar(acc), {a, b},
                            [ia, ib](Graph<T>& g, std::size_t self) {
                                const T go = g.grad(self).data[0];
                                accumulate(g, ia, g.value(ib).data, go);
                                accumulate(g, ib, g.value(ia).data, go);
                            });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape)
{
    if (numel(shape) != a.value().size())
        throw ValidationError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                              shape_string(shape));
    Tensor<T> out(std::move(shape), a.value().data);
    const std::size_t ia = a.id();
    return a.graph().record(std::move(out), {a}, [ia](Graph<T>& g, std::size_t self) {
        accumulate(g, ia, g.grad(self).data);
    });
}

template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Var<T>& target)
{
    require_same_shape(pred, target, "l1_loss");
    const auto& p = pred.value().data;
    const auto& t = target.value().data;
    if (p.empty())
        throw ValidationError("l1_loss on empty tensors");
    T acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        acc += std::abs(p[i] - t[i]);
    const T n = static_cast<T>(p.size());
    const std::size_t ip = pred.id(), it = target.id();
    return pred.graph().record(
        Tensor<T>::scalar(acc / n), {pred, target}, [ip, it, n](Graph<T>& g, std::size_t self) {
            const T go = g.grad(self).data[0] / n;
            const auto& p = g.value(ip).data;
            const auto& t = g.value(it).data;
            std::vector<T> s(p.size());
            for (std::size_t i = 0; i < p.size(); ++i)
                s[i] = p[i] > t[i] ? T(1) : (p[i] < t[i] ? T(-1) : T(0));
            accumulate(g, ip, s, go);
            accumulate(g, it, s, -go);
        });
}

namespace {

struct LfDims {
    std::size_t B, C, M, N, H, W;
    std::size_t slabs() const { return B * C; }
    std::size_t pixels() const { return H * W; }
};

template <typename T>
LfDims lf_dims(const Var<T>& x, const char* op)
{
    const auto& s = x.shape();
    if (s.size() != 6)
        throw ValidationError(std::string(op) + ": expected (B, C, M, N, H, W), got " +
                              shape_string(s));
    return {s[0], s[1], s[2], s[3], s[4], s[5]};
}

template <typename T>
std::size_t kernel_channels(const Var<T>& kernel, std::size_t C, const char* op)
{
    const auto& ks = kernel.shape();
    if (ks.size() != 3)
        throw ValidationError(std::string(op) + ": kernel must be (K, ku, kv), got " +
                              shape_string(ks));
    if (ks[0] != 1 && ks[0] != C)
        throw ValidationError(std::string(op) + ": kernel has " + std::to_string(ks[0]) +
                              " channels, data has " + std::to_string(C));
    return ks[0];
}

} // namespace

template <typename T>
Var<T> project(const Var<T>& x, const Var<T>& kernel)
{
    const LfDims d = lf_dims(x, "project");
    const std::size_t kc = kernel_channels(kernel, d.C, "project");
    const AngularGeometry geo(d.M, d.N, kernel.shape()[1], kernel.shape()[2]);
    Tensor<T> out(Shape{d.B, d.C, geo.count(), d.H, d.W});
    kernels::project<T>(x.value().data, kernel.value().data, geo, d.slabs(), kc, d.pixels(),
                        out.data);
    const std::size_t ix = x.id(), ik = kernel.id();
    return x.graph().record(std::move(out), {x, kernel},
                            [ix, ik, geo, d, kc](Graph<T>& g, std::size_t self) {
                                const auto& go = g.grad(self).data;
                                if (g.requires_grad(ix)) {
                                    std::vector<T> tmp(g.value(ix).size());
                                    kernels::backproject<T>(go, g.value(ik).data, geo, d.slabs(),
                                                            kc, d.pixels(), tmp);
                                    accumulate(g, ix, tmp);
                                }
                                if (g.requires_grad(ik))
                                    kernels::project_kernel_grad<T>(
                                        g.value(ix).data, go, geo, d.slabs(), kc, d.pixels(),
                                        g.grad_buffer(ik).data);
                            });
}

template <typename T>
Var<T> backproject(const Var<T>& meas, const Var<T>& kernel, std::size_t M, std::size_t N)
{
    const auto& ms = meas.shape();
    if (ms.size() != 5)
        throw ValidationError("backproject: expected (B, C, k, H, W), got " + shape_string(ms));
    const LfDims d{ms[0], ms[1], M, N, ms[3], ms[4]};
    const std::size_t kc = kernel_channels(kernel, d.C, "backproject");
    const AngularGeometry geo(M, N, kernel.shape()[1], kernel.shape()[2]);
    if (geo.count() != ms[2])
        throw ValidationError("backproject: " + std::to_string(ms[2]) +
                              " measurements, kernel geometry yields " +
                              std::to_string(geo.count()));
    Tensor<T> out(Shape{d.B, d.C, M, N, d.H, d.W});
    kernels::backproject<T>(meas.value().data, kernel.value().data, geo, d.slabs(), kc,
                            d.pixels(), out.data);
    const std::size_t im = meas.id(), ik = kernel.id();
    return meas.graph().record(std::move(out), {meas, kernel},
                               [im, ik, geo, d, kc](Graph<T>& g, std::size_t self) {
                                   const auto& go = g.grad(self).data;
                                   if (g.requires_grad(im)) {
                                       std::vector<T> tmp(g.value(im).size());
                                       kernels::project<T>(go, g.value(ik).data, geo, d.slabs(),
                                                           kc, d.pixels(), tmp);
                                       accumulate(g, im, tmp);
                                   }
                                   if (g.requires_grad(ik))
                                       kernels::project_kernel_grad<T>(
                                           go, g.value(im).data, geo, d.slabs(), kc, d.pixels(),
                                           g.grad_buffer(ik).data);
                               });
}

namespace {

// Contiguous run of positions inside one view: pixels [q0, q1) of view `view`.
struct Segment {
    std::size_t view;
    std::size_t q0;
    std::size_t q1;
};

// Tiles cover consecutive positions of the flattened (view, pixel) axis, either as
// several whole views or as a band of whole rows inside one view.
struct Tile {
    std::size_t offset;
    std::size_t length;
    std::vector<Segment> segments;
};

constexpr std::size_t kTargetTile = 2048;

std::vector<Tile> plan_tiles(std::size_t views, std::size_t H, std::size_t W)
{
    const std::size_t P = H * W;
    std::vector<Tile> tiles;
    if (P >= kTargetTile) {
        const std::size_t rows = std::max<std::size_t>(1, kTargetTile / W);
        for (std::size_t v = 0; v < views; ++v)
            for (std::size_t x0 = 0; x0 < H; x0 += rows) {
                const std::size_t x1 = std::min(H, x0 + rows);
                tiles.push_back({v * P + x0 * W, (x1 - x0) * W, {{v, x0 * W, x1 * W}}});
            }
    } else {
        const std::size_t per_tile = std::max<std::size_t>(1, kTargetTile / P);
        for (std::size_t v0 = 0; v0 < views; v0 += per_tile) {
            Tile t{v0 * P, 0, {}};
            for (std::size_t v = v0; v < std::min(views, v0 + per_tile); ++v) {
                t.segments.push_back({v, 0, P});
                t.length += P;
            }
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

struct ConvDims {
    std::size_t cin, cout, K, M, N, H, W;
    Plane plane;
    std::size_t views() const { return M * N; }
    std::size_t pixels() const { return H * W; }
    std::size_t plane_size() const { return views() * pixels(); }
    std::size_t rows() const { return cin * K * K; }
};

// Moves data between a (cin, views, pixels) tensor and a (rows, tile) column matrix.
// With Scatter = false this is im2col (cols = gather(x)); with Scatter = true it is
// col2im (x += scatter(cols)).
template <bool Scatter, typename T>
void im2col(const ConvDims& d, const Tile& tile, std::conditional_t<Scatter, T*, const T*> x,
            std::conditional_t<Scatter, const T*, T*> cols)
{
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(d.K / 2);
    const std::size_t S = d.plane_size(), P = d.pixels(), L = tile.length;
    for (std::size_t ci = 0; ci < d.cin; ++ci)
        for (std::size_t ka = 0; ka < d.K; ++ka)
            for (std::size_t kb = 0; kb < d.K; ++kb) {
                const std::size_t row = (ci * d.K + ka) * d.K + kb;
                auto* col = cols + row * L;
                const std::ptrdiff_t da = static_cast<std::ptrdiff_t>(ka) - half;
                const std::ptrdiff_t db = static_cast<std::ptrdiff_t>(kb) - half;
                std::size_t off = 0;
                for (const Segment& seg : tile.segments) {
                    const std::size_t len = seg.q1 - seg.q0;
                    if (d.plane == Plane::angular) {
                        const auto su = static_cast<std::ptrdiff_t>(seg.view / d.N) + da;
                        const auto sv = static_cast<std::ptrdiff_t>(seg.view % d.N) + db;
                        const bool inside = su >= 0 && sv >= 0 &&
                                            su < static_cast<std::ptrdiff_t>(d.M) &&
                                            sv < static_cast<std::ptrdiff_t>(d.N);
                        if (inside) {
                            auto* src = x + ci * S +
                                        (static_cast<std::size_t>(su) * d.N +
                                         static_cast<std::size_t>(sv)) * P + seg.q0;
                            if constexpr (Scatter) {
                                for (std::size_t i = 0; i < len; ++i)
                                    src[i] += col[off + i];
                            } else {
                                std::memcpy(col + off, src, len * sizeof(T));
                            }
                        } else if constexpr (!Scatter) {
                            std::fill(col + off, col + off + len, T(0));
                        }
                    } else {
                        const auto* plane_base = x + ci * S + seg.view * P;
                        const std::size_t y0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -db));
                        const std::size_t y1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                            static_cast<std::ptrdiff_t>(d.W), static_cast<std::ptrdiff_t>(d.W) - db));
                        for (std::size_t xr = seg.q0 / d.W; xr < seg.q1 / d.W; ++xr) {
                            auto* dst = col + off + (xr - seg.q0 / d.W) * d.W;
                            const auto sx = static_cast<std::ptrdiff_t>(xr) + da;
                            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(d.H)) {
                                if constexpr (!Scatter)
                                    std::fill(dst, dst + d.W, T(0));
                                continue;
                            }
                            auto* src_row = const_cast<T*>(plane_base) +
                                            static_cast<std::size_t>(sx) * d.W;
                            if constexpr (Scatter) {
                                for (std::size_t y = y0; y < y1; ++y)
                                    src_row[y + db] += dst[y];
                            } else {
                                std::fill(dst, dst + y0, T(0));
                                std::memcpy(dst + y0, src_row + y0 + db, (y1 - y0) * sizeof(T));
                                std::fill(dst + y1, dst + d.W, T(0));
                            }
                        }
                    }
                    off += len;
                }
            }
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Eigen picks its vector/scalar split from pointer alignment, so every operand and
// destination lives in aligned scratch to keep results independent of allocation.
template <typename T>
using Scratch = std::vector<T, Eigen::aligned_allocator<T>>;

} // namespace

template <typename T>
Var<T> conv_plane(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, Plane plane,
                  bool relu_after)
{
    const LfDims xd = lf_dims(x, "conv_plane");
    const auto& ws = weight.shape();
    if (ws.size() != 4 || ws[2] != ws[3] || ws[2] % 2 == 0)
        throw ValidationError("conv_plane: weight must be (Cout, Cin, K, K) with odd K, got " +
                              shape_string(ws));
    if (ws[1] != xd.C)
        throw ValidationError("conv_plane: channel mismatch, weight expects " +
                              std::to_string(ws[1]) + " input channels, data has " +
                              std::to_string(xd.C));
    if (bias.shape() != Shape{ws[0]})
        throw ValidationError("conv_plane: bias must be (Cout)");

    const ConvDims d{xd.C, ws[0], ws[2], xd.M, xd.N, xd.H, xd.W, plane};
    const std::size_t S = d.plane_size();
    const auto tiles = plan_tiles(d.views(), d.H, d.W);
    std::size_t max_len = 0;
    for (const auto& t : tiles)
        max_len = std::max(max_len, t.length);

    Tensor<T> out(Shape{xd.B, d.cout, d.M, d.N, d.H, d.W});
    {
        Scratch<T> cols(d.rows() * max_len), prod(d.cout * max_len);
        const Scratch<T> wbuf(weight.value().data.begin(), weight.value().data.end());
        const Eigen::Map<const RowMat<T>> wm(wbuf.data(), d.cout, d.rows());
        const auto& bv = bias.value().data;
        for (std::size_t b = 0; b < xd.B; ++b) {
            const T* xb = x.value().data.data() + b * d.cin * S;
            T* ob = out.data.data() + b * d.cout * S;
            for (const auto& tile : tiles) {
                im2col<false, T>(d, tile, xb, cols.data());
                const Eigen::Map<const RowMat<T>> cm(cols.data(), d.rows(), tile.length);
                Eigen::Map<RowMat<T>> y(prod.data(), d.cout, tile.length);
                y.noalias() = wm * cm;
                for (std::size_t co = 0; co < d.cout; ++co) {
                    T* row = ob + co * S + tile.offset;
                    const T* src = prod.data() + co * tile.length;
                    for (std::size_t i = 0; i < tile.length; ++i) {
                        const T v = src[i] + bv[co];
                        row[i] = relu_after && v < T(0) ? T(0) : v;
                    }
                }
            }
        }
    }

    const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
    const std::size_t batch = xd.B;
    return x.graph().record(
        std::move(out), {x, weight, bias},
        [ix, iw, ib, d, tiles, max_len, batch, relu_after](Graph<T>& g, std::size_t self) {
            const std::size_t S = d.plane_size();
            const bool need_x = g.requires_grad(ix);
            const bool need_w = g.requires_grad(iw);
            const bool need_b = g.requires_grad(ib);
            const auto& go = g.grad(self).data;
            const auto& y = g.value(self).data;
            Scratch<T> cols(d.rows() * max_len), gm(d.cout * max_len);
            Scratch<T> dwbuf(need_w ? d.cout * d.rows() : 0);
            T* dx = need_x ? g.grad_buffer(ix).data.data() : nullptr;
            T* dw = need_w ? g.grad_buffer(iw).data.data() : nullptr;
            T* db = need_b ? g.grad_buffer(ib).data.data() : nullptr;
            const Scratch<T> wbuf(g.value(iw).data.begin(), g.value(iw).data.end());
            const Eigen::Map<const RowMat<T>> wm(wbuf.data(), d.cout, d.rows());
            for (std::size_t b = 0; b < batch; ++b) {
                const T* xb = g.value(ix).data.data() + b * d.cin * S;
                const std::size_t obase = b * d.cout * S;
                for (const auto& tile : tiles) {
                    const std::size_t L = tile.length;
                    for (std::size_t co = 0; co < d.cout; ++co) {
                        const T* grow = go.data() + obase + co * S + tile.offset;
                        const T* yrow = y.data() + obase + co * S + tile.offset;
                        T* dst = gm.data() + co * L;
                        for (std::size_t i = 0; i < L; ++i)
                            dst[i] = relu_after && !(yrow[i] > T(0)) ? T(0) : grow[i];
                    }
                    const Eigen::Map<const RowMat<T>> gmat(gm.data(), d.cout, L);
                    if (need_b)
                        for (std::size_t co = 0; co < d.cout; ++co) {
                            T acc = T(0);
                            for (std::size_t i = 0; i < L; ++i)
                                acc += gm[co * L + i];
                            db[co] += acc;
                        }
                    if (need_w) {
                        im2col<false, T>(d, tile, xb, cols.data());
                        const Eigen::Map<const RowMat<T>> cm(cols.data(), d.rows(), L);
                        Eigen::Map<RowMat<T>> dwm(dwbuf.data(), d.cout, d.rows());
                        dwm.noalias() = gmat * cm.transpose();
                        for (std::size_t i = 0; i < dwbuf.size(); ++i)
                            dw[i] += dwbuf[i];
                    }
                    if (need_x) {
                        Eigen::Map<RowMat<T>> cm(cols.data(), d.rows(), L);
                        cm.noalias() = wm.transpose() * gmat;
                        im2col<true, T>(d, tile, dx + b * d.cin * S, cols.data());
                    }
                }
            }
        });
}

#define LFCAP_INSTANTIATE_OPS(T)                                                                \
    template Var<T> add<T>(const Var<T>&, const Var<T>&);                                       \
    template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                       \
    template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                       \
    template Var<T> scale<T>(const Var<T>&, T);                                                 \
    template Var<T> mul_scalar<T>(const Var<T>&, const Var<T>&);                                \
    template Var<T> exp<T>(const Var<T>&);                                                      \
    template Var<T> relu<T>(const Var<T>&);                                                     \
    template Var<T> sum<T>(const Var<T>&);                                                      \
    template Var<T> dot<T>(const Var<T>&, const Var<T>&);                                       \
    template Var<T> reshape<T>(const Var<T>&, Shape);                                           \
    template Var<T> l1_loss<T>(const Var<T>&, const Var<T>&);                                   \
    template Var<T> project<T>(const Var<T>&, const Var<T>&);                                   \
    template Var<T> backproject<T>(const Var<T>&, const Var<T>&, std::size_t, std::size_t);     \
    template Var<T> conv_plane<T>(const Var<T>&, const Var<T>&, const Var<T>&, Plane, bool);

LFCAP_INSTANTIATE_OPS(float)
LFCAP_INSTANTIATE_OPS(double)
#undef LFCAP_INSTANTIATE_OPS

} // namespace lfcap::diff
