#ifndef GCPA_CORE_OPS_HPP
#define GCPA_CORE_OPS_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "gcpa/core/autograd.hpp"
#include "gcpa/core/kernels.hpp"
#include "gcpa/core/tensor.hpp"

namespace gcpa {

namespace detail {

// Unpacks x[n] (one [C,H,W] image) into col[C*kh*kw, Hout*Wout] with zero
// padding, the standard im2col layout for conv-as-gemm.
template <typename T>
void im2col(const T* img, long C, long H, long W, long kh, long kw, long stride, long pad,
            long Hout, long Wout, T* col) {
    for (long c = 0; c < C; ++c) {
        const T* plane = img + c * H * W;
        for (long ki = 0; ki < kh; ++ki) {
            for (long kj = 0; kj < kw; ++kj) {
                T* dst = col + ((c * kh + ki) * kw + kj) * Hout * Wout;
                for (long oy = 0; oy < Hout; ++oy) {
                    long iy = oy * stride - pad + ki;
                    T* row = dst + oy * Wout;
                    if (iy < 0 || iy >= H) {
                        std::fill(row, row + Wout, T(0));
                        continue;
                    }
                    const T* src = plane + iy * W;
                    for (long ox = 0; ox < Wout; ++ox) {
                        long ix = ox * stride - pad + kj;
                        row[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-adds a col gradient back into the image gradient (im2col adjoint).
template <typename T>
void col2im(const T* col, long C, long H, long W, long kh, long kw, long stride, long pad,
            long Hout, long Wout, T* img) {
    for (long c = 0; c < C; ++c) {
        T* plane = img + c * H * W;
        for (long ki = 0; ki < kh; ++ki) {
            for (long kj = 0; kj < kw; ++kj) {
                const T* src = col + ((c * kh + ki) * kw + kj) * Hout * Wout;
                for (long oy = 0; oy < Hout; ++oy) {
                    long iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= H) continue;
                    T* row = plane + iy * W;
                    const T* srow = src + oy * Wout;
                    for (long ox = 0; ox < Wout; ++ox) {
                        long ix = ox * stride - pad + kj;
                        if (ix >= 0 && ix < W) row[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

// Sampling tables for bilinear interpolation with half-pixel centers
// (align_corners=false). A size-1 axis degenerates to replication because
// both taps clamp to index 0.
struct LerpAxis {
    std::vector<long> i0, i1;
    std::vector<double> w1;  // weight of i1; i0 gets 1-w1
};

inline LerpAxis lerp_axis(long in, long out) {
    LerpAxis ax;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.w1.resize(out);
    double scale = double(in) / double(out);
    for (long o = 0; o < out; ++o) {
        double s = (double(o) + 0.5) * scale - 0.5;
        if (s < 0) s = 0;
        long lo = static_cast<long>(s);
        if (lo > in - 1) lo = in - 1;
        long hi = std::min(lo + 1, in - 1);
        ax.i0[o] = lo;
        ax.i1[o] = hi;
        ax.w1[o] = (hi > lo) ? s - double(lo) : 0.0;
    }
    return ax;
}

}  // namespace detail

// ----------------------------------------------------------------- pointwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shapes differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    kern::add(a.value().data(), b.value().data(), out.data(), out.numel());
    return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>* self) {
        return [self, an = a.node(), bn = b.node()] {
            long n = self->grad.numel();
            if (an->requires_grad) {
                an->ensure_grad();
                kern::axpy(T(1), self->grad.data(), an->grad.data(), n);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kern::axpy(T(1), self->grad.data(), bn->grad.data(), n);
            }
        };
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul: shapes differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    kern::mul(a.value().data(), b.value().data(), out.data(), out.numel());
    return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>* self) {
        return [self, an = a.node(), bn = b.node()] {
            long n = self->grad.numel();
            if (an->requires_grad) {
                an->ensure_grad();
                kern::mul_acc(self->grad.data(), bn->value.data(), an->grad.data(), n);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kern::mul_acc(self->grad.data(), an->value.data(), bn->grad.data(), n);
            }
        };
    });
}

template <typename T>
Var<T> scale(const Var<T>& x, T alpha) {
    Tensor<T> out = x.value();
    kern::scale(alpha, out.data(), out.numel());
    return make_op<T>(std::move(out), {x}, [x, alpha](Node<T>* self) {
        return [self, xn = x.node(), alpha] {
            xn->ensure_grad();
            kern::axpy(alpha, self->grad.data(), xn->grad.data(), self->grad.numel());
        };
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> out(x.shape());
    kern::relu(x.value().data(), out.data(), out.numel());
    return make_op<T>(std::move(out), {x}, [x](Node<T>* self) {
        return [self, xn = x.node()] {
            xn->ensure_grad();
            kern::relu_bwd(xn->value.data(), self->grad.data(), xn->grad.data(), self->grad.numel());
        };
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    Tensor<T> out(x.shape());
    const T* in = x.value().data();
    T* o = out.data();
    for (long i = 0; i < out.numel(); ++i) o[i] = T(1) / (T(1) + std::exp(-in[i]));
    return make_op<T>(std::move(out), {x}, [x](Node<T>* self) {
        return [self, xn = x.node()] {
            xn->ensure_grad();
            const T* y = self->value.data();
            const T* dy = self->grad.data();
            T* dx = xn->grad.data();
            for (long i = 0; i < self->grad.numel(); ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
        };
    });
}

// Full reduction to a [1] scalar.
template <typename T>
Var<T> sum(const Var<T>& x) {
    Tensor<T> out({1});
    out[0] = kern::reduce_sum(x.value().data(), x.value().numel());
    return make_op<T>(std::move(out), {x}, [x](Node<T>* self) {
        return [self, xn = x.node()] {
            xn->ensure_grad();
            T g = self->grad[0];
            T* dx = xn->grad.data();
            for (long i = 0; i < xn->grad.numel(); ++i) dx[i] += g;
        };
    });
}

// -------------------------------------------------------------- convolution

// x [N,Cin,H,W] * w [Cout,Cin,kh,kw] (+ b [Cout], optional) -> [N,Cout,Ho,Wo].
// Square stride/pad only, which covers every conv in this network.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, long stride = 1, long pad = 0) {
    require_rank(x.value(), 4, "conv2d input");
    require_rank(w.value(), 4, "conv2d weight");
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    long N = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    long Cout = ws[0], kh = ws[2], kw = ws[3];
    if (ws[1] != Cin)
        throw ShapeError("conv2d: weight expects " + std::to_string(ws[1]) + " input channels, input " +
                         shape_str(xs) + " has " + std::to_string(Cin));
    if (b.defined() && (b.value().rank() != 1 || b.value().dim(0) != Cout))
        throw ShapeError("conv2d: bias shape " + shape_str(b.shape()) + ", expected [" +
                         std::to_string(Cout) + "]");
    long Ho = (H + 2 * pad - kh) / stride + 1;
    long Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho < 1 || Wo < 1)
        throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " does not fit input " + shape_str(xs));
    long HWo = Ho * Wo, CKK = Cin * kh * kw;
    bool direct = (kh == 1 && kw == 1 && stride == 1 && pad == 0);

    Tensor<T> out({N, Cout, Ho, Wo});
    {
        Tensor<T> col;
        if (!direct) col = Tensor<T>({CKK, HWo});
        for (long n = 0; n < N; ++n) {
            const T* xn = x.value().data() + n * Cin * H * W;
            T* yn = out.data() + n * Cout * HWo;
            if (direct) {
                kern::gemm(w.value().data(), xn, yn, Cout, HWo, Cin, false);
            } else {
                detail::im2col(xn, Cin, H, W, kh, kw, stride, pad, Ho, Wo, col.data());
                kern::gemm(w.value().data(), col.data(), yn, Cout, HWo, CKK, false);
            }
            if (b.defined())
                for (long c = 0; c < Cout; ++c) kern::add_const(b.value()[c], yn + c * HWo, HWo);
        }
    }

    return make_op<T>(std::move(out), {x, w, b}, [=](Node<T>* self) {
        auto xn = x.node();
        auto wn = w.node();
        auto bn = b.defined() ? b.node() : nullptr;
        return [=] {
            Tensor<T> col, dcol;
            if (!direct && wn->requires_grad) col = Tensor<T>({CKK, HWo});
            if (!direct && xn->requires_grad) dcol = Tensor<T>({CKK, HWo});
            if (xn->requires_grad) xn->ensure_grad();
            if (wn->requires_grad) wn->ensure_grad();
            if (bn && bn->requires_grad) bn->ensure_grad();
            for (long n = 0; n < N; ++n) {
                const T* dyn = self->grad.data() + n * Cout * HWo;
                const T* xv = xn->value.data() + n * Cin * H * W;
                if (wn->requires_grad) {
                    if (direct) {
                        kern::gemm_nt(dyn, xv, wn->grad.data(), Cout, Cin, HWo, true);
                    } else {
                        detail::im2col(xv, Cin, H, W, kh, kw, stride, pad, Ho, Wo, col.data());
                        kern::gemm_nt(dyn, col.data(), wn->grad.data(), Cout, CKK, HWo, true);
                    }
                }
                if (xn->requires_grad) {
                    T* dxn = xn->grad.data() + n * Cin * H * W;
                    if (direct) {
                        kern::gemm_tn(wn->value.data(), dyn, dxn, Cin, HWo, Cout, true);
                    } else {
                        kern::gemm_tn(wn->value.data(), dyn, dcol.data(), CKK, HWo, Cout, false);
                        detail::col2im(dcol.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo, dxn);
                    }
                }
                if (bn && bn->requires_grad)
                    for (long c = 0; c < Cout; ++c)
                        bn->grad[c] += kern::reduce_sum(dyn + c * HWo, HWo);
            }
        };
    });
}

// ---------------------------------------------------------------- batchnorm

// Per-channel batch normalization matching the usual framework semantics:
// training normalizes with biased batch variance and updates running stats
// with the unbiased one; eval normalizes with the running stats.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                  T momentum = T(0.1), T eps = T(1e-5)) {
    require_rank(x.value(), 4, "batch_norm input");
    long N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    long HW = H * W, cnt = N * HW;
    if (gamma.value().numel() != C || beta.value().numel() != C ||
        running_mean.numel() != C || running_var.numel() != C)
        throw ShapeError("batch_norm: parameter length mismatch for C=" + std::to_string(C));

    Tensor<T> mean({C}), invstd({C});
    if (training) {
        for (long c = 0; c < C; ++c) {
            double s = 0;
            for (long n = 0; n < N; ++n)
                s += double(kern::reduce_sum(x.value().data() + (n * C + c) * HW, HW));
            double mu = s / double(cnt);
            double vs = 0;
            for (long n = 0; n < N; ++n) {
                const T* p = x.value().data() + (n * C + c) * HW;
                for (long i = 0; i < HW; ++i) {
                    double d = double(p[i]) - mu;
                    vs += d * d;
                }
            }
            double varb = vs / double(cnt);
            mean[c] = T(mu);
            invstd[c] = T(1.0 / std::sqrt(varb + double(eps)));
            double varu = cnt > 1 ? vs / double(cnt - 1) : varb;
            running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * T(mu);
            running_var[c] = (T(1) - momentum) * running_var[c] + momentum * T(varu);
        }
    } else {
        for (long c = 0; c < C; ++c) {
            mean[c] = running_mean[c];
            invstd[c] = T(1) / std::sqrt(running_var[c] + eps);
        }
    }

    Tensor<T> xhat(x.shape()), out(x.shape());
    for (long n = 0; n < N; ++n)
        for (long c = 0; c < C; ++c) {
            const T* p = x.value().data() + (n * C + c) * HW;
            T* xh = xhat.data() + (n * C + c) * HW;
            T* o = out.data() + (n * C + c) * HW;
            T mu = mean[c], is = invstd[c], g = gamma.value()[c], bb = beta.value()[c];
            for (long i = 0; i < HW; ++i) {
                xh[i] = (p[i] - mu) * is;
                o[i] = g * xh[i] + bb;
            }
        }

    return make_op<T>(std::move(out), {x, gamma, beta},
                      [x, gamma, beta, xhat = std::move(xhat), invstd = std::move(invstd), training,
                       N, C, HW, cnt](Node<T>* self) mutable {
        auto xn = x.node();
        auto gn = gamma.node();
        auto bn = beta.node();
        return [self, xn, gn, bn, xhat = std::move(xhat), invstd = std::move(invstd), training, N, C,
                HW, cnt] {
            // per-channel sums of dy and dy*xhat feed all three gradients
            std::vector<double> sum_dy(C, 0), sum_dyx(C, 0);
            for (long n = 0; n < N; ++n)
                for (long c = 0; c < C; ++c) {
                    const T* dy = self->grad.data() + (n * C + c) * HW;
                    const T* xh = xhat.data() + (n * C + c) * HW;
                    double a = 0, b2 = 0;
                    for (long i = 0; i < HW; ++i) {
                        a += double(dy[i]);
                        b2 += double(dy[i]) * double(xh[i]);
                    }
                    sum_dy[c] += a;
                    sum_dyx[c] += b2;
                }
            if (gn->requires_grad) {
                gn->ensure_grad();
                for (long c = 0; c < C; ++c) gn->grad[c] += T(sum_dyx[c]);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (long c = 0; c < C; ++c) bn->grad[c] += T(sum_dy[c]);
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (long n = 0; n < N; ++n)
                    for (long c = 0; c < C; ++c) {
                        const T* dy = self->grad.data() + (n * C + c) * HW;
                        const T* xh = xhat.data() + (n * C + c) * HW;
                        T* dx = xn->grad.data() + (n * C + c) * HW;
                        T gis = gn->value[c] * invstd[c];
                        if (training) {
                            T mdy = T(sum_dy[c] / double(cnt));
                            T mdyx = T(sum_dyx[c] / double(cnt));
                            for (long i = 0; i < HW; ++i)
                                dx[i] += gis * (dy[i] - mdy - xh[i] * mdyx);
                        } else {
                            for (long i = 0; i < HW; ++i) dx[i] += gis * dy[i];
                        }
                    }
            }
        };
    });
}

// ------------------------------------------------------- shape manipulation

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: no inputs");
    long N = xs[0].shape()[0], H = xs[0].shape()[2], W = xs[0].shape()[3];
    long Ctot = 0;
    for (const auto& v : xs) {
        require_rank(v.value(), 4, "concat_channels input");
        if (v.shape()[0] != N || v.shape()[2] != H || v.shape()[3] != W)
            throw ShapeError("concat_channels: input " + shape_str(v.shape()) +
                             " does not match " + shape_str(xs[0].shape()));
        Ctot += v.shape()[1];
    }
    long HW = H * W;
    Tensor<T> out({N, Ctot, H, W});
    for (long n = 0; n < N; ++n) {
        long coff = 0;
        for (const auto& v : xs) {
            long c = v.shape()[1];
            std::copy_n(v.value().data() + n * c * HW, c * HW,
                        out.data() + (n * Ctot + coff) * HW);
            coff += c;
        }
    }
    return make_op<T>(std::move(out), xs, [xs, N, Ctot, HW](Node<T>* self) {
        return [=] {
            for (long n = 0; n < N; ++n) {
                long coff = 0;
                for (const auto& v : xs) {
                    long c = v.shape()[1];
                    auto pn = v.node();
                    if (pn->requires_grad) {
                        pn->ensure_grad();
                        kern::axpy(T(1), self->grad.data() + (n * Ctot + coff) * HW,
                                   pn->grad.data() + n * c * HW, c * HW);
                    }
                    coff += c;
                }
            }
        };
    });
}

// Bilinear resize with half-pixel sampling (align_corners=false).
template <typename T>
Var<T> resize_bilinear(const Var<T>& x, long oh, long ow) {
    require_rank(x.value(), 4, "resize_bilinear input");
    long N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    if (oh < 1 || ow < 1) throw ShapeError("resize_bilinear: bad target size");
    if (oh == H && ow == W) return x;  // no-op; keeps graphs small
    auto ay = detail::lerp_axis(H, oh);
    auto ax = detail::lerp_axis(W, ow);
    Tensor<T> out({N, C, oh, ow});
    for (long nc = 0; nc < N * C; ++nc) {
        const T* src = x.value().data() + nc * H * W;
        T* dst = out.data() + nc * oh * ow;
        for (long oy = 0; oy < oh; ++oy) {
            const T* r0 = src + ay.i0[oy] * W;
            const T* r1 = src + ay.i1[oy] * W;
            double wy = ay.w1[oy];
            T* drow = dst + oy * ow;
            for (long ox = 0; ox < ow; ++ox) {
                double wx = ax.w1[ox];
                double top = (1 - wx) * double(r0[ax.i0[ox]]) + wx * double(r0[ax.i1[ox]]);
                double bot = (1 - wx) * double(r1[ax.i0[ox]]) + wx * double(r1[ax.i1[ox]]);
                drow[ox] = T((1 - wy) * top + wy * bot);
            }
        }
    }
    return make_op<T>(std::move(out), {x},
                      [x, ay = std::move(ay), ax = std::move(ax), N, C, H, W, oh, ow](Node<T>* self) mutable {
        auto xn = x.node();
        return [self, xn, ay = std::move(ay), ax = std::move(ax), N, C, H, W, oh, ow] {
            xn->ensure_grad();
            for (long nc = 0; nc < N * C; ++nc) {
                T* dx = xn->grad.data() + nc * H * W;
                const T* dy = self->grad.data() + nc * oh * ow;
                for (long oy = 0; oy < oh; ++oy) {
                    double wy = ay.w1[oy];
                    long y0 = ay.i0[oy] * W, y1 = ay.i1[oy] * W;
                    const T* drow = dy + oy * ow;
                    for (long ox = 0; ox < ow; ++ox) {
                        double wx = ax.w1[ox];
                        double g = double(drow[ox]);
                        dx[y0 + ax.i0[ox]] += T((1 - wy) * (1 - wx) * g);
                        dx[y0 + ax.i1[ox]] += T((1 - wy) * wx * g);
                        dx[y1 + ax.i0[ox]] += T(wy * (1 - wx) * g);
                        dx[y1 + ax.i1[ox]] += T(wy * wx * g);
                    }
                }
            }
        };
    });
}

// --------------------------------------------------------------- pooling/fc

template <typename T>
Var<T> maxpool2d(const Var<T>& x, long ksize, long stride, long pad) {
    require_rank(x.value(), 4, "maxpool2d input");
    long N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    long Ho = (H + 2 * pad - ksize) / stride + 1;
    long Wo = (W + 2 * pad - ksize) / stride + 1;
    if (Ho < 1 || Wo < 1) throw ShapeError("maxpool2d: window does not fit " + shape_str(x.shape()));
    Tensor<T> out({N, C, Ho, Wo});
    std::vector<long> argmax(N * C * Ho * Wo);
    for (long nc = 0; nc < N * C; ++nc) {
        const T* src = x.value().data() + nc * H * W;
        T* dst = out.data() + nc * Ho * Wo;
        long* am = argmax.data() + nc * Ho * Wo;
        for (long oy = 0; oy < Ho; ++oy)
            for (long ox = 0; ox < Wo; ++ox) {
                T best = T(0);
                long bi = -1;
                for (long ki = 0; ki < ksize; ++ki) {
                    long iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= H) continue;
                    for (long kj = 0; kj < ksize; ++kj) {
                        long ix = ox * stride - pad + kj;
                        if (ix < 0 || ix >= W) continue;
                        T v = src[iy * W + ix];
                        if (bi < 0 || v > best) {
                            best = v;
                            bi = iy * W + ix;
                        }
                    }
                }
                dst[oy * Wo + ox] = best;
                am[oy * Wo + ox] = bi;
            }
    }
    return make_op<T>(std::move(out), {x}, [x, argmax = std::move(argmax), N, C, H, W, Ho, Wo](Node<T>* self) mutable {
        auto xn = x.node();
        return [self, xn, argmax = std::move(argmax), N, C, H, W, Ho, Wo] {
            xn->ensure_grad();
            for (long nc = 0; nc < N * C; ++nc) {
                T* dx = xn->grad.data() + nc * H * W;
                const T* dy = self->grad.data() + nc * Ho * Wo;
                const long* am = argmax.data() + nc * Ho * Wo;
                for (long i = 0; i < Ho * Wo; ++i)
                    if (am[i] >= 0) dx[am[i]] += dy[i];
            }
        };
    });
}

// [N,C,H,W] -> [N,C] spatial mean.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    require_rank(x.value(), 4, "global_avg_pool input");
    long N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
    Tensor<T> out({N, C});
    for (long nc = 0; nc < N * C; ++nc)
        out[nc] = kern::reduce_sum(x.value().data() + nc * HW, HW) / T(HW);
    return make_op<T>(std::move(out), {x}, [x, N, C, HW](Node<T>* self) {
        auto xn = x.node();
        return [=] {
            xn->ensure_grad();
            for (long nc = 0; nc < N * C; ++nc) {
                T g = self->grad[nc] / T(HW);
                T* dx = xn->grad.data() + nc * HW;
                for (long i = 0; i < HW; ++i) dx[i] += g;
            }
        };
    });
}

// x [N,K] * w [M,K]^T (+ b [M]) -> [N,M].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    require_rank(x.value(), 2, "linear input");
    require_rank(w.value(), 2, "linear weight");
    long N = x.shape()[0], K = x.shape()[1], M = w.shape()[0];
    if (w.shape()[1] != K)
        throw ShapeError("linear: weight " + shape_str(w.shape()) + " does not accept input " +
                         shape_str(x.shape()));
    if (b.defined() && b.value().numel() != M)
        throw ShapeError("linear: bias shape " + shape_str(b.shape()) + ", expected [" +
                         std::to_string(M) + "]");
    Tensor<T> out({N, M});
    kern::gemm_nt(x.value().data(), w.value().data(), out.data(), N, M, K, false);
    if (b.defined())
        for (long n = 0; n < N; ++n)
            kern::add(out.data() + n * M, b.value().data(), out.data() + n * M, M);
    return make_op<T>(std::move(out), {x, w, b}, [x, w, b, N, K, M](Node<T>* self) {
        auto xn = x.node();
        auto wn = w.node();
        auto bn = b.defined() ? b.node() : nullptr;
        return [=] {
            const T* dy = self->grad.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                kern::gemm(dy, wn->value.data(), xn->grad.data(), N, K, M, true);
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                kern::gemm_tn(dy, xn->value.data(), wn->grad.data(), M, K, N, true);
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (long n = 0; n < N; ++n)
                    kern::add(bn->grad.data(), dy + n * M, bn->grad.data(), M);
            }
        };
    });
}

// Broadcast multiply: x [N,C,H,W] scaled per (n,c) by s [N,C].
template <typename T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& s) {
    require_rank(x.value(), 4, "channel_scale input");
    require_rank(s.value(), 2, "channel_scale scale");
    long N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
    if (s.shape()[0] != N || s.shape()[1] != C)
        throw ShapeError("channel_scale: scale " + shape_str(s.shape()) + " does not match input " +
                         shape_str(x.shape()));
    Tensor<T> out(x.shape());
    for (long nc = 0; nc < N * C; ++nc) {
        std::copy_n(x.value().data() + nc * HW, HW, out.data() + nc * HW);
        kern::scale(s.value()[nc], out.data() + nc * HW, HW);
    }
    return make_op<T>(std::move(out), {x, s}, [x, s, N, C, HW](Node<T>* self) {
        auto xn = x.node();
        auto sn = s.node();
        return [=] {
            for (long nc = 0; nc < N * C; ++nc) {
                const T* dy = self->grad.data() + nc * HW;
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    kern::axpy(sn->value[nc], dy, xn->grad.data() + nc * HW, HW);
                }
                if (sn->requires_grad) {
                    sn->ensure_grad();
                    sn->grad[nc] += kern::dot(dy, xn->value.data() + nc * HW, HW);
                }
            }
        };
    });
}

// ------------------------------------------------------------------- losses

// Numerically stable binary cross-entropy on logits, mean reduction.
// loss_i = max(z,0) - z*t + log(1 + exp(-|z|))
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& target) {
    if (logits.shape() != target.shape())
        throw ShapeError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs target " +
                         shape_str(target.shape()));
    long n = target.numel();
    const T* z = logits.value().data();
    const T* t = target.data();
    double acc = 0;
    for (long i = 0; i < n; ++i) {
        double zi = double(z[i]);
        acc += std::max(zi, 0.0) - zi * double(t[i]) + std::log1p(std::exp(-std::abs(zi)));
    }
    Tensor<T> out({1});
    out[0] = T(acc / double(n));
    return make_op<T>(std::move(out), {logits}, [logits, target, n](Node<T>* self) mutable {
        auto zn = logits.node();
        return [self, zn, target = std::move(target), n] {
            zn->ensure_grad();
            T g = self->grad[0] / T(n);
            const T* z = zn->value.data();
            const T* t = target.data();
            T* dz = zn->grad.data();
            for (long i = 0; i < n; ++i) {
                T sig = T(1) / (T(1) + std::exp(-z[i]));
                dz[i] += g * (sig - t[i]);
            }
        };
    });
}

}  // namespace gcpa

#endif
