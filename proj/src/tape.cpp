#include "ctof/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctof/kdtree.hpp"

namespace ctof::ad {

namespace {

std::int64_t numel_of(const std::vector<int>& dims) {
    std::int64_t n = 1;
    for (int d : dims) n *= d;
    return n;
}

// reflect-101 index for pad 1 (no edge repeat); requires n >= 2
inline int reflect(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

}  // namespace

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(const Tensor& t) {
    Node n;
    n.dims = t.dims;
    n.val.assign(t.data.begin(), t.data.end());
    return push(std::move(n));
}

int Tape::constant(std::vector<int> dims, std::vector<double> values) {
    if (numel_of(dims) != static_cast<std::int64_t>(values.size()))
        throw std::invalid_argument("Tape::constant: dim/value mismatch");
    Node n;
    n.dims = std::move(dims);
    n.val = std::move(values);
    return push(std::move(n));
}

int Tape::leaf(const Tensor& t) {
    int id = constant(t);
    nodes_[id].requires_grad = true;
    return id;
}

Tensor Tape::value_tensor(int id) const {
    const Node& n = nodes_[id];
    Tensor t(n.dims);
    for (std::size_t i = 0; i < n.val.size(); ++i) t.data[i] = static_cast<float>(n.val[i]);
    return t;
}

Tensor Tape::grad_tensor(int id) const {
    const Node& n = nodes_[id];
    Tensor t(n.dims);
    if (!n.grad.empty())
        for (std::size_t i = 0; i < n.grad.size(); ++i) t.data[i] = static_cast<float>(n.grad[i]);
    return t;
}

int Tape::add(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.dims != nb.dims) throw std::invalid_argument("Tape::add: shape mismatch");
    Node n;
    n.dims = na.dims;
    n.parents = {a, b};
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = na.val[i] + nb.val[i];
    n.back = [a, b](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            t.accumulate(a, i, self.grad[i]);
            t.accumulate(b, i, self.grad[i]);
        }
    };
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.dims != nb.dims) throw std::invalid_argument("Tape::sub: shape mismatch");
    Node n;
    n.dims = na.dims;
    n.parents = {a, b};
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = na.val[i] - nb.val[i];
    n.back = [a, b](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            t.accumulate(a, i, self.grad[i]);
            t.accumulate(b, i, -self.grad[i]);
        }
    };
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.dims != nb.dims) throw std::invalid_argument("Tape::mul: shape mismatch");
    Node n;
    n.dims = na.dims;
    n.parents = {a, b};
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = na.val[i] * nb.val[i];
    n.back = [a, b](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            t.accumulate(a, i, self.grad[i] * t.nodes_[b].val[i]);
            t.accumulate(b, i, self.grad[i] * t.nodes_[a].val[i]);
        }
    };
    return push(std::move(n));
}

int Tape::add_const(int a, const Tensor& tens) {
    const Node& na = nodes_[a];
    if (na.dims != tens.dims) throw std::invalid_argument("Tape::add_const: shape mismatch");
    Node n;
    n.dims = na.dims;
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i)
        n.val[i] = na.val[i] + static_cast<double>(tens.data[i]);
    n.back = [a](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) t.accumulate(a, i, self.grad[i]);
    };
    return push(std::move(n));
}

int Tape::scale(int a, double k) {
    const Node& na = nodes_[a];
    Node n;
    n.dims = na.dims;
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = k * na.val[i];
    n.back = [a, k](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) t.accumulate(a, i, k * self.grad[i]);
    };
    return push(std::move(n));
}

int Tape::add_scaled(double alpha, int a, double beta, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.dims != nb.dims) throw std::invalid_argument("Tape::add_scaled: shape mismatch");
    Node n;
    n.dims = na.dims;
    n.parents = {a, b};
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = alpha * na.val[i] + beta * nb.val[i];
    n.back = [a, b, alpha, beta](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            t.accumulate(a, i, alpha * self.grad[i]);
            t.accumulate(b, i, beta * self.grad[i]);
        }
    };
    return push(std::move(n));
}

int Tape::cos_op(int a) {
    const Node& na = nodes_[a];
    Node n;
    n.dims = na.dims;
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::cos(na.val[i]);
    n.back = [a](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            t.accumulate(a, i, -std::sin(t.nodes_[a].val[i]) * self.grad[i]);
    };
    return push(std::move(n));
}

int Tape::atan2_op(int y, int x) {
    const Node& ny = nodes_[y];
    const Node& nx = nodes_[x];
    if (ny.dims != nx.dims) throw std::invalid_argument("Tape::atan2: shape mismatch");
    Node n;
    n.dims = ny.dims;
    n.parents = {y, x};
    n.requires_grad = ny.requires_grad || nx.requires_grad;
    n.val.resize(ny.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) {
        n.val[i] = std::atan2(ny.val[i], nx.val[i]);
        // the wrapped phase jumps only across the positive x axis
        if (record_decisions) decisions.push_back(kDecisionPhaseWrap | (nx.val[i] > 0 && ny.val[i] < 0 ? 1 : 0));
    }
    n.back = [y, x](Tape& t, Node& self) {
        const auto& vy = t.nodes_[y].val;
        const auto& vx = t.nodes_[x].val;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double denom = vx[i] * vx[i] + vy[i] * vy[i];
            if (denom == 0.0) continue;  // measure-zero origin: subgradient 0
            t.accumulate(y, i, self.grad[i] * vx[i] / denom);
            t.accumulate(x, i, -self.grad[i] * vy[i] / denom);
        }
    };
    return push(std::move(n));
}

int Tape::relu(int a) {
    const Node& na = nodes_[a];
    Node n;
    n.dims = na.dims;
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) {
        bool on = na.val[i] > 0;
        n.val[i] = on ? na.val[i] : 0.0;
        if (record_decisions) decisions.push_back(kDecisionRectifier | (on ? 1 : 0));
    }
    n.back = [a](Tape& t, Node& self) {
        const auto& va = t.nodes_[a].val;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (va[i] > 0) t.accumulate(a, i, self.grad[i]);
    };
    return push(std::move(n));
}

int Tape::clamp_op(int a, double lo, double hi) {
    const Node& na = nodes_[a];
    Node n;
    n.dims = na.dims;
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) {
        double v = na.val[i];
        int region = v < lo ? 0 : (v > hi ? 2 : 1);
        n.val[i] = region == 0 ? lo : (region == 2 ? hi : v);
        if (record_decisions) decisions.push_back(kDecisionClamp | region);
    }
    n.back = [a, lo, hi](Tape& t, Node& self) {
        const auto& va = t.nodes_[a].val;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (va[i] >= lo && va[i] <= hi) t.accumulate(a, i, self.grad[i]);
    };
    return push(std::move(n));
}

int Tape::wrap_two_pi(int a) {
    const Node& na = nodes_[a];
    Node n;
    n.dims = na.dims;
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i)
        n.val[i] = na.val[i] < 0 ? na.val[i] + 2.0 * M_PI : na.val[i];
    n.back = [a](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) t.accumulate(a, i, self.grad[i]);
    };
    return push(std::move(n));
}

int Tape::reshape(int a, std::vector<int> dims) {
    const Node& na = nodes_[a];
    if (numel_of(dims) != static_cast<std::int64_t>(na.val.size()))
        throw std::invalid_argument("Tape::reshape: element count mismatch");
    Node n;
    n.dims = std::move(dims);
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    n.val = na.val;
    n.back = [a](Tape& t, Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) t.accumulate(a, i, self.grad[i]);
    };
    return push(std::move(n));
}

int Tape::concat_channels(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.dims.size() != 3 || nb.dims.size() != 3 || na.dims[1] != nb.dims[1] ||
        na.dims[2] != nb.dims[2])
        throw std::invalid_argument("Tape::concat_channels: incompatible shapes");
    Node n;
    n.dims = {na.dims[0] + nb.dims[0], na.dims[1], na.dims[2]};
    n.parents = {a, b};
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.val.reserve(na.val.size() + nb.val.size());
    n.val.insert(n.val.end(), na.val.begin(), na.val.end());
    n.val.insert(n.val.end(), nb.val.begin(), nb.val.end());
    std::size_t na_size = na.val.size();
    n.back = [a, b, na_size](Tape& t, Node& self) {
        for (std::size_t i = 0; i < na_size; ++i) t.accumulate(a, i, self.grad[i]);
        for (std::size_t i = na_size; i < self.grad.size(); ++i)
            t.accumulate(b, i - na_size, self.grad[i]);
    };
    return push(std::move(n));
}

int Tape::tile_mask_op(int patch, int H, int W, int crop_side, int offset_row, int offset_col) {
    const Node& np = nodes_[patch];
    if (np.dims.size() != 4 || np.dims[2] != np.dims[3])
        throw std::invalid_argument("Tape::tile_mask_op: patch must be [U,V,P,P]");
    int U = np.dims[0], V = np.dims[1], P = np.dims[2];
    if (crop_side <= 0 || crop_side > P) throw std::invalid_argument("Tape::tile_mask_op: bad crop");
    int anchor = (P - crop_side) / 2;
    int offr = ((offset_row % crop_side) + crop_side) % crop_side;
    int offc = ((offset_col % crop_side) + crop_side) % crop_side;

    Node n;
    n.dims = {U, V, H, W};
    n.parents = {patch};
    n.requires_grad = np.requires_grad;
    n.val.resize(static_cast<std::size_t>(U) * V * H * W);

    // precompute the toroidal row/col lookups once
    std::vector<int> row_lut(H), col_lut(W);
    for (int r = 0; r < H; ++r) row_lut[r] = anchor + (r + offr) % crop_side;
    for (int c = 0; c < W; ++c) col_lut[c] = anchor + (c + offc) % crop_side;

    for (int u = 0; u < U; ++u)
        for (int v = 0; v < V; ++v)
            for (int r = 0; r < H; ++r) {
                std::size_t out_row = ((static_cast<std::size_t>(u) * V + v) * H + r) * W;
                std::size_t in_base = (static_cast<std::size_t>(u) * V + v) * P * P +
                                      static_cast<std::size_t>(row_lut[r]) * P;
                for (int c = 0; c < W; ++c) n.val[out_row + c] = np.val[in_base + col_lut[c]];
            }

    n.back = [patch, U, V, P, H, W, row_lut, col_lut](Tape& t, Node& self) {
        Node& src = t.nodes_[patch];
        if (!src.requires_grad) return;
        t.ensure_grad(src);
        src.touched = true;
        // every tiled position scatter-adds into its patch cell
        for (int u = 0; u < U; ++u)
            for (int v = 0; v < V; ++v)
                for (int r = 0; r < H; ++r) {
                    std::size_t out_row = ((static_cast<std::size_t>(u) * V + v) * H + r) * W;
                    std::size_t in_base = (static_cast<std::size_t>(u) * V + v) * P * P +
                                          static_cast<std::size_t>(row_lut[r]) * P;
                    for (int c = 0; c < W; ++c)
                        src.grad[in_base + col_lut[c]] += self.grad[out_row + c];
                }
    };
    return push(std::move(n));
}

int Tape::masked_view_average(int tiled, const Tensor& weight) {
    const Node& nt = nodes_[tiled];
    if (nt.dims != weight.dims)
        throw std::invalid_argument("Tape::masked_view_average: weight shape mismatch");
    if (nt.dims.size() != 4) throw std::invalid_argument("Tape::masked_view_average: need [U,V,H,W]");
    int U = nt.dims[0], V = nt.dims[1], H = nt.dims[2], W = nt.dims[3];

    auto w = std::make_shared<std::vector<double>>(weight.data.begin(), weight.data.end());

    Node n;
    n.dims = {H, W};
    n.parents = {tiled};
    n.requires_grad = nt.requires_grad;
    n.val.assign(static_cast<std::size_t>(H) * W, 0.0);
    std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int u = 0; u < U; ++u)
        for (int v = 0; v < V; ++v) {
            std::size_t base = (static_cast<std::size_t>(u) * V + v) * plane;
            for (std::size_t i = 0; i < plane; ++i) n.val[i] += nt.val[base + i] * (*w)[base + i];
        }

    n.back = [tiled, U, V, plane, w](Tape& t, Node& self) {
        Node& src = t.nodes_[tiled];
        if (!src.requires_grad) return;
        t.ensure_grad(src);
        src.touched = true;
        for (int u = 0; u < U; ++u)
            for (int v = 0; v < V; ++v) {
                std::size_t base = (static_cast<std::size_t>(u) * V + v) * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    src.grad[base + i] += self.grad[i] * (*w)[base + i];
            }
    };
    return push(std::move(n));
}

int Tape::conv2d(int input, int kernel, int bias, int stride) {
    const Node& ni = nodes_[input];
    const Node& nk = nodes_[kernel];
    const Node& nb = nodes_[bias];
    if (ni.dims.size() != 3) throw std::invalid_argument("Tape::conv2d: input must be [C,H,W]");
    if (nk.dims.size() != 4 || nk.dims[2] != 3 || nk.dims[3] != 3)
        throw std::invalid_argument("Tape::conv2d: kernel must be [Co,Ci,3,3]");
    if (nk.dims[1] != ni.dims[0]) throw std::invalid_argument("Tape::conv2d: channel mismatch");
    if (nb.dims.size() != 1 || nb.dims[0] != nk.dims[0])
        throw std::invalid_argument("Tape::conv2d: bias mismatch");
    if (stride != 1 && stride != 2) throw std::invalid_argument("Tape::conv2d: stride must be 1 or 2");
    int Ci = ni.dims[0], H = ni.dims[1], W = ni.dims[2];
    if (H < 2 || W < 2) throw std::invalid_argument("Tape::conv2d: input too small for reflect pad");
    int Co = nk.dims[0];
    int Ho = (H - 1) / stride + 1;
    int Wo = (W - 1) / stride + 1;

    Node n;
    n.dims = {Co, Ho, Wo};
    n.parents = {input, kernel, bias};
    n.requires_grad = ni.requires_grad || nk.requires_grad || nb.requires_grad;
    n.val.assign(static_cast<std::size_t>(Co) * Ho * Wo, 0.0);

    const double* in = ni.val.data();
    const double* kw = nk.val.data();
    for (int co = 0; co < Co; ++co) {
        double b = nb.val[co];
        for (int yo = 0; yo < Ho; ++yo)
            for (int xo = 0; xo < Wo; ++xo) {
                double acc = b;
                for (int ci = 0; ci < Ci; ++ci) {
                    const double* kbase = kw + ((static_cast<std::size_t>(co) * Ci + ci) * 9);
                    const double* ibase = in + static_cast<std::size_t>(ci) * H * W;
                    for (int ky = 0; ky < 3; ++ky) {
                        int yi = reflect(yo * stride + ky - 1, H);
                        for (int kx = 0; kx < 3; ++kx) {
                            int xi = reflect(xo * stride + kx - 1, W);
                            acc += kbase[ky * 3 + kx] * ibase[static_cast<std::size_t>(yi) * W + xi];
                        }
                    }
                }
                n.val[(static_cast<std::size_t>(co) * Ho + yo) * Wo + xo] = acc;
            }
    }

    n.back = [input, kernel, bias, stride, Ci, H, W, Co, Ho, Wo](Tape& t, Node& self) {
        Node& src = t.nodes_[input];
        Node& ker = t.nodes_[kernel];
        Node& bi = t.nodes_[bias];
        bool need_in = src.requires_grad;
        bool need_k = ker.requires_grad;
        bool need_b = bi.requires_grad;
        if (need_in) { t.ensure_grad(src); src.touched = true; }
        if (need_k) { t.ensure_grad(ker); ker.touched = true; }
        if (need_b) { t.ensure_grad(bi); bi.touched = true; }
        const double* in = src.val.data();
        const double* kw = ker.val.data();
        for (int co = 0; co < Co; ++co)
            for (int yo = 0; yo < Ho; ++yo)
                for (int xo = 0; xo < Wo; ++xo) {
                    double g = self.grad[(static_cast<std::size_t>(co) * Ho + yo) * Wo + xo];
                    if (g == 0.0) continue;
                    if (need_b) bi.grad[co] += g;
                    for (int ci = 0; ci < Ci; ++ci) {
                        std::size_t kbase = (static_cast<std::size_t>(co) * Ci + ci) * 9;
                        std::size_t ibase = static_cast<std::size_t>(ci) * H * W;
                        for (int ky = 0; ky < 3; ++ky) {
                            int yi = reflect(yo * stride + ky - 1, H);
                            for (int kx = 0; kx < 3; ++kx) {
                                int xi = reflect(xo * stride + kx - 1, W);
                                std::size_t ii = ibase + static_cast<std::size_t>(yi) * W + xi;
                                if (need_k) ker.grad[kbase + ky * 3 + kx] += g * in[ii];
                                if (need_in) src.grad[ii] += g * kw[kbase + ky * 3 + kx];
                            }
                        }
                    }
                }
    };
    return push(std::move(n));
}

int Tape::upsample2_nearest(int a, int out_h, int out_w) {
    const Node& na = nodes_[a];
    if (na.dims.size() != 3) throw std::invalid_argument("Tape::upsample2_nearest: need [C,H,W]");
    int C = na.dims[0], h = na.dims[1], w = na.dims[2];
    if (out_h > 2 * h || out_w > 2 * w)
        throw std::invalid_argument("Tape::upsample2_nearest: output exceeds 2x input");
    Node n;
    n.dims = {C, out_h, out_w};
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    n.val.resize(static_cast<std::size_t>(C) * out_h * out_w);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x)
                n.val[(static_cast<std::size_t>(c) * out_h + y) * out_w + x] =
                    na.val[(static_cast<std::size_t>(c) * h + std::min(y / 2, h - 1)) * w +
                           std::min(x / 2, w - 1)];
    n.back = [a, C, h, w, out_h, out_w](Tape& t, Node& self) {
        Node& src = t.nodes_[a];
        if (!src.requires_grad) return;
        t.ensure_grad(src);
        src.touched = true;
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < out_h; ++y)
                for (int x = 0; x < out_w; ++x)
                    src.grad[(static_cast<std::size_t>(c) * h + std::min(y / 2, h - 1)) * w +
                             std::min(x / 2, w - 1)] +=
                        self.grad[(static_cast<std::size_t>(c) * out_h + y) * out_w + x];
    };
    return push(std::move(n));
}

int Tape::mean_all(int a) {
    const Node& na = nodes_[a];
    Node n;
    n.dims = {1};
    n.parents = {a};
    n.requires_grad = na.requires_grad;
    double s = 0;
    for (double v : na.val) s += v;
    std::size_t count = na.val.size();
    n.val = {s / static_cast<double>(count)};
    n.back = [a, count](Tape& t, Node& self) {
        double g = self.grad[0] / static_cast<double>(count);
        for (std::size_t i = 0; i < count; ++i) t.accumulate(a, i, g);
    };
    return push(std::move(n));
}

int Tape::smooth_l1_map(int pred, const Tensor& target, double delta) {
    const Node& np = nodes_[pred];
    if (np.dims != target.dims) throw std::invalid_argument("Tape::smooth_l1_map: shape mismatch");
    if (!(delta > 0)) throw std::invalid_argument("Tape::smooth_l1_map: delta must be positive");
    auto tgt = std::make_shared<std::vector<double>>(target.data.begin(), target.data.end());
    Node n;
    n.dims = np.dims;
    n.parents = {pred};
    n.requires_grad = np.requires_grad;
    n.val.resize(np.val.size());
    for (std::size_t i = 0; i < n.val.size(); ++i) {
        double d = np.val[i] - (*tgt)[i];
        double ad = std::abs(d);
        n.val[i] = ad >= delta ? ad - delta / 2.0 : d * d / (2.0 * delta);
    }
    n.back = [pred, tgt, delta](Tape& t, Node& self) {
        const auto& vp = t.nodes_[pred].val;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double d = vp[i] - (*tgt)[i];
            double slope = std::abs(d) >= delta ? (d > 0 ? 1.0 : -1.0) : d / delta;
            t.accumulate(pred, i, self.grad[i] * slope);
        }
    };
    return push(std::move(n));
}

int Tape::chamfer_map(int depth, const PointCloud& gt, double depth_scale) {
    const Node& nd = nodes_[depth];
    if (nd.dims.size() != 2) throw std::invalid_argument("Tape::chamfer_map: depth must be [H,W]");
    if (gt.points.ndim() != 2 || gt.points.dims[0] == 0)
        throw std::invalid_argument("Tape::chamfer_map: ground truth cloud empty");
    int H = nd.dims[0], W = nd.dims[1];

    auto gt_copy = std::make_shared<PointCloud>(gt);
    KdTree3 tree(*gt_copy);

    Node n;
    n.dims = nd.dims;
    n.parents = {depth};
    n.requires_grad = nd.requires_grad;
    n.val.resize(nd.val.size());
    // the nearest-neighbor assignment is frozen for the backward pass
    auto nn = std::make_shared<std::vector<int>>(nd.val.size());
    int gt_count = gt_copy->points.dims[0];
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            std::size_t i = static_cast<std::size_t>(r) * W + c;
            double z = depth_scale * nd.val[i];
            auto hit = tree.nearest(static_cast<double>(c), static_cast<double>(r), z);
            if (hit.index < 0 || hit.index >= gt_count) {
                // non-finite query: no neighbor comparison can succeed
                (*nn)[i] = 0;
                n.val[i] = std::numeric_limits<double>::quiet_NaN();
            } else {
                (*nn)[i] = hit.index;
                n.val[i] = std::sqrt(hit.dist2);
            }
            if (record_decisions) decisions.push_back(kDecisionNearestNeighbor | (*nn)[i]);
        }

    n.back = [depth, gt_copy, nn, depth_scale](Tape& t, Node& self) {
        const auto& vd = t.nodes_[depth].val;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double dist = self.val[i];
            if (dist <= 0.0) continue;
            double z = depth_scale * vd[i];
            double pz = gt_copy->points((*nn)[i], 2);
            t.accumulate(depth, i, self.grad[i] * depth_scale * (z - pz) / dist);
        }
    };
    return push(std::move(n));
}

void Tape::backward(int loss) {
    if (loss < 0 || loss >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument("Tape::backward: bad node id");
    Node& ln = nodes_[loss];
    if (ln.val.size() != 1) throw std::invalid_argument("Tape::backward: loss must be scalar");
    if (!ln.requires_grad)
        throw std::invalid_argument("Tape::backward: loss is disconnected from every parameter");

    for (Node& n : nodes_) {
        if (!n.grad.empty()) std::fill(n.grad.begin(), n.grad.end(), 0.0);
        n.touched = false;
    }
    ensure_grad(ln);
    ln.grad[0] = 1.0;
    ln.touched = true;

    for (int id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.touched && n.back) n.back(*this, n);
    }
}

}  // namespace ctof::ad
