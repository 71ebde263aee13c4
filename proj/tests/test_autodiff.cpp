#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "ctof/adam.hpp"
#include "ctof/loss.hpp"
#include "ctof/recon.hpp"
#include "ctof/scene.hpp"
#include "ctof/tape.hpp"
#include "ctof/tof_model.hpp"

using namespace ctof;

namespace {

// central finite differences against the analytic gradient of a scalar-valued
// tape program
void check_gradients(const Tensor& params, const std::function<double(const Tensor&)>& f,
                     const Tensor& analytic, double h = 1e-4, double tol = 1e-5) {
    for (std::size_t i = 0; i < params.data.size(); ++i) {
        Tensor plus = params, minus = params;
        plus.data[i] = static_cast<float>(static_cast<double>(plus.data[i]) + h);
        minus.data[i] = static_cast<float>(static_cast<double>(minus.data[i]) - h);
        double h_eff = (static_cast<double>(plus.data[i]) - static_cast<double>(minus.data[i])) / 2.0;
        double fd = (f(plus) - f(minus)) / (2.0 * h_eff);
        double a = analytic.data[i];
        double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
        CHECK(std::abs(a - fd) / denom < tol);
    }
}

Tensor random_tensor(std::vector<int> dims, RngState& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(dims));
    for (float& v : t.data) v = static_cast<float>(rng_uniform(rng, lo, hi));
    return t;
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
    RngState rng(3);
    Tensor a = random_tensor({3, 4}, rng, 0.5, 2.0);
    Tensor b = random_tensor({3, 4}, rng, 0.5, 2.0);

    SUBCASE("mul/add/scale chain") {
        auto f = [&](const Tensor& p) {
            ad::Tape t;
            int pa = t.leaf(p);
            int pb = t.constant(b);
            int out = t.mean_all(t.scale(t.add(t.mul(pa, pb), pa), 3.0));
            return t.scalar(out);
        };
        ad::Tape t;
        int pa = t.leaf(a);
        int out = t.mean_all(t.scale(t.add(t.mul(pa, t.constant(b)), pa), 3.0));
        t.backward(out);
        check_gradients(a, f, t.grad_tensor(pa));
    }
    SUBCASE("cos") {
        auto f = [&](const Tensor& p) {
            ad::Tape t;
            int pa = t.leaf(p);
            return t.scalar(t.mean_all(t.cos_op(pa)));
        };
        ad::Tape t;
        int pa = t.leaf(a);
        int out = t.mean_all(t.cos_op(pa));
        t.backward(out);
        check_gradients(a, f, t.grad_tensor(pa));
    }
    SUBCASE("atan2 in both arguments") {
        auto fy = [&](const Tensor& p) {
            ad::Tape t;
            int py = t.leaf(p);
            return t.scalar(t.mean_all(t.atan2_op(py, t.constant(b))));
        };
        ad::Tape ty;
        int py = ty.leaf(a);
        int oy = ty.mean_all(ty.atan2_op(py, ty.constant(b)));
        ty.backward(oy);
        check_gradients(a, fy, ty.grad_tensor(py));

        auto fx = [&](const Tensor& p) {
            ad::Tape t;
            int px = t.leaf(p);
            return t.scalar(t.mean_all(t.atan2_op(t.constant(b), px)));
        };
        ad::Tape tx;
        int px = tx.leaf(a);
        int ox = tx.mean_all(tx.atan2_op(tx.constant(b), px));
        tx.backward(ox);
        check_gradients(a, fx, tx.grad_tensor(px));
    }
    SUBCASE("relu away from the kink") {
        Tensor mixed = random_tensor({4, 4}, rng, -2.0, 2.0);
        for (float& v : mixed.data)
            if (std::abs(v) < 0.01f) v = 0.5f;
        auto f = [&](const Tensor& p) {
            ad::Tape t;
            int pa = t.leaf(p);
            return t.scalar(t.mean_all(t.relu(pa)));
        };
        ad::Tape t;
        int pa = t.leaf(mixed);
        int out = t.mean_all(t.relu(pa));
        t.backward(out);
        check_gradients(mixed, f, t.grad_tensor(pa));
    }
    SUBCASE("smooth_l1 both branches") {
        Tensor target = random_tensor({3, 4}, rng, 0.0, 1.0);
        Tensor pred = target;
        for (std::size_t i = 0; i < pred.data.size(); ++i)
            pred.data[i] += static_cast<float>(i % 2 == 0 ? 0.3 : 2.5);  // inside and outside delta
        auto f = [&](const Tensor& p) {
            ad::Tape t;
            int pp = t.leaf(p);
            return t.scalar(t.mean_all(t.smooth_l1_map(pp, target, 1.0)));
        };
        ad::Tape t;
        int pp = t.leaf(pred);
        int out = t.mean_all(t.smooth_l1_map(pp, target, 1.0));
        t.backward(out);
        check_gradients(pred, f, t.grad_tensor(pp));
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    RngState rng(11);
    for (int stride : {1, 2}) {
        CAPTURE(stride);
        Tensor input = random_tensor({2, 6, 5}, rng);
        Tensor kernel = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
        Tensor bias = random_tensor({3}, rng, -0.2, 0.2);

        auto run = [&](const Tensor& in, const Tensor& k, const Tensor& bi) {
            ad::Tape t;
            int ni = t.leaf(in);
            int nk = t.leaf(k);
            int nb = t.leaf(bi);
            return t.scalar(t.mean_all(t.conv2d(ni, nk, nb, stride)));
        };

        ad::Tape t;
        int ni = t.leaf(input);
        int nk = t.leaf(kernel);
        int nb = t.leaf(bias);
        int out = t.mean_all(t.conv2d(ni, nk, nb, stride));
        t.backward(out);

        check_gradients(input, [&](const Tensor& p) { return run(p, kernel, bias); }, t.grad_tensor(ni));
        check_gradients(kernel, [&](const Tensor& p) { return run(input, p, bias); }, t.grad_tensor(nk));
        check_gradients(bias, [&](const Tensor& p) { return run(input, kernel, p); }, t.grad_tensor(nb));
    }
}

TEST_CASE("upsample, concat and reshape route gradients") {
    RngState rng(13);
    Tensor a = random_tensor({2, 3, 3}, rng);
    Tensor b = random_tensor({1, 6, 6}, rng);
    auto f = [&](const Tensor& p) {
        ad::Tape t;
        int pa = t.leaf(p);
        int up = t.upsample2_nearest(pa, 6, 6);
        int cat = t.concat_channels(up, t.constant(b));
        return t.scalar(t.mean_all(t.reshape(cat, {3 * 6 * 6})));
    };
    ad::Tape t;
    int pa = t.leaf(a);
    int up = t.upsample2_nearest(pa, 6, 6);
    int cat = t.concat_channels(up, t.constant(b));
    int out = t.mean_all(t.reshape(cat, {3 * 6 * 6}));
    t.backward(out);
    check_gradients(a, f, t.grad_tensor(pa));
}

TEST_CASE("tile_mask scatter-adds one gradient per tiled position") {
    // 2x2 patch tiled over 4x4: each cell appears 4 times
    Tensor patch({1, 1, 2, 2});
    patch.data = {0.1f, 0.2f, 0.3f, 0.4f};
    RngState rng(17);
    Tensor weight = random_tensor({1, 1, 4, 4}, rng, 0.0, 1.0);

    ad::Tape t;
    int p = t.leaf(patch);
    int tiled = t.tile_mask_op(p, 4, 4, 2, 0, 0);
    int avg = t.masked_view_average(tiled, weight);
    int out = t.mean_all(avg);
    t.backward(out);
    Tensor g = t.grad_tensor(p);

    // brute force: d out / d patch[r][c] = sum over the 4 positions of w/16
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            double expect = 0;
            for (int rr = r; rr < 4; rr += 2)
                for (int cc = c; cc < 4; cc += 2) expect += weight(0, 0, rr, cc) / 16.0;
            // grad_tensor narrows to float32
            CHECK(g(0, 0, r, c) == doctest::Approx(expect).epsilon(1e-6));
        }

    // and the same via finite differences
    auto f = [&](const Tensor& pp) {
        ad::Tape tt;
        int n = tt.leaf(pp);
        return tt.scalar(tt.mean_all(tt.masked_view_average(tt.tile_mask_op(n, 4, 4, 2, 0, 0), weight)));
    };
    check_gradients(patch, f, g);
}

TEST_CASE("chamfer_map distances and gradients") {
    SUBCASE("identical clouds give zero") {
        Tensor depth({2, 2});
        depth.data = {5.0f, 6.0f, 7.0f, 8.0f};
        PointCloud gt = project_points(depth, 1.0);
        ad::Tape t;
        int d = t.leaf(depth);
        int ch = t.chamfer_map(d, gt, 1.0);
        int out = t.mean_all(ch);
        CHECK(t.scalar(out) == doctest::Approx(0.0));
    }
    SUBCASE("nearer neighbor wins") {
        PointCloud gt;
        gt.points = Tensor({2, 3});
        gt.points(0, 0) = 0;
        gt.points(0, 1) = 0;
        gt.points(0, 2) = 0;
        gt.points(1, 0) = 0;
        gt.points(1, 1) = 0;
        gt.points(1, 2) = 8;
        PointCloud recon;
        recon.points = Tensor({1, 3});
        recon.points(0, 2) = 5;
        CHECK(chamfer(recon, gt, ChamferMode::bruteforce) == doctest::Approx(3.0));
        CHECK(chamfer(recon, gt, ChamferMode::accelerated) == doctest::Approx(3.0));
    }
    SUBCASE("gradient against finite differences") {
        RngState rng(23);
        Tensor gt_depth = random_tensor({4, 4}, rng, 100.0, 110.0);
        Tensor pred = random_tensor({4, 4}, rng, 100.0, 110.0);
        PointCloud gt = project_points(gt_depth, 1.0);
        auto f = [&](const Tensor& p) {
            ad::Tape t;
            int d = t.leaf(p);
            return t.scalar(t.mean_all(t.chamfer_map(d, gt, 1.0)));
        };
        ad::Tape t;
        int d = t.leaf(pred);
        int out = t.mean_all(t.chamfer_map(d, gt, 1.0));
        t.backward(out);
        check_gradients(pred, f, t.grad_tensor(d), 1e-4, 1e-4);
    }
}

TEST_CASE("accelerated chamfer equals brute force bit-exactly") {
    RngState rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 1 + static_cast<int>(rng.next_u64() % 300);
        int m = 1 + static_cast<int>(rng.next_u64() % 300);
        PointCloud a, b;
        a.points = random_tensor({n, 3}, rng, -50.0, 50.0);
        b.points = random_tensor({m, 3}, rng, -50.0, 50.0);
        double brute = chamfer(a, b, ChamferMode::bruteforce);
        double accel = chamfer(a, b, ChamferMode::accelerated);
        CHECK(brute == accel);  // bitwise
    }
    // holds at the largest supported size too
    PointCloud big_a, big_b;
    big_a.points = random_tensor({10000, 3}, rng, -50.0, 50.0);
    big_b.points = random_tensor({10000, 3}, rng, -50.0, 50.0);
    CHECK(chamfer(big_a, big_b, ChamferMode::bruteforce) ==
          chamfer(big_a, big_b, ChamferMode::accelerated));
}

TEST_CASE("smooth_l1 spec values") {
    Tensor pred({3});
    pred.data = {1.0f, 1.5f, 3.0f};
    Tensor target({3}, 1.0f);
    Tensor out = smooth_l1(pred, target, 1.0);
    CHECK(out.data[0] == doctest::Approx(0.0));
    CHECK(out.data[1] == doctest::Approx(0.125));
    CHECK(out.data[2] == doctest::Approx(1.5));
}

TEST_CASE("total_loss equals an independent recomputation") {
    RngState rng(41);
    Tensor gt = random_tensor({8, 8}, rng, 1000.0, 1500.0);
    Tensor pred = gt;
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        pred.data[i] += static_cast<float>(rng_uniform(rng, -30.0, 30.0));

    LossConfig cfg;
    cfg.w_smooth = 100.0;
    cfg.w_chamfer = 0.08;
    cfg.delta = 1.0;
    cfg.depth_scale = 1.0;

    SUBCASE("identical maps vanish") { CHECK(total_loss(gt, gt, cfg) == doctest::Approx(0.0)); }

    SUBCASE("chamfer off reduces to weighted smooth l1") {
        LossConfig no_ch = cfg;
        no_ch.w_chamfer = 0.0;
        double expect = 0;
        for (std::size_t i = 0; i < pred.data.size(); ++i) {
            double d = std::abs(static_cast<double>(pred.data[i]) - static_cast<double>(gt.data[i]));
            expect += d >= 1.0 ? d - 0.5 : d * d / 2.0;
        }
        expect *= 100.0 / 64.0;
        CHECK(total_loss(pred, gt, no_ch) == doctest::Approx(expect).epsilon(1e-6));
    }

    SUBCASE("full loss, scalar re-computation") {
        // plain-loop oracle, no library calls
        double sl = 0;
        for (int i = 0; i < 64; ++i) {
            double d = std::abs(static_cast<double>(pred.data[i]) - static_cast<double>(gt.data[i]));
            sl += d >= 1.0 ? d - 0.5 : d * d / 2.0;
        }
        double ch = 0;
        for (int i = 0; i < 64; ++i) {
            double px = i % 8, py = i / 8, pz = pred.data[i];
            double best = 1e300;
            for (int j = 0; j < 64; ++j) {
                double dx = px - j % 8, dy = py - j / 8, dz = pz - static_cast<double>(gt.data[j]);
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            ch += std::sqrt(best);
        }
        double expect = (100.0 * sl + 0.08 * ch) / 64.0;
        CHECK(total_loss(pred, gt, cfg) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("adam update contract") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        Tensor p({4}, 2.0f);
        AdamState st = adam_init({4});
        adam_step(p, Tensor::zeros({4}), st, 0.1);
        for (float v : p.data) CHECK(v == 2.0f);
    }
    SUBCASE("first step moves by -lr * sign(g)") {
        Tensor p({2});
        p.data = {1.0f, 1.0f};
        Tensor g({2});
        g.data = {0.5f, -0.25f};
        AdamState st = adam_init({2});
        adam_step(p, g, st, 0.01);
        CHECK(p.data[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
        CHECK(p.data[1] == doctest::Approx(1.0 + 0.01).epsilon(1e-6));
    }
    SUBCASE("deterministic") {
        Tensor p1({3}, 1.0f), p2({3}, 1.0f);
        Tensor g({3}, 0.3f);
        AdamState s1 = adam_init({3}), s2 = adam_init({3});
        for (int i = 0; i < 5; ++i) {
            adam_step(p1, g, s1, 0.05);
            adam_step(p2, g, s2, 0.05);
        }
        CHECK(p1.data == p2.data);
    }
    SUBCASE("shape mismatch rejected") {
        Tensor p({3}, 1.0f);
        AdamState st = adam_init({3});
        CHECK_THROWS_AS(adam_step(p, Tensor::zeros({4}), st, 0.1), std::invalid_argument);
    }
}

TEST_CASE("backward validates connectivity and zeroes detached gradients") {
    SUBCASE("disconnected loss is an error") {
        ad::Tape t;
        Tensor c({2, 2}, 1.0f);
        int n = t.constant(c);
        int out = t.mean_all(n);
        CHECK_THROWS_AS(t.backward(out), std::invalid_argument);
    }
    SUBCASE("scale-invariant phase kills the mask gradient on flat scenes") {
        // flat scene: all buckets scale together with any mask change, and the
        // zero-weight refiner adds nothing, so d loss / d mask ~ 0
        LightField lf;
        {
            LayeredScene s;
            s.height = 8;
            s.width = 8;
            SceneLayer l;
            l.depth_mm = 1500.0;
            l.albedo = Tensor::full({8, 8}, 0.8f);
            l.opacity = Tensor::full({8, 8}, 1.0f);
            s.layers.push_back(l);
            lf = render_lightfield(s, 3, 3, 100.0, 1500.0);
        }
        ToFConfig tof;
        Tensor pv = per_view_correlations(lf, tof);
        Tensor gt = central_depth(lf);

        ad::Tape t;
        MaskPatch mask(3, 3, 8, 0.6f);
        int leaf = t.leaf(mask.values);
        int tile = t.tile_mask_op(leaf, 8, 8, 8, 0, 0);
        std::array<int, 4> buckets{};
        for (int psi = 0; psi < 4; ++psi) {
            Tensor w({3, 3, 8, 8});
            for (int u = 0; u < 3; ++u)
                for (int v = 0; v < 3; ++v)
                    for (int r = 0; r < 8; ++r)
                        for (int c = 0; c < 8; ++c)
                            w(u, v, r, c) = pv.data[(((static_cast<std::size_t>(psi) * 3 + u) * 3 + v) * 8 + r) * 8 + c] / 9.0f;
            buckets[psi] = t.masked_view_average(tile, w);
        }
        int y = t.sub(buckets[2], buckets[1]);
        int x = t.sub(buckets[0], buckets[3]);
        int phi = t.wrap_two_pi(t.atan2_op(y, x));
        int depth = t.scale(phi, tof.light_speed_mm_ms / (4.0 * M_PI * tof.omega_per_ms()));
        int sl = t.smooth_l1_map(depth, gt, 1.0);
        int loss = t.mean_all(sl);
        t.backward(loss);
        Tensor g = t.grad_tensor(leaf);
        for (float v : g.data) CHECK(std::abs(v) < 1e-9);
    }
}
