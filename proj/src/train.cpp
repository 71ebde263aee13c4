#include "ctof/train.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ctof/adam.hpp"
#include "ctof/manifest.hpp"
#include "ctof/metrics.hpp"
#include "ctof/tape.hpp"
#include "ctof/threading.hpp"

namespace ctof {

void TrainConfig::validate() const {
    if (lr_refiner <= 0 || lr_mask <= 0) throw std::invalid_argument("TrainConfig: learning rates must be positive");
    if (halve_every <= 0 || patch_size <= 0 || batch_size <= 0 || epochs <= 0)
        throw std::invalid_argument("TrainConfig: counts must be positive");
    if (mask_freeze < 0) throw std::invalid_argument("TrainConfig: mask freeze must be >= 0");
}

PatchSample sample_patch(const LightField& lf, RngState& rng, int patch, int crop_side) {
    int U = lf.views_u, V = lf.views_v;
    int H = lf.amplitude.dims[2], W = lf.amplitude.dims[3];
    if (patch > H || patch > W) throw std::invalid_argument("sample_patch: patch exceeds scene extents");
    if (crop_side <= 0) throw std::invalid_argument("sample_patch: bad crop side");

    PatchSample ps;
    ps.row0 = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(H - patch + 1));
    ps.col0 = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(W - patch + 1));
    ps.offset_row = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(crop_side));
    ps.offset_col = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(crop_side));

    ps.lf.views_u = U;
    ps.lf.views_v = V;
    ps.lf.baseline_px_mm = lf.baseline_px_mm;
    ps.lf.focus_depth_mm = lf.focus_depth_mm;
    ps.lf.amplitude = Tensor({U, V, patch, patch});
    ps.lf.view_depth = Tensor({U, V, patch, patch});
    for (int u = 0; u < U; ++u)
        for (int v = 0; v < V; ++v)
            for (int r = 0; r < patch; ++r)
                for (int c = 0; c < patch; ++c) {
                    ps.lf.amplitude(u, v, r, c) = lf.amplitude(u, v, ps.row0 + r, ps.col0 + c);
                    ps.lf.view_depth(u, v, r, c) = lf.view_depth(u, v, ps.row0 + r, ps.col0 + c);
                }
    ps.gt = central_depth(ps.lf);
    return ps;
}

PipelineLossResult pipeline_loss(const PatchSample& ps, const MaskPatch& mask,
                                 const RefinerWeights& refiner, const TrainSetup& setup,
                                 const std::vector<Tensor>& noise_fields, bool want_grads,
                                 bool record_decisions) {
    int U = ps.lf.views_u, V = ps.lf.views_v;
    int p = ps.gt.dims[0];
    double views = static_cast<double>(U) * V;
    if (noise_fields.size() != 4) throw std::invalid_argument("pipeline_loss: need 4 noise fields");

    // per-view correlations carry no parameters; they enter the tape as
    // weights of the masked view average
    Tensor per_view = per_view_correlations(ps.lf, setup.tof);

    ad::Tape tape;
    tape.record_decisions = record_decisions;
    int mask_leaf = tape.leaf(mask.values);
    int tile = tape.tile_mask_op(mask_leaf, p, p, std::min(setup.crop_side, mask.patch_side),
                                 ps.offset_row, ps.offset_col);

    std::array<int, 4> buckets{};
    std::size_t plane = static_cast<std::size_t>(p) * p;
    for (int psi = 0; psi < 4; ++psi) {
        Tensor weight({U, V, p, p});
        for (int u = 0; u < U; ++u)
            for (int v = 0; v < V; ++v) {
                std::size_t src = ((static_cast<std::size_t>(psi) * U + u) * V + v) * plane;
                std::size_t dst = (static_cast<std::size_t>(u) * V + v) * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    weight.data[dst + i] =
                        static_cast<float>(static_cast<double>(per_view.data[src + i]) / views);
            }
        int avg = tape.masked_view_average(tile, weight);
        buckets[psi] = tape.add_const(avg, noise_fields[psi]);
    }

    // four-bucket phase, then depth
    int y = tape.sub(buckets[2], buckets[1]);
    int x = tape.sub(buckets[0], buckets[3]);
    int phi = tape.wrap_two_pi(tape.atan2_op(y, x));
    double mm_per_rad = setup.tof.light_speed_mm_ms / (4.0 * M_PI * setup.tof.omega_per_ms());
    int depth = tape.scale(phi, mm_per_rad);

    RefinerNodes nodes = refiner_leaves(tape, refiner);
    int mask_channels = tape.reshape(tile, {U * V, p, p});
    int refined = refine_forward_tape(tape, refiner, nodes, depth, mask_channels);

    int sl = tape.smooth_l1_map(refined, ps.gt, setup.loss.delta);
    PointCloud gt_cloud = project_points(ps.gt, setup.loss.depth_scale);
    int ch = tape.chamfer_map(refined, gt_cloud, setup.loss.depth_scale);
    int combo = tape.add_scaled(setup.loss.w_smooth, sl, setup.loss.w_chamfer, ch);
    int loss = tape.mean_all(combo);

    PipelineLossResult out;
    out.loss = tape.scalar(loss);
    out.decisions = tape.decisions;
    if (want_grads) {
        tape.backward(loss);
        out.mask_grad = tape.grad_tensor(mask_leaf);
        for (std::size_t i = 0; i < nodes.kernels.size(); ++i) {
            out.kernel_grads.push_back(tape.grad_tensor(nodes.kernels[i]));
            out.bias_grads.push_back(tape.grad_tensor(nodes.biases[i]));
        }
    }
    return out;
}

namespace {

struct ElementGrads {
    double loss = 0;
    Tensor mask;
    std::vector<Tensor> kernels;
    std::vector<Tensor> biases;
};

ElementGrads run_element(const PatchSample& ps, const MaskPatch& mask, const RefinerWeights& refiner,
                         const TrainSetup& setup, RngState rng) {
    int p = ps.gt.dims[0];
    // noise drawn up front in psi order so the stream is independent of tape
    // evaluation order; resampled every forward pass
    std::vector<Tensor> noise_fields;
    for (int psi = 0; psi < 4; ++psi) {
        double s = rng_uniform(rng, setup.noise.a, setup.noise.b);
        Tensor g = rng_gaussian(rng, {p, p}, setup.noise.mu, setup.noise.sigma);
        for (float& v : g.data) v = static_cast<float>(s * static_cast<double>(v));
        noise_fields.push_back(std::move(g));
    }
    PipelineLossResult r = pipeline_loss(ps, mask, refiner, setup, noise_fields, true, false);
    ElementGrads eg;
    eg.loss = r.loss;
    eg.mask = std::move(r.mask_grad);
    eg.kernels = std::move(r.kernel_grads);
    eg.biases = std::move(r.bias_grads);
    return eg;
}

Tensor to_grad_tensor(const std::vector<double>& acc, const std::vector<int>& dims, double scale) {
    Tensor t(dims);
    for (std::size_t i = 0; i < acc.size(); ++i) t.data[i] = static_cast<float>(acc[i] * scale);
    return t;
}

void dump_state(const MaskPatch& mask, const RefinerWeights& refiner, const std::string& stem,
                int epoch) {
    if (stem.empty()) return;
    tns_write(mask.values, stem + ".diverged.mask.tns");
    refiner_save(refiner, stem + ".diverged.weights.rfw");
    std::ofstream note(stem + ".diverged.txt", std::ios::trunc);
    note << "non-finite loss at epoch " << epoch << "\n";
}

}  // namespace

void write_epoch_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("epoch log: cannot open " + path);
    f << "epoch,loss,lr_refiner,lr_mask,throughput,holdout_fp_ratio,holdout_mae\n";
    for (const EpochLog& e : log)
        f << e.epoch << "," << format_double(e.loss) << "," << format_double(e.lr_refiner) << ","
          << format_double(e.lr_mask) << "," << format_double(e.mask_throughput) << ","
          << format_double(e.holdout_fp_ratio) << "," << format_double(e.holdout_mae) << "\n";
}

TrainResult train(const std::vector<LightField>& scenes, const LightField* holdout,
                  const MaskPatch& mask_init, const TrainSetup& setup, const TrainConfig& tcfg) {
    tcfg.validate();
    setup.noise.validate();
    setup.loss.validate();
    setup.refiner.validate();
    if (scenes.empty()) throw std::invalid_argument("train: need at least one scene");

    int U = scenes[0].views_u, V = scenes[0].views_v;
    for (const LightField& s : scenes) {
        if (s.views_u != U || s.views_v != V) throw std::invalid_argument("train: mixed view grids");
        if (tcfg.patch_size > s.amplitude.dims[2] || tcfg.patch_size > s.amplitude.dims[3])
            throw std::invalid_argument("train: patch size exceeds a scene");
    }
    if (mask_init.views_u != U || mask_init.views_v != V)
        throw std::invalid_argument("train: mask view grid does not match scenes");

    RngState root(tcfg.seed);
    TrainResult out;
    out.mask = mask_init;
    RngState init_rng = root.split(0xC0FFEE);
    out.refiner = refine_init(setup.refiner, U * V, init_rng);

    AdamState mask_state = adam_init(out.mask.values.dims);
    std::vector<AdamState> kernel_states, bias_states;
    for (const ConvLayer& l : out.refiner.layers) {
        kernel_states.push_back(adam_init(l.kernel.dims));
        bias_states.push_back(adam_init(l.bias.dims));
    }

    EvalContext holdout_ctx;
    holdout_ctx.tof = setup.tof;
    holdout_ctx.noise = setup.noise;
    holdout_ctx.loss = setup.loss;
    holdout_ctx.crop_side = setup.crop_side;
    holdout_ctx.seed = RngState(tcfg.seed).split(0x43A1).seed;

    int num_scenes = static_cast<int>(scenes.size());
    int B = tcfg.batch_size;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        // exact halving: factor is a power of two
        double lr_factor = std::ldexp(1.0, -(epoch / tcfg.halve_every));
        double lr_r = tcfg.lr_refiner * lr_factor;
        double lr_m = tcfg.lr_mask * lr_factor;
        bool update_mask = epoch >= tcfg.mask_freeze;

        double epoch_loss = 0;
        for (int si = 0; si < num_scenes; ++si) {
            std::int64_t step = static_cast<std::int64_t>(epoch) * num_scenes + si;

            std::vector<ElementGrads> results(B);
            parallel_for(B, [&](int b) {
                RngState rng = root.split(static_cast<std::uint64_t>(step) * B + b + 1);
                PatchSample ps = sample_patch(scenes[si], rng, tcfg.patch_size, setup.crop_side);
                results[b] = run_element(ps, out.mask, out.refiner, setup, rng);
            });

            // fixed batch-index accumulation order
            std::vector<double> mask_acc(out.mask.values.data.size(), 0.0);
            std::vector<std::vector<double>> k_acc, b_acc;
            for (const ConvLayer& l : out.refiner.layers) {
                k_acc.emplace_back(l.kernel.data.size(), 0.0);
                b_acc.emplace_back(l.bias.data.size(), 0.0);
            }
            double batch_loss = 0;
            for (int b = 0; b < B; ++b) {
                batch_loss += results[b].loss;
                for (std::size_t i = 0; i < mask_acc.size(); ++i)
                    mask_acc[i] += results[b].mask.data[i];
                for (std::size_t l = 0; l < k_acc.size(); ++l) {
                    for (std::size_t i = 0; i < k_acc[l].size(); ++i)
                        k_acc[l][i] += results[b].kernels[l].data[i];
                    for (std::size_t i = 0; i < b_acc[l].size(); ++i)
                        b_acc[l][i] += results[b].biases[l].data[i];
                }
            }
            batch_loss /= B;
            epoch_loss += batch_loss;

            if (!std::isfinite(batch_loss)) {
                dump_state(out.mask, out.refiner, tcfg.checkpoint_stem, epoch);
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            }

            double inv_b = 1.0 / static_cast<double>(B);
            for (std::size_t l = 0; l < out.refiner.layers.size(); ++l) {
                adam_step(out.refiner.layers[l].kernel,
                          to_grad_tensor(k_acc[l], out.refiner.layers[l].kernel.dims, inv_b),
                          kernel_states[l], lr_r);
                adam_step(out.refiner.layers[l].bias,
                          to_grad_tensor(b_acc[l], out.refiner.layers[l].bias.dims, inv_b),
                          bias_states[l], lr_r);
            }
            if (update_mask) {
                adam_step(out.mask.values, to_grad_tensor(mask_acc, out.mask.values.dims, inv_b),
                          mask_state, lr_m);
                out.mask = project_box(std::move(out.mask));
            }

            // the rectifier maps non-finite activations to zero, so a finite
            // loss does not prove healthy parameters: check them directly
            bool params_ok = out.mask.values.all_finite();
            for (const ConvLayer& l : out.refiner.layers)
                params_ok = params_ok && l.kernel.all_finite() && l.bias.all_finite();
            if (!params_ok) {
                dump_state(out.mask, out.refiner, tcfg.checkpoint_stem, epoch);
                throw std::runtime_error("train: non-finite parameters at epoch " +
                                         std::to_string(epoch));
            }
        }
        epoch_loss /= num_scenes;

        EpochLog el;
        el.epoch = epoch;
        el.loss = epoch_loss;
        el.lr_refiner = lr_r;
        el.lr_mask = lr_m;
        el.mask_throughput = throughput(out.mask);
        if (holdout) {
            SceneEvalResult he = evaluate_mask_on_scene(out.mask, &out.refiner, *holdout, holdout_ctx,
                                                        /*scene_stream=*/0);
            el.holdout_fp_ratio = he.report.fp_ratio;
            el.holdout_mae = he.report.mae;
        }
        out.log.push_back(el);

        if (tcfg.checkpoint_every > 0 && !tcfg.checkpoint_stem.empty() &&
            (epoch + 1) % tcfg.checkpoint_every == 0) {
            std::string stem = tcfg.checkpoint_stem + ".ckpt" + std::to_string(epoch + 1);
            tns_write(out.mask.values, stem + ".mask.tns");
            refiner_save(out.refiner, stem + ".weights.rfw");
            RunManifest mf;
            mf.set("epoch", static_cast<std::int64_t>(epoch + 1));
            mf.set("seed", tcfg.seed);
            mf.set("config.hash",
                   fnv1a_hex(std::to_string(tcfg.lr_refiner) + "," + std::to_string(tcfg.lr_mask) + "," +
                             std::to_string(tcfg.epochs) + "," + std::to_string(tcfg.patch_size) + "," +
                             std::to_string(tcfg.batch_size)));
            mf.write(stem + ".manifest");
        }
    }
    return out;
}

}  // namespace ctof
