#include "ctof/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ctof {

std::pair<double, double> rmse_mae(const Tensor& pred, const Tensor& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("rmse_mae: shape mismatch");
    double se = 0, ae = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        double d = static_cast<double>(pred.data[i]) - static_cast<double>(gt.data[i]);
        se += d * d;
        ae += std::abs(d);
    }
    double n = static_cast<double>(pred.data.size());
    return {std::sqrt(se / n), ae / n};
}

std::pair<double, double> rmse_mae_region(const Tensor& pred, const Tensor& gt,
                                          const Tensor& region) {
    if (!pred.same_shape(gt) || !pred.same_shape(region))
        throw std::invalid_argument("rmse_mae_region: shape mismatch");
    double se = 0, ae = 0;
    long n = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (region.data[i] == 0.0f) continue;
        double d = static_cast<double>(pred.data[i]) - static_cast<double>(gt.data[i]);
        se += d * d;
        ae += std::abs(d);
        ++n;
    }
    if (n == 0) return {0.0, 0.0};
    return {std::sqrt(se / n), ae / n};
}

double thresh_metric(const Tensor& pred, const Tensor& gt, double x_mm) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("thresh_metric: shape mismatch");
    if (!(x_mm > 0)) throw std::invalid_argument("thresh_metric: x must be positive");
    long over = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        if (std::abs(static_cast<double>(pred.data[i]) - static_cast<double>(gt.data[i])) > x_mm)
            ++over;
    return 100.0 * static_cast<double>(over) / static_cast<double>(pred.data.size());
}

long fp_band_count(const PointCloud& cloud, double z_fg, double z_bg, double eps_mm) {
    if (!(z_fg + eps_mm < z_bg - eps_mm))
        throw std::invalid_argument("fp_band_count: band is empty or inverted");
    double lo = (z_fg + eps_mm) * cloud.depth_scale;
    double hi = (z_bg - eps_mm) * cloud.depth_scale;
    long count = 0;
    int n = cloud.points.dims[0];
    for (int i = 0; i < n; ++i) {
        double z = cloud.points(i, 2);
        if (z > lo && z < hi) ++count;
    }
    return count;
}

double fp_ratio(const PointCloud& cloud, double z_fg, double z_bg, double eps_mm,
                double reference_count) {
    if (!(reference_count > 0)) throw std::invalid_argument("fp_ratio: reference count must be positive");
    return static_cast<double>(fp_band_count(cloud, z_fg, z_bg, eps_mm)) / reference_count;
}

Tensor flat_region_mask(const Tensor& gt, int margin_px) {
    if (gt.ndim() != 2) throw std::invalid_argument("flat_region_mask: depth must be [H,W]");
    int H = gt.dims[0], W = gt.dims[1];
    Tensor region({H, W}, 1.0f);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            float center = gt(r, c);
            bool flat = true;
            for (int dr = -margin_px; dr <= margin_px && flat; ++dr)
                for (int dc = -margin_px; dc <= margin_px; ++dc) {
                    int rr = std::clamp(r + dr, 0, H - 1);
                    int cc = std::clamp(c + dc, 0, W - 1);
                    if (gt(rr, cc) != center) {
                        flat = false;
                        break;
                    }
                }
            region(r, c) = flat ? 1.0f : 0.0f;
        }
    return region;
}

double robust_flat_sigma(const Tensor& pred, const Tensor& gt, const Tensor& region) {
    if (!pred.same_shape(gt) || !pred.same_shape(region))
        throw std::invalid_argument("robust_flat_sigma: shape mismatch");
    std::vector<double> err;
    err.reserve(pred.data.size());
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        if (region.data[i] != 0.0f)
            err.push_back(static_cast<double>(pred.data[i]) - static_cast<double>(gt.data[i]));
    if (err.empty()) return 0.0;
    auto median = [](std::vector<double>& v) {
        std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + mid, v.end());
        return v[mid];
    };
    double med = median(err);
    for (double& e : err) e = std::abs(e - med);
    return 1.4826 * median(err);
}

namespace {

struct PlanePair {
    bool two_plane = false;
    double z_fg = 0, z_bg = 0;
};

PlanePair detect_planes(const Tensor& gt) {
    std::set<float> values(gt.data.begin(), gt.data.end());
    PlanePair pp;
    if (values.size() == 2) {
        pp.two_plane = true;
        pp.z_fg = static_cast<double>(*values.begin());
        pp.z_bg = static_cast<double>(*values.rbegin());
    }
    return pp;
}

struct FpMeasurement {
    bool valid = false;
    double count = 0;
    double epsilon = 0;
};

FpMeasurement measure_fp(const Tensor& depth, const Tensor& gt, const PlanePair& pp,
                         const EvalContext& ctx, double s_z) {
    FpMeasurement m;
    if (!pp.two_plane) return m;
    Tensor region = flat_region_mask(gt, ctx.fp_margin_px);
    double sigma = robust_flat_sigma(depth, gt, region);
    double gap = pp.z_bg - pp.z_fg;
    double eps = std::max(3.0 * sigma, 0.001 * gap);
    if (!(pp.z_fg + eps < pp.z_bg - eps)) return m;  // noise floor swallows the band
    m.valid = true;
    m.epsilon = eps;
    m.count = static_cast<double>(
        fp_band_count(project_points(depth, s_z), pp.z_fg, pp.z_bg, eps));
    return m;
}

Tensor reconstruct_depth(const MaskPatch& mask, const LightField& scene, const EvalContext& ctx,
                         RngState rng) {
    MicrolensMask tiled = tile_mask(mask, scene.amplitude.dims[2], scene.amplitude.dims[3],
                                    std::min(ctx.crop_side, mask.patch_side), 0, 0);
    Tensor aperture = full_aperture(scene.views_u, scene.views_v);
    ViewCorrelations vc = correlation_stack(scene, tiled, aperture, ctx.tof);
    CorrelationStack noisy = add_noise(vc.averaged, ctx.noise, rng);
    PhaseEstimate pe = phase_estimate(noisy);
    return depth_from_phase(pe.phase, ctx.tof);
}

}  // namespace

SceneEvalResult evaluate_mask_on_scene(const MaskPatch& mask, const RefinerWeights* refiner,
                                       const LightField& scene, const EvalContext& ctx,
                                       std::uint64_t scene_stream) {
    ctx.noise.validate();
    ctx.loss.validate();
    int H = scene.amplitude.dims[2], W = scene.amplitude.dims[3];
    Tensor gt = central_depth(scene);

    RngState eval_rng = RngState(ctx.seed).split(scene_stream);
    SceneEvalResult res;
    res.depth_raw = reconstruct_depth(mask, scene, ctx, eval_rng);
    if (refiner) {
        MicrolensMask tiled =
            tile_mask(mask, H, W, std::min(ctx.crop_side, mask.patch_side), 0, 0);
        res.depth_final = refine_forward(res.depth_raw, tiled, *refiner);
    } else {
        res.depth_final = res.depth_raw;
    }

    auto [rmse, mae] = rmse_mae(res.depth_final, gt);
    res.report.rmse = rmse;
    res.report.mae = mae;
    res.report.thresh3 = thresh_metric(res.depth_final, gt, 3.0);
    res.report.thresh15 = thresh_metric(res.depth_final, gt, 15.0);
    res.report.throughput = throughput(mask);
    res.report.chamfer = chamfer(project_points(res.depth_final, ctx.loss.depth_scale),
                                 project_points(gt, ctx.loss.depth_scale), ChamferMode::accelerated);

    Tensor region = flat_region_mask(gt, ctx.fp_margin_px);
    res.flat_mae = rmse_mae_region(res.depth_final, gt, region).second;

    PlanePair pp = detect_planes(gt);
    FpMeasurement own = measure_fp(res.depth_final, gt, pp, ctx, ctx.loss.depth_scale);
    if (own.valid) {
        // reference: the open aperture through the same pipeline and noise seed
        MaskPatch ones(mask.views_u, mask.views_v, mask.patch_side, 1.0f);
        Tensor ref_depth =
            reconstruct_depth(ones, scene, ctx, RngState(ctx.seed).split(scene_stream));
        FpMeasurement ref = measure_fp(ref_depth, gt, pp, ctx, ctx.loss.depth_scale);
        if (ref.valid && ref.count > 0) {
            res.report.fp_ratio = own.count / ref.count;
            res.report.fp_valid = true;
            res.fp_count = own.count;
            res.fp_reference = ref.count;
            res.fp_epsilon = own.epsilon;
        }
    }
    return res;
}

SuiteEval evaluate_mask(const MaskPatch& mask, const RefinerWeights* refiner,
                        const std::vector<LightField>& scenes, const EvalContext& ctx) {
    if (scenes.empty()) throw std::invalid_argument("evaluate_mask: no scenes");
    SuiteEval out;
    double fp_sum = 0;
    int fp_n = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        SceneEvalResult r = evaluate_mask_on_scene(mask, refiner, scenes[i], ctx, i);
        out.per_scene.push_back(r.report);
        out.aggregate.rmse += r.report.rmse;
        out.aggregate.mae += r.report.mae;
        out.aggregate.thresh3 += r.report.thresh3;
        out.aggregate.thresh15 += r.report.thresh15;
        out.aggregate.chamfer += r.report.chamfer;
        if (r.report.fp_valid) {
            fp_sum += r.report.fp_ratio;
            ++fp_n;
        }
    }
    double n = static_cast<double>(scenes.size());
    out.aggregate.rmse /= n;
    out.aggregate.mae /= n;
    out.aggregate.thresh3 /= n;
    out.aggregate.thresh15 /= n;
    out.aggregate.chamfer /= n;
    out.aggregate.throughput = throughput(mask);
    if (fp_n > 0) {
        out.aggregate.fp_ratio = fp_sum / fp_n;
        out.aggregate.fp_valid = true;
    }
    return out;
}

}  // namespace ctof
