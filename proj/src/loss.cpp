#include "ctof/loss.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctof/kdtree.hpp"

namespace ctof {

void LossConfig::validate() const {
    if (w_smooth < 0 || w_chamfer < 0) throw std::invalid_argument("LossConfig: weights must be >= 0");
    if (!(delta > 0)) throw std::invalid_argument("LossConfig: delta must be positive");
    if (!(depth_scale > 0)) throw std::invalid_argument("LossConfig: depth scale must be positive");
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target, double delta) {
    if (!pred.same_shape(target)) throw std::invalid_argument("smooth_l1: shape mismatch");
    if (!(delta > 0)) throw std::invalid_argument("smooth_l1: delta must be positive");
    Tensor out(pred.dims);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
        double ad = std::abs(d);
        out.data[i] = static_cast<float>(ad >= delta ? ad - delta / 2.0 : d * d / (2.0 * delta));
    }
    return out;
}

double chamfer(const PointCloud& recon, const PointCloud& gt, ChamferMode mode) {
    if (gt.points.ndim() != 2 || gt.points.dims[0] == 0)
        throw std::invalid_argument("chamfer: ground truth cloud empty");
    if (recon.points.ndim() != 2 || recon.points.dims[1] != 3)
        throw std::invalid_argument("chamfer: recon cloud must be [N,3]");

    int n = recon.points.dims[0];
    int m = gt.points.dims[0];
    double total = 0;

    if (mode == ChamferMode::bruteforce) {
        for (int i = 0; i < n; ++i) {
            double qx = recon.points(i, 0), qy = recon.points(i, 1), qz = recon.points(i, 2);
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < m; ++j) {
                double d2 = KdTree3::dist2(&gt.points.data[static_cast<std::size_t>(j) * 3], qx, qy, qz);
                if (d2 < best) best = d2;
            }
            total += std::sqrt(best);
        }
    } else {
        KdTree3 tree(gt);
        for (int i = 0; i < n; ++i) {
            auto hit = tree.nearest(recon.points(i, 0), recon.points(i, 1), recon.points(i, 2));
            total += std::sqrt(hit.dist2);
        }
    }
    return total / static_cast<double>(n);
}

double total_loss(const Tensor& refined, const Tensor& gt, const LossConfig& cfg) {
    cfg.validate();
    if (!refined.same_shape(gt)) throw std::invalid_argument("total_loss: shape mismatch");

    Tensor sl = smooth_l1(refined, gt, cfg.delta);
    double mean_sl = 0;
    for (float v : sl.data) mean_sl += v;
    mean_sl /= static_cast<double>(sl.data.size());

    PointCloud pred_cloud = project_points(refined, cfg.depth_scale);
    PointCloud gt_cloud = project_points(gt, cfg.depth_scale);
    double mean_ch = chamfer(pred_cloud, gt_cloud, ChamferMode::accelerated);

    return cfg.w_smooth * mean_sl + cfg.w_chamfer * mean_ch;
}

}  // namespace ctof
