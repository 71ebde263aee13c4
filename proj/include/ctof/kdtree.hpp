#pragma once

#include <cstdint>
#include <vector>

#include "ctof/recon.hpp"

namespace ctof {

// Exact nearest-neighbor index over a 3-D point cloud. Distances are computed
// with the same expression as the brute-force scan and ties resolve to the
// smallest point index, so query results match brute force bit for bit.
class KdTree3 {
  public:
    explicit KdTree3(const PointCloud& cloud);

    struct Hit {
        int index = -1;
        double dist2 = 0;
    };
    Hit nearest(double x, double y, double z) const;

    static double dist2(const float* p, double x, double y, double z) {
        double dx = x - static_cast<double>(p[0]);
        double dy = y - static_cast<double>(p[1]);
        double dz = z - static_cast<double>(p[2]);
        return dx * dx + dy * dy + dz * dz;
    }

  private:
    struct Node {
        int point = -1;  // index into points_
        int left = -1;
        int right = -1;
        int axis = 0;
    };
    int build(std::vector<int>& idx, int lo, int hi, int depth);
    void search(int node, double q[3], Hit& best) const;

    const Tensor* points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace ctof
