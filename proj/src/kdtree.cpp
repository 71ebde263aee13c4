#include "ctof/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace ctof {

KdTree3::KdTree3(const PointCloud& cloud) : points_(&cloud.points) {
    if (cloud.points.ndim() != 2 || cloud.points.dims[1] != 3)
        throw std::invalid_argument("KdTree3: cloud must be [N,3]");
    int n = cloud.points.dims[0];
    if (n == 0) throw std::invalid_argument("KdTree3: empty cloud");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    nodes_.reserve(n);
    root_ = build(idx, 0, n, 0);
}

int KdTree3::build(std::vector<int>& idx, int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    int axis = depth % 3;
    int mid = (lo + hi) / 2;
    std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi, [&](int a, int b) {
        float pa = (*points_)(a, axis), pb = (*points_)(b, axis);
        return pa < pb || (pa == pb && a < b);
    });
    Node node;
    node.point = idx[mid];
    node.axis = axis;
    int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    nodes_[self].left = build(idx, lo, mid, depth + 1);
    nodes_[self].right = build(idx, mid + 1, hi, depth + 1);
    return self;
}

void KdTree3::search(int node, double q[3], Hit& best) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const float* p = &points_->data[static_cast<std::size_t>(n.point) * 3];
    double d2 = dist2(p, q[0], q[1], q[2]);
    if (d2 < best.dist2 || (d2 == best.dist2 && n.point < best.index)) {
        best.dist2 = d2;
        best.index = n.point;
    }
    double split = static_cast<double>(p[n.axis]);
    double diff = q[n.axis] - split;
    int near = diff < 0 ? n.left : n.right;
    int far = diff < 0 ? n.right : n.left;
    search(near, q, best);
    // descend on equality too, so index tie-breaking stays exact
    if (diff * diff <= best.dist2) search(far, q, best);
}

KdTree3::Hit KdTree3::nearest(double x, double y, double z) const {
    Hit best;
    best.index = points_->dims[0];  // sentinel larger than any real index
    best.dist2 = std::numeric_limits<double>::infinity();
    double q[3] = {x, y, z};
    search(root_, q, best);
    return best;
}

}  // namespace ctof
