#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ctof/recon.hpp"
#include "ctof/tensor.hpp"

namespace ctof::ad {

// Decision-record tags (high byte) distinguishing which discrete branch a
// forward pass took; the low bits carry the branch value.
inline constexpr std::int32_t kDecisionRectifier = 1 << 24;
inline constexpr std::int32_t kDecisionClamp = 2 << 24;
inline constexpr std::int32_t kDecisionPhaseWrap = 3 << 24;
inline constexpr std::int32_t kDecisionNearestNeighbor = 4 << 24;

// Reverse-mode tape over dense arrays. Node values and gradients are held in
// 64-bit buffers; public tensors are converted on entry and exit. Operations
// append nodes in topological order, so backward() is a single reverse sweep
// that visits each node once.
//
// When record_decisions is set, every discrete branch taken during the
// forward pass (rectifier sign, clamp region, phase-wrap branch,
// nearest-neighbor assignment) is appended to `decisions`; two forward passes
// whose decision streams differ straddle a kink of the objective.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool record_decisions = false;
    std::vector<std::int32_t> decisions;

    // leaves
    int constant(const Tensor& t);
    int constant(std::vector<int> dims, std::vector<double> values);
    int leaf(const Tensor& t);  // differentiable parameter

    // elementwise
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int add_const(int a, const Tensor& t);
    int scale(int a, double k);
    int add_scaled(double alpha, int a, double beta, int b);
    int cos_op(int a);
    int atan2_op(int y, int x);
    int relu(int a);
    int clamp_op(int a, double lo, double hi);
    int wrap_two_pi(int a);

    // structure
    int reshape(int a, std::vector<int> dims);
    int concat_channels(int a, int b);  // [Ca,H,W] + [Cb,H,W]
    int tile_mask_op(int patch, int H, int W, int crop_side, int offset_row, int offset_col);
    int masked_view_average(int tiled, const Tensor& weight);  // weight [U,V,H,W] -> [H,W]
    int conv2d(int input, int kernel, int bias, int stride);   // 3x3, reflect-101 pad
    int upsample2_nearest(int a, int out_h, int out_w);

    // reductions / losses
    int mean_all(int a);
    int smooth_l1_map(int pred, const Tensor& target, double delta);
    int chamfer_map(int depth, const PointCloud& gt, double depth_scale);

    void backward(int loss);

    const std::vector<int>& dims(int id) const { return nodes_[id].dims; }
    const std::vector<double>& value(int id) const { return nodes_[id].val; }
    const std::vector<double>& grad(int id) const { return nodes_[id].grad; }
    double scalar(int id) const { return nodes_[id].val.at(0); }
    Tensor value_tensor(int id) const;
    Tensor grad_tensor(int id) const;

    std::size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        std::vector<int> dims;
        std::vector<double> val;
        std::vector<double> grad;
        std::vector<int> parents;
        std::function<void(Tape&, Node&)> back;
        bool requires_grad = false;
        bool touched = false;  // received any gradient during backward
    };

    int push(Node n);
    Node& node(int id) { return nodes_[id]; }
    void ensure_grad(Node& n) {
        if (n.grad.empty()) n.grad.assign(n.val.size(), 0.0);
    }
    void accumulate(int id, std::size_t elem, double g) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        ensure_grad(n);
        n.grad[elem] += g;
        n.touched = true;
    }

    std::vector<Node> nodes_;

    friend struct TapeOps;
};

}  // namespace ctof::ad
