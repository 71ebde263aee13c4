#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctof/loss.hpp"
#include "ctof/mask.hpp"
#include "ctof/refiner.hpp"
#include "ctof/scene.hpp"
#include "ctof/tof_model.hpp"

namespace ctof {

struct TrainConfig {
    double lr_refiner = 0.004;
    double lr_mask = 0.1;
    int halve_every = 80;   // both rates halve every this many epochs
    int mask_freeze = 70;   // mask (and its moments) untouched before this epoch
    int patch_size = 80;
    int batch_size = 4;
    int epochs = 200;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // 0 disables
    std::string checkpoint_stem;
    void validate() const;
};

struct TrainSetup {
    ToFConfig tof;
    NoiseConfig noise;
    LossConfig loss;
    RefinerConfig refiner;
    int crop_side = 64;  // mask tiling crop K
};

struct PatchSample {
    LightField lf;  // [U,V,p,p] amplitude + view depth crop
    Tensor gt;      // [p,p] central-view depth
    int offset_row = 0;
    int offset_col = 0;
    int row0 = 0;
    int col0 = 0;
};

// Uniform spatial window plus a uniform mask tiling offset in [0, K)^2.
PatchSample sample_patch(const LightField& lf, RngState& rng, int patch, int crop_side);

// One recorded forward/backward of the full differentiable pipeline
// (mask tile -> masked view average -> four-bucket phase -> depth -> refiner
// -> combined smooth-L1/chamfer loss) on a sampled patch. Noise fields are
// additive constants supplied by the caller (one [p,p] field per psi offset).
struct PipelineLossResult {
    double loss = 0;
    Tensor mask_grad;                   // [U,V,P,P]
    std::vector<Tensor> kernel_grads;   // per refiner layer
    std::vector<Tensor> bias_grads;
    std::vector<std::int32_t> decisions;  // discrete branches, when recorded
};

PipelineLossResult pipeline_loss(const PatchSample& ps, const MaskPatch& mask,
                                 const RefinerWeights& refiner, const TrainSetup& setup,
                                 const std::vector<Tensor>& noise_fields, bool want_grads,
                                 bool record_decisions);

struct EpochLog {
    int epoch = 0;
    double loss = 0;
    double lr_refiner = 0;
    double lr_mask = 0;
    double mask_throughput = 0;
    double holdout_fp_ratio = 0;
    double holdout_mae = 0;
};

struct TrainResult {
    MaskPatch mask;
    RefinerWeights refiner;
    std::vector<EpochLog> log;
};

void write_epoch_log_csv(const std::vector<EpochLog>& log, const std::string& path);

// Joint mask/refiner training. Per epoch: one batch per training scene, noise
// resampled every forward pass, adaptive steps on the refiner always and on
// the mask only after the freeze, box projection after each mask step, both
// learning rates halved every `halve_every` epochs. Bit-reproducible for a
// given seed regardless of worker thread count.
TrainResult train(const std::vector<LightField>& scenes, const LightField* holdout,
                  const MaskPatch& mask_init, const TrainSetup& setup, const TrainConfig& tcfg);

}  // namespace ctof
