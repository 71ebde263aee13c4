#include "ctof/refiner.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctof {

void RefinerConfig::validate() const {
    if (num_layers < 2) throw std::invalid_argument("RefinerConfig: need at least 2 layers");
    if (hidden_channels < 1) throw std::invalid_argument("RefinerConfig: need at least 1 channel");
}

namespace {

bool uses_downsample(const RefinerConfig& cfg) { return cfg.downsample && cfg.num_layers >= 3; }

int layer_in_channels(const RefinerConfig& cfg, int mask_channels, int i) {
    return i == 0 ? 1 + mask_channels : cfg.hidden_channels;
}

int layer_out_channels(const RefinerConfig& cfg, int i) {
    return i == cfg.num_layers - 1 ? 1 : cfg.hidden_channels;
}

int layer_stride(const RefinerConfig& cfg, int i) { return uses_downsample(cfg) && i == 1 ? 2 : 1; }

}  // namespace

void RefinerWeights::validate() const {
    cfg.validate();
    if (mask_channels < 1) throw std::invalid_argument("RefinerWeights: mask channels missing");
    if (static_cast<int>(layers.size()) != cfg.num_layers)
        throw std::invalid_argument("RefinerWeights: layer count mismatch");
    for (int i = 0; i < cfg.num_layers; ++i) {
        const ConvLayer& l = layers[i];
        int cin = layer_in_channels(cfg, mask_channels, i);
        int cout = layer_out_channels(cfg, i);
        if (l.kernel.ndim() != 4 || l.kernel.dims[0] != cout || l.kernel.dims[1] != cin ||
            l.kernel.dims[2] != 3 || l.kernel.dims[3] != 3)
            throw std::invalid_argument("RefinerWeights: kernel shape broken at layer " +
                                        std::to_string(i));
        if (l.bias.ndim() != 1 || l.bias.dims[0] != cout)
            throw std::invalid_argument("RefinerWeights: bias shape broken at layer " +
                                        std::to_string(i));
    }
}

std::int64_t RefinerWeights::parameter_count() const {
    std::int64_t n = 0;
    for (const ConvLayer& l : layers) n += l.kernel.numel() + l.bias.numel();
    return n;
}

RefinerWeights refine_init(const RefinerConfig& cfg, int mask_channels, RngState& rng) {
    cfg.validate();
    RefinerWeights w;
    w.cfg = cfg;
    w.mask_channels = mask_channels;
    for (int i = 0; i < cfg.num_layers; ++i) {
        int cin = layer_in_channels(cfg, mask_channels, i);
        int cout = layer_out_channels(cfg, i);
        ConvLayer l;
        if (i == cfg.num_layers - 1) {
            l.kernel = Tensor::zeros({cout, cin, 3, 3});  // identity residual at init
        } else {
            double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * 9.0));
            l.kernel = rng_gaussian(rng, {cout, cin, 3, 3}, 0.0, stddev);
        }
        l.bias = Tensor::zeros({cout});
        w.layers.push_back(std::move(l));
    }
    w.validate();
    return w;
}

RefinerNodes refiner_constants(ad::Tape& tape, const RefinerWeights& w) {
    RefinerNodes n;
    for (const ConvLayer& l : w.layers) {
        n.kernels.push_back(tape.constant(l.kernel));
        n.biases.push_back(tape.constant(l.bias));
    }
    return n;
}

RefinerNodes refiner_leaves(ad::Tape& tape, const RefinerWeights& w) {
    RefinerNodes n;
    for (const ConvLayer& l : w.layers) {
        n.kernels.push_back(tape.leaf(l.kernel));
        n.biases.push_back(tape.leaf(l.bias));
    }
    return n;
}

int refine_forward_tape(ad::Tape& tape, const RefinerWeights& w, const RefinerNodes& nodes,
                        int depth_node, int mask_channels_node) {
    w.validate();
    const auto& ddims = tape.dims(depth_node);
    if (ddims.size() != 2) throw std::invalid_argument("refine_forward: depth must be [H,W]");
    int H = ddims[0], W = ddims[1];
    if (H < 8 || W < 8) throw std::invalid_argument("refine_forward: input below 8x8");
    const auto& mdims = tape.dims(mask_channels_node);
    if (mdims.size() != 3 || mdims[0] != w.mask_channels || mdims[1] != H || mdims[2] != W)
        throw std::invalid_argument("refine_forward: mask channels must be [U*V,H,W]");

    int depth_ch = tape.reshape(depth_node, {1, H, W});
    int x = tape.concat_channels(depth_ch, mask_channels_node);

    int n = w.cfg.num_layers;
    int a0 = tape.relu(tape.conv2d(x, nodes.kernels[0], nodes.biases[0], layer_stride(w.cfg, 0)));
    int cur = a0;
    for (int i = 1; i < n - 1; ++i)
        cur = tape.relu(tape.conv2d(cur, nodes.kernels[i], nodes.biases[i], layer_stride(w.cfg, i)));
    if (uses_downsample(w.cfg)) cur = tape.add(tape.upsample2_nearest(cur, H, W), a0);
    int residual = tape.conv2d(cur, nodes.kernels[n - 1], nodes.biases[n - 1], 1);  // [1,H,W]

    int refined = tape.relu(tape.add(depth_ch, residual));
    return tape.reshape(refined, {H, W});
}

Tensor refine_forward(const Tensor& depth, const MicrolensMask& mask, const RefinerWeights& w) {
    if (depth.ndim() != 2) throw std::invalid_argument("refine_forward: depth must be [H,W]");
    if (mask.height != depth.dims[0] || mask.width != depth.dims[1])
        throw std::invalid_argument("refine_forward: mask tiling does not match depth extents");
    if (mask.patch.views_u * mask.patch.views_v != w.mask_channels)
        throw std::invalid_argument("refine_forward: mask view count does not match weights");

    ad::Tape tape;
    int d = tape.constant(depth);
    Tensor chans = mask.materialize();
    int m = tape.constant({w.mask_channels, depth.dims[0], depth.dims[1]},
                          std::vector<double>(chans.data.begin(), chans.data.end()));
    RefinerNodes nodes = refiner_constants(tape, w);
    int out = refine_forward_tape(tape, w, nodes, d, m);
    return tape.value_tensor(out);
}

void refiner_save(const RefinerWeights& w, const std::string& path) {
    w.validate();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("refiner_save: cannot open " + path);
    f << "RFW1\n"
      << "hidden_channels=" << w.cfg.hidden_channels << "\n"
      << "num_layers=" << w.cfg.num_layers << "\n"
      << "downsample=" << (w.cfg.downsample ? 1 : 0) << "\n"
      << "mask_channels=" << w.mask_channels << "\n";
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        const ConvLayer& l = w.layers[i];
        f << "layer " << i << " kernel";
        for (int d : l.kernel.dims) f << " " << d;
        f << " bias";
        for (int d : l.bias.dims) f << " " << d;
        f << "\n";
    }
    f << "end\n";
    for (const ConvLayer& l : w.layers) {
        tns_write_stream(f, l.kernel, path);
        tns_write_stream(f, l.bias, path);
    }
    if (!f) throw std::runtime_error("refiner_save: write failed for " + path);
}

RefinerWeights refiner_load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("refiner_load: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "RFW1")
        throw std::runtime_error("refiner_load: bad magic in " + path);

    RefinerWeights w;
    int declared_layers = 0;
    while (std::getline(f, line)) {
        if (line == "end") break;
        if (line.rfind("layer ", 0) == 0) {
            ++declared_layers;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("refiner_load: bad manifest line: " + line);
        std::string key = line.substr(0, eq);
        int value = std::stoi(line.substr(eq + 1));
        if (key == "hidden_channels") w.cfg.hidden_channels = value;
        else if (key == "num_layers") w.cfg.num_layers = value;
        else if (key == "downsample") w.cfg.downsample = value != 0;
        else if (key == "mask_channels") w.mask_channels = value;
        else throw std::runtime_error("refiner_load: unknown manifest key: " + key);
    }
    if (declared_layers != w.cfg.num_layers)
        throw std::runtime_error("refiner_load: manifest layer count mismatch in " + path);
    for (int i = 0; i < w.cfg.num_layers; ++i) {
        ConvLayer l;
        l.kernel = tns_read_stream(f, path);
        l.bias = tns_read_stream(f, path);
        w.layers.push_back(std::move(l));
    }
    w.validate();
    return w;
}

}  // namespace ctof
