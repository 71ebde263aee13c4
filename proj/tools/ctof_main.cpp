// Batch front end: scene synthesis, masked ToF simulation, joint mask/refiner
// optimization, metric evaluation and export.
//
// Exit codes: 0 success, 1 usage error, 2 runtime/numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ctof/formats.hpp"
#include "ctof/manifest.hpp"
#include "ctof/metrics.hpp"
#include "ctof/threading.hpp"
#include "ctof/train.hpp"

namespace {

using namespace ctof;

struct CommonFlags {
    std::string config_path;
    int threads = 1;
};

// precedence: explicit flag > config file > built-in default. Keys may use
// underscores (mod_freq_hz) or dashes (mod-freq-hz).
void apply_config_overrides(CLI::App* cmd, const std::string& config_path) {
    if (config_path.empty()) return;
    auto cfg = parse_config_file(config_path);
    for (auto& [key, value] : cfg) {
        std::string dashed = key;
        for (char& c : dashed)
            if (c == '_') c = '-';
        CLI::Option* opt = cmd->get_option_no_throw("--" + dashed);
        if (!opt) opt = cmd->get_option_no_throw("--" + key);
        if (!opt || opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

SceneParams collect_params(const std::vector<std::string>& kvs) {
    SceneParams p;
    for (const std::string& kv : kvs) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--param", "expected key=value, got '" + kv + "'");
        p[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    return p;
}

MaskPatch load_mask_arg(const std::string& spec, int U, int V, int P, std::uint64_t seed) {
    if (spec.size() > 4 && spec.substr(spec.size() - 4) == ".tns") {
        Tensor t = tns_read(spec);
        if (t.ndim() != 4) throw std::runtime_error("mask file must be [U,V,P,P]: " + spec);
        MaskPatch m;
        m.values = t;
        m.views_u = t.dims[0];
        m.views_v = t.dims[1];
        m.patch_side = t.dims[2];
        return m;
    }
    RngState rng = RngState(seed).split(0x3A5C);
    return init_mask(parse_mask_pattern(spec), U, V, P, rng);
}

double scene_min_depth(const LayeredScene& s) {
    double z = s.layers.front().depth_mm;
    for (const auto& l : s.layers) z = std::min(z, l.depth_mm);
    return z;
}

int cmd_scene(CLI::App& app) {
    auto* cmd = app.add_subcommand("scene", "synthesize a layered scene into a light field");
    auto opts = std::make_shared<CommonFlags>();
    auto preset = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>();
    auto size = std::make_shared<int>(64);
    auto views = std::make_shared<int>(9);
    auto fg = std::make_shared<double>(0);
    auto bg = std::make_shared<double>(0);
    auto depth = std::make_shared<double>(0);
    auto focus = std::make_shared<double>(0);
    auto baseline = std::make_shared<double>(0);
    auto max_disp = std::make_shared<double>(3.0);
    auto extra = std::make_shared<std::vector<std::string>>();

    cmd->add_option("--preset", *preset, "flat|edge|bars|staircase|disk")->required();
    cmd->add_option("--out", *out, "output stem")->required();
    cmd->add_option("--seed", *seed, "texture seed")->required();
    cmd->add_option("--size", *size, "sensor side in pixels");
    cmd->add_option("--views", *views, "sub-aperture views per axis (odd)");
    cmd->add_option("--fg", *fg, "foreground depth mm");
    cmd->add_option("--bg", *bg, "background depth mm");
    cmd->add_option("--depth", *depth, "flat depth mm");
    cmd->add_option("--focus", *focus, "focus depth mm (default: farthest layer)");
    cmd->add_option("--baseline", *baseline, "baseline px*mm (default from --max-disparity)");
    cmd->add_option("--max-disparity", *max_disp, "target peak disparity in px");
    cmd->add_option("--param", *extra, "extra preset params key=value");
    cmd->add_option("--config", opts->config_path, "key=value config file");
    cmd->add_option("--threads", opts->threads, "worker threads");

    cmd->callback([=]() {
        apply_config_overrides(cmd, opts->config_path);
        set_worker_threads(opts->threads);

        SceneParams params = collect_params(*extra);
        params["size"] = *size;
        if (cmd->count("--fg")) params["fg"] = *fg;
        if (cmd->count("--bg")) params["bg"] = *bg;
        if (cmd->count("--depth")) params["depth"] = *depth;

        RngState rng(*seed);
        LayeredScene scene = preset_scene(*preset, params, rng);
        double focus_mm = *focus > 0 ? *focus : scene.layers.back().depth_mm;
        double base = *baseline;
        if (base <= 0)
            base = baseline_for_max_disparity(scene_min_depth(scene), focus_mm, *views, *max_disp);
        LightField lf = render_lightfield(scene, *views, *views, base, focus_mm);
        lightfield_save(lf, *out);

        RunManifest mf;
        mf.set("command", std::string("scene"));
        mf.set("version", std::string(kToolVersion));
        mf.set("preset", *preset);
        mf.set("seed", *seed);
        mf.set("size", static_cast<std::int64_t>(*size));
        mf.set("views", static_cast<std::int64_t>(*views));
        mf.set("baseline", base);
        mf.set("focus_depth_mm", focus_mm);
        for (auto& [k, v] : params) mf.set("param." + k, v);
        mf.set("timestamp", iso_timestamp());
        mf.set_output_hash("amp", *out + ".amp.tns");
        mf.set_output_hash("dep", *out + ".dep.tns");
        mf.set_output_hash("meta", *out + ".meta");
        mf.write(*out + ".manifest");
        std::cout << "scene: wrote " << *out << ".{amp.tns,dep.tns,meta}\n";
    });
    return 0;
}

void add_tof_flags(CLI::App* cmd, std::shared_ptr<ToFConfig> tof, std::shared_ptr<NoiseConfig> noise,
                   std::shared_ptr<std::string> noise_switch) {
    cmd->add_option("--mod-freq-hz", tof->mod_freq_hz, "modulation frequency");
    cmd->add_option("--gain", tof->gain, "sensor gain g");
    cmd->add_option("--integration-ms", tof->integration_ms, "integration time T");
    cmd->add_option("--noise-a", noise->a, "uniform scale lower bound");
    cmd->add_option("--noise-b", noise->b, "uniform scale upper bound");
    cmd->add_option("--noise-mu", noise->mu, "gaussian mean");
    cmd->add_option("--noise-sigma", noise->sigma, "gaussian stddev");
    cmd->add_option("--noise", *noise_switch, "on|off")->default_str("on");
}

void manifest_tof(RunManifest& mf, const ToFConfig& tof, const NoiseConfig& noise) {
    mf.set("mod_freq_hz", tof.mod_freq_hz);
    mf.set("gain", tof.gain);
    mf.set("integration_ms", tof.integration_ms);
    mf.set("noise_a", noise.a);
    mf.set("noise_b", noise.b);
    mf.set("noise_mu", noise.mu);
    mf.set("noise_sigma", noise.sigma);
}

int cmd_simulate(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate", "render masked correlation images and reconstruct depth");
    auto opts = std::make_shared<CommonFlags>();
    auto scene = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto mask_spec = std::make_shared<std::string>("ones");
    auto weights_path = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>();
    auto crop = std::make_shared<int>(64);
    auto patch_side = std::make_shared<int>(80);
    auto off_r = std::make_shared<int>(0);
    auto off_c = std::make_shared<int>(0);
    auto tof = std::make_shared<ToFConfig>();
    auto noise = std::make_shared<NoiseConfig>();
    auto noise_switch = std::make_shared<std::string>("on");

    cmd->add_option("--scene", *scene, "scene stem from `scene`")->required();
    cmd->add_option("--out", *out, "output stem")->required();
    cmd->add_option("--seed", *seed, "noise seed")->required();
    cmd->add_option("--mask-pattern,--mask", *mask_spec, "pattern spec or .tns mask file")
        ->required();
    cmd->add_option("--weights", *weights_path, "refiner weights container");
    cmd->add_option("--crop", *crop, "mask tiling crop side K");
    cmd->add_option("--patch-side", *patch_side, "mask patch side P for generated patterns");
    cmd->add_option("--offset-row", *off_r, "mask tiling row offset");
    cmd->add_option("--offset-col", *off_c, "mask tiling col offset");
    add_tof_flags(cmd, tof, noise, noise_switch);
    cmd->add_option("--config", opts->config_path, "key=value config file");
    cmd->add_option("--threads", opts->threads, "worker threads");

    cmd->callback([=]() {
        apply_config_overrides(cmd, opts->config_path);
        set_worker_threads(opts->threads);
        if (*noise_switch == "off") *noise = NoiseConfig::off();

        LightField lf = lightfield_load(*scene);
        int H = lf.amplitude.dims[2], W = lf.amplitude.dims[3];
        MaskPatch mask = load_mask_arg(*mask_spec, lf.views_u, lf.views_v, *patch_side, *seed);
        if (mask.views_u != lf.views_u || mask.views_v != lf.views_v)
            throw std::runtime_error("simulate: mask views do not match scene views");
        MicrolensMask tiled =
            tile_mask(mask, H, W, std::min(*crop, mask.patch_side), *off_r, *off_c);

        ViewCorrelations vc = correlation_stack(lf, tiled, full_aperture(lf.views_u, lf.views_v), *tof);
        RngState rng = RngState(*seed).split(0x51E0);
        CorrelationStack noisy = add_noise(vc.averaged, *noise, rng);
        PhaseEstimate pe = phase_estimate(noisy);
        Tensor depth = depth_from_phase(pe.phase, *tof);

        tns_write(noisy.images, *out + ".corr.tns");
        tns_write(depth, *out + ".depth.tns");

        bool refined = false;
        if (!weights_path->empty()) {
            RefinerWeights w = refiner_load(*weights_path);
            Tensor d2 = refine_forward(depth, tiled, w);
            tns_write(d2, *out + ".refined.tns");
            refined = true;
        }

        RunManifest mf;
        mf.set("command", std::string("simulate"));
        mf.set("version", std::string(kToolVersion));
        mf.set("scene", *scene);
        mf.set("mask", *mask_spec);
        mf.set("seed", *seed);
        mf.set("crop", static_cast<std::int64_t>(*crop));
        mf.set("offset_row", static_cast<std::int64_t>(*off_r));
        mf.set("offset_col", static_cast<std::int64_t>(*off_c));
        mf.set("throughput", throughput(mask));
        manifest_tof(mf, *tof, *noise);
        mf.set("timestamp", iso_timestamp());
        mf.set_input_hash("amp", *scene + ".amp.tns");
        mf.set_input_hash("dep", *scene + ".dep.tns");
        mf.set_output_hash("corr", *out + ".corr.tns");
        mf.set_output_hash("depth", *out + ".depth.tns");
        if (refined) mf.set_output_hash("refined", *out + ".refined.tns");
        mf.write(*out + ".manifest");
        std::cout << "simulate: throughput " << format_double(throughput(mask)) << ", wrote " << *out
                  << ".{corr,depth" << (refined ? ",refined" : "") << "}.tns\n";
    });
    return 0;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_optimize(CLI::App& app) {
    auto* cmd = app.add_subcommand("optimize", "jointly train mask patch and refiner");
    auto opts = std::make_shared<CommonFlags>();
    auto scenes_csv = std::make_shared<std::string>();
    auto holdout_stem = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto mask_init_spec = std::make_shared<std::string>("circle:5");
    auto tcfg = std::make_shared<TrainConfig>();
    auto lcfg = std::make_shared<LossConfig>();
    auto rcfg = std::make_shared<RefinerConfig>();
    auto crop = std::make_shared<int>(64);
    auto patch_side = std::make_shared<int>(80);
    auto tof = std::make_shared<ToFConfig>();
    auto noise = std::make_shared<NoiseConfig>();
    auto noise_switch = std::make_shared<std::string>("on");

    cmd->add_option("--scenes", *scenes_csv, "comma-separated training scene stems")->required();
    cmd->add_option("--out", *out, "output stem")->required();
    cmd->add_option("--seed", tcfg->seed, "training seed")->required();
    cmd->add_option("--holdout", *holdout_stem, "held-out scene stem for per-epoch metrics");
    cmd->add_option("--mask-init", *mask_init_spec, "initial mask pattern or .tns file");
    cmd->add_option("--epochs", tcfg->epochs, "training epochs");
    cmd->add_option("--batch", tcfg->batch_size, "patches per step");
    cmd->add_option("--patch", tcfg->patch_size, "patch side (clamped to scene size)");
    cmd->add_option("--lr-refiner", tcfg->lr_refiner, "refiner learning rate");
    cmd->add_option("--lr-mask", tcfg->lr_mask, "mask learning rate");
    cmd->add_option("--halve-every", tcfg->halve_every, "halve both rates every N epochs");
    cmd->add_option("--mask-freeze", tcfg->mask_freeze, "epochs before mask updates start");
    tcfg->checkpoint_every = 100;
    cmd->add_option("--checkpoint-every", tcfg->checkpoint_every, "checkpoint period (0 = off)");
    cmd->add_option("--w-smooth", lcfg->w_smooth, "smooth-L1 weight w_L");
    cmd->add_option("--w-chamfer", lcfg->w_chamfer, "chamfer weight w_C");
    cmd->add_option("--delta", lcfg->delta, "smooth-L1 delta");
    cmd->add_option("--depth-scale", lcfg->depth_scale, "point projection z scale s_z");
    cmd->add_option("--hidden", rcfg->hidden_channels, "refiner hidden channels");
    cmd->add_option("--layers", rcfg->num_layers, "refiner conv layers");
    auto* no_down = cmd->add_flag("--no-downsample", "disable the stride-2 stage");
    cmd->add_option("--crop", *crop, "mask tiling crop side K");
    cmd->add_option("--patch-side", *patch_side, "mask patch side P");
    add_tof_flags(cmd, tof, noise, noise_switch);
    cmd->add_option("--config", opts->config_path, "key=value config file");
    cmd->add_option("--threads", opts->threads, "worker threads");

    cmd->callback([=]() {
        apply_config_overrides(cmd, opts->config_path);
        set_worker_threads(opts->threads);
        if (*noise_switch == "off") *noise = NoiseConfig::off();
        rcfg->downsample = no_down->count() == 0;

        std::vector<LightField> scenes;
        std::vector<std::string> stems = split_list(*scenes_csv);
        if (stems.empty()) throw CLI::ValidationError("--scenes", "no scene stems given");
        for (const std::string& s : stems) scenes.push_back(lightfield_load(s));

        LightField holdout;
        bool have_holdout = !holdout_stem->empty();
        if (have_holdout) holdout = lightfield_load(*holdout_stem);

        int min_side = scenes[0].amplitude.dims[2];
        for (const LightField& s : scenes)
            min_side = std::min({min_side, s.amplitude.dims[2], s.amplitude.dims[3]});
        tcfg->patch_size = std::min(tcfg->patch_size, min_side);
        tcfg->checkpoint_stem = *out;

        MaskPatch mask0 =
            load_mask_arg(*mask_init_spec, scenes[0].views_u, scenes[0].views_v, *patch_side, tcfg->seed);

        TrainSetup setup;
        setup.tof = *tof;
        setup.noise = *noise;
        setup.loss = *lcfg;
        setup.refiner = *rcfg;
        setup.crop_side = std::min(*crop, mask0.patch_side);

        TrainResult res = train(scenes, have_holdout ? &holdout : nullptr, mask0, setup, *tcfg);

        tns_write(res.mask.values, *out + ".mask.tns");
        refiner_save(res.refiner, *out + ".weights.rfw");
        write_epoch_log_csv(res.log, *out + ".log.csv");

        RunManifest mf;
        mf.set("command", std::string("optimize"));
        mf.set("version", std::string(kToolVersion));
        mf.set("scenes", *scenes_csv);
        mf.set("holdout", *holdout_stem);
        mf.set("mask_init", *mask_init_spec);
        mf.set("seed", tcfg->seed);
        mf.set("epochs", static_cast<std::int64_t>(tcfg->epochs));
        mf.set("batch", static_cast<std::int64_t>(tcfg->batch_size));
        mf.set("patch", static_cast<std::int64_t>(tcfg->patch_size));
        mf.set("lr_refiner", tcfg->lr_refiner);
        mf.set("lr_mask", tcfg->lr_mask);
        mf.set("halve_every", static_cast<std::int64_t>(tcfg->halve_every));
        mf.set("mask_freeze", static_cast<std::int64_t>(tcfg->mask_freeze));
        mf.set("w_smooth", lcfg->w_smooth);
        mf.set("w_chamfer", lcfg->w_chamfer);
        mf.set("delta", lcfg->delta);
        mf.set("depth_scale", lcfg->depth_scale);
        mf.set("hidden", static_cast<std::int64_t>(rcfg->hidden_channels));
        mf.set("layers", static_cast<std::int64_t>(rcfg->num_layers));
        mf.set("downsample", static_cast<std::int64_t>(rcfg->downsample ? 1 : 0));
        mf.set("crop", static_cast<std::int64_t>(setup.crop_side));
        manifest_tof(mf, *tof, *noise);
        mf.set("timestamp", iso_timestamp());
        for (std::size_t i = 0; i < stems.size(); ++i)
            mf.set_input_hash("scene" + std::to_string(i), stems[i] + ".amp.tns");
        mf.set_output_hash("mask", *out + ".mask.tns");
        mf.set_output_hash("weights", *out + ".weights.rfw");
        mf.set_output_hash("log", *out + ".log.csv");
        mf.write(*out + ".manifest");

        std::cout << "optimize: final loss " << format_double(res.log.back().loss) << ", throughput "
                  << format_double(throughput(res.mask)) << ", wrote " << *out
                  << ".{mask.tns,weights.rfw,log.csv}\n";
    });
    return 0;
}

int cmd_evaluate(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate", "run the metric suite over masks and scenes");
    auto opts = std::make_shared<CommonFlags>();
    auto masks_csv = std::make_shared<std::string>();
    auto scenes_csv = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto weights_path = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>();
    auto crop = std::make_shared<int>(64);
    auto patch_side = std::make_shared<int>(80);
    auto fp_protocol = std::make_shared<bool>(false);
    auto tof = std::make_shared<ToFConfig>();
    auto noise = std::make_shared<NoiseConfig>();
    auto noise_switch = std::make_shared<std::string>("on");

    cmd->add_option("--masks,--mask", *masks_csv, "comma-separated mask specs/.tns files")->required();
    cmd->add_option("--scenes", *scenes_csv, "comma-separated scene stems")->required();
    cmd->add_option("--out", *out, "output CSV path")->required();
    cmd->add_option("--seed", *seed, "evaluation seed")->required();
    cmd->add_option("--weights", *weights_path, "refiner applied to .tns mask entries");
    cmd->add_option("--crop", *crop, "mask tiling crop side K");
    cmd->add_option("--patch-side", *patch_side, "mask patch side P for generated patterns");
    cmd->add_flag("--fp-protocol", *fp_protocol, "append flying-pixel ordering check");
    add_tof_flags(cmd, tof, noise, noise_switch);
    cmd->add_option("--config", opts->config_path, "key=value config file");
    cmd->add_option("--threads", opts->threads, "worker threads");

    cmd->callback([=]() {
        apply_config_overrides(cmd, opts->config_path);
        set_worker_threads(opts->threads);
        if (*noise_switch == "off") *noise = NoiseConfig::off();

        std::vector<std::string> mask_specs = split_list(*masks_csv);
        std::vector<std::string> stems = split_list(*scenes_csv);
        if (mask_specs.empty()) throw CLI::ValidationError("--masks", "no masks given");
        if (stems.empty()) throw CLI::ValidationError("--scenes", "no scenes given");

        std::vector<LightField> scenes;
        for (const std::string& s : stems) scenes.push_back(lightfield_load(s));

        RefinerWeights weights;
        bool have_weights = !weights_path->empty();
        if (have_weights) weights = refiner_load(*weights_path);

        EvalContext ctx;
        ctx.tof = *tof;
        ctx.noise = *noise;
        ctx.seed = *seed;
        ctx.crop_side = *crop;

        std::ofstream csv(*out, std::ios::trunc);
        if (!csv) throw std::runtime_error("evaluate: cannot open " + *out);
        csv << "mask,scene,rmse,mae,thresh3,thresh15,fp_ratio,chamfer,throughput\n";

        std::vector<double> agg_fp(mask_specs.size(), 0.0);
        std::vector<bool> agg_fp_valid(mask_specs.size(), false);
        for (std::size_t mi = 0; mi < mask_specs.size(); ++mi) {
            const std::string& spec = mask_specs[mi];
            MaskPatch mask =
                load_mask_arg(spec, scenes[0].views_u, scenes[0].views_v, *patch_side, *seed);
            bool is_file = spec.size() > 4 && spec.substr(spec.size() - 4) == ".tns";
            const RefinerWeights* w = (is_file && have_weights) ? &weights : nullptr;
            SuiteEval suite = evaluate_mask(mask, w, scenes, ctx);
            for (std::size_t si = 0; si < scenes.size(); ++si) {
                const MetricsReport& r = suite.per_scene[si];
                csv << spec << "," << stems[si] << "," << format_double(r.rmse) << ","
                    << format_double(r.mae) << "," << format_double(r.thresh3) << ","
                    << format_double(r.thresh15) << "," << format_double(r.fp_ratio) << ","
                    << format_double(r.chamfer) << "," << format_double(r.throughput) << "\n";
            }
            const MetricsReport& a = suite.aggregate;
            csv << spec << ",aggregate," << format_double(a.rmse) << "," << format_double(a.mae) << ","
                << format_double(a.thresh3) << "," << format_double(a.thresh15) << ","
                << format_double(a.fp_ratio) << "," << format_double(a.chamfer) << ","
                << format_double(a.throughput) << "\n";
            agg_fp[mi] = a.fp_ratio;
            agg_fp_valid[mi] = a.fp_valid;
        }

        if (*fp_protocol) {
            bool ordered = true;
            for (std::size_t i = 0; i + 1 < mask_specs.size(); ++i) {
                if (!agg_fp_valid[i] || !agg_fp_valid[i + 1] || !(agg_fp[i] < agg_fp[i + 1]))
                    ordered = false;
            }
            csv << "fp_ordering," << (ordered ? "PASS" : "FAIL");
            for (std::size_t i = 0; i < mask_specs.size(); ++i) csv << "," << format_double(agg_fp[i]);
            csv << "\n";
            std::cout << "evaluate: fp ordering " << (ordered ? "PASS" : "FAIL") << "\n";
        }
        csv.close();

        RunManifest mf;
        mf.set("command", std::string("evaluate"));
        mf.set("version", std::string(kToolVersion));
        mf.set("masks", *masks_csv);
        mf.set("scenes", *scenes_csv);
        mf.set("seed", *seed);
        mf.set("crop", static_cast<std::int64_t>(*crop));
        mf.set("fp_protocol", static_cast<std::int64_t>(*fp_protocol ? 1 : 0));
        manifest_tof(mf, *tof, *noise);
        mf.set("timestamp", iso_timestamp());
        mf.set_output_hash("csv", *out);
        mf.write(*out + ".manifest");
        std::cout << "evaluate: wrote " << *out << "\n";
    });
    return 0;
}

int cmd_export(CLI::App& app) {
    auto* cmd = app.add_subcommand("export", "convert depth maps and masks to PLY/PGM/TNS");
    auto depth_path = std::make_shared<std::string>();
    auto ply_path = std::make_shared<std::string>();
    auto mask_path = std::make_shared<std::string>();
    auto pgm_path = std::make_shared<std::string>();
    auto tns_path = std::make_shared<std::string>();
    auto threshold = std::make_shared<double>(0.5);
    auto no_binarize = std::make_shared<bool>(false);
    auto depth_scale = std::make_shared<double>(1.0);

    cmd->add_option("--depth", *depth_path, "depth map .tns to export");
    cmd->add_option("--ply", *ply_path, "PLY output path");
    cmd->add_option("--mask", *mask_path, "mask patch .tns to export");
    cmd->add_option("--pgm", *pgm_path, "PGM mosaic output path");
    cmd->add_option("--tns", *tns_path, "re-export mask as TNS1");
    cmd->add_option("--threshold", *threshold, "binarization threshold");
    cmd->add_flag("--no-binarize", *no_binarize, "export mask transmittances as-is");
    cmd->add_option("--depth-scale", *depth_scale, "point projection z scale");

    cmd->callback([=]() {
        bool did = false;
        RunManifest mf;
        mf.set("command", std::string("export"));
        mf.set("version", std::string(kToolVersion));
        std::string manifest_path;

        if (!depth_path->empty()) {
            if (ply_path->empty()) throw CLI::ValidationError("--ply", "needed with --depth");
            Tensor depth = tns_read(*depth_path);
            if (depth.ndim() != 2) throw std::runtime_error("export: depth map must be [H,W]");
            ply_write(project_points(depth, *depth_scale), *ply_path);
            mf.set_input_hash("depth", *depth_path);
            mf.set_output_hash("ply", *ply_path);
            manifest_path = *ply_path + ".manifest";
            std::cout << "export: wrote " << *ply_path << " (" << depth.numel() << " vertices)\n";
            did = true;
        }
        if (!mask_path->empty()) {
            if (pgm_path->empty() && tns_path->empty())
                throw CLI::ValidationError("--pgm", "need --pgm or --tns with --mask");
            Tensor t = tns_read(*mask_path);
            if (t.ndim() != 4) throw std::runtime_error("export: mask must be [U,V,P,P]");
            MaskPatch m;
            m.values = t;
            m.views_u = t.dims[0];
            m.views_v = t.dims[1];
            m.patch_side = t.dims[2];
            mf.set_input_hash("mask", *mask_path);
            if (!*no_binarize) {
                BinarizeResult b = binarize(m, *threshold);
                std::cout << "export: binarized at " << *threshold << ", throughput "
                          << format_double(b.throughput_before) << " -> "
                          << format_double(b.throughput_after) << "\n";
                m = b.patch;
            }
            if (!pgm_path->empty()) {
                pgm_write_mosaic(m, *pgm_path);
                mf.set_output_hash("pgm", *pgm_path);
                manifest_path = *pgm_path + ".manifest";
                std::cout << "export: wrote " << *pgm_path << "\n";
            }
            if (!tns_path->empty()) {
                tns_write(m.values, *tns_path);
                mf.set_output_hash("tns", *tns_path);
                if (manifest_path.empty()) manifest_path = *tns_path + ".manifest";
                std::cout << "export: wrote " << *tns_path << "\n";
            }
            did = true;
        }
        if (!did) throw CLI::ValidationError("export", "nothing to do: pass --depth or --mask");
        mf.set("timestamp", iso_timestamp());
        mf.write(manifest_path);
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coded-aperture time-of-flight simulator and mask optimizer"};
    app.require_subcommand(1);

    cmd_scene(app);
    cmd_simulate(app);
    cmd_optimize(app);
    cmd_evaluate(app);
    cmd_export(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints message/usage
        return e.get_exit_code() == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
