#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stitch/align.hpp"
#include "stitch/datakit.hpp"
#include "stitch/evalkit.hpp"
#include "stitch/image_io.hpp"
#include "stitch/losses.hpp"
#include "stitch/reconstruct.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PipelineConfig {
    stitch::LossWeights weights;
    stitch::PyramidConfig pyramid;
    stitch::BranchConfig branch;
    stitch::AdamConfig adam;
    stitch::SynthParams synth;
    int epochs = 20;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
};

void apply_config_file(PipelineConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw stitch::DataError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw stitch::DataError(std::string("config: parse failure: ") + e.what());
    }
    auto get = [](const json& o, const char* k, auto& field) {
        if (o.contains(k)) field = o.at(k).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("weights")) {
        const auto& w = j["weights"];
        get(w, "lambda_s", c.weights.lambda_s);
        get(w, "lambda_c", c.weights.lambda_c);
        get(w, "omega_lr", c.weights.omega_lr);
        get(w, "omega_hr", c.weights.omega_hr);
        get(w, "omega_cs", c.weights.omega_cs);
    }
    if (j.contains("pyramid")) {
        const auto& p = j["pyramid"];
        get(p, "levels", c.pyramid.levels);
        get(p, "iterations_per_level", c.pyramid.iterations_per_level);
        get(p, "step_init", c.pyramid.step_init);
        get(p, "step_decay", c.pyramid.step_decay);
        get(p, "max_offset", c.pyramid.max_offset);
        get(p, "min_overlap_rate", c.pyramid.min_overlap_rate);
    }
    if (j.contains("branch")) {
        const auto& b = j["branch"];
        get(b, "channel_scale", c.branch.channel_scale);
        get(b, "lr_height", c.branch.lr_height);
        get(b, "lr_width", c.branch.lr_width);
        get(b, "resblock_count", c.branch.resblock_count);
        get(b, "joint_lr_hr", c.branch.joint_lr_hr);
        get(b, "warm_start", c.branch.warm_start);
    }
    if (j.contains("adam")) {
        const auto& a = j["adam"];
        get(a, "lr", c.adam.lr);
        get(a, "beta1", c.adam.beta1);
        get(a, "beta2", c.adam.beta2);
        get(a, "eps", c.adam.eps);
    }
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        get(s, "disturbance", c.synth.disturbance);
        get(s, "crop_size", c.synth.crop_size);
        get(s, "photometric_jitter", c.synth.photometric_jitter);
    }
    get(j, "epochs", c.epochs);
    get(j, "seed", c.seed);
    get(j, "out_dir", c.out_dir);
}

json offsets_to_json(const stitch::AlignmentResult& r) {
    json j;
    j["offsets"] = json::array();
    for (const auto& v : r.offsets.d) j["offsets"].push_back({v.x, v.y});
    j["homography"] = json::array();
    for (int i = 0; i < 3; ++i)
        j["homography"].push_back({r.homography.m[i][0], r.homography.m[i][1],
                                   r.homography.m[i][2]});
    j["canvas"] = {{"width", r.canvas.width},
                   {"height", r.canvas.height},
                   {"origin_shift", {r.canvas.origin_shift.x, r.canvas.origin_shift.y}}};
    j["final_loss"] = r.final_loss;
    j["degenerate"] = r.degenerate;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw stitch::DataError("cannot write " + path);
    out << text;
}

void write_trace_csv(const std::string& path, const std::vector<double>& trace) {
    std::ostringstream os;
    os << "iteration,loss\n";
    os.precision(17);
    for (std::size_t i = 0; i < trace.size(); ++i) os << i << "," << trace[i] << "\n";
    write_text(path, os.str());
}

int cmd_gen_synth(const PipelineConfig& cfg, const std::string& source, int n) {
    const stitch::Tensor4 img = stitch::io::load_image(source);
    stitch::gen_synthetic_dataset(img, n, cfg.synth, cfg.seed, cfg.out_dir);
    std::cout << "wrote " << n << " pairs + manifest.json to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_align(const PipelineConfig& cfg, const std::string& ref_path,
              const std::string& target_path) {
    const stitch::Tensor4 ref = stitch::io::load_image(ref_path);
    const stitch::Tensor4 target = stitch::io::load_image(target_path);
    const stitch::AlignmentResult r = stitch::align_pair(ref, target, cfg.pyramid);
    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    write_text((out / "offsets.json").string(), offsets_to_json(r).dump(2) + "\n");
    stitch::io::save_png(r.warped_a, (out / "warped_a.png").string());
    stitch::io::save_png(r.warped_b, (out / "warped_b.png").string());
    stitch::io::save_png(r.masks.content_a, (out / "mask_content_a.png").string());
    stitch::io::save_png(r.masks.content_b, (out / "mask_content_b.png").string());
    stitch::io::save_png(r.masks.seam_a, (out / "mask_seam_a.png").string());
    stitch::io::save_png(r.masks.seam_b, (out / "mask_seam_b.png").string());
    write_trace_csv((out / "trace.csv").string(), r.loss_trace);
    std::cout << "final ablation loss " << r.final_loss << "\n";
    return r.degenerate ? 3 : 0;
}

stitch::StitchModel make_model(const PipelineConfig& cfg, const std::string& ckpt) {
    stitch::StitchModel m = stitch::build_model(cfg.branch, cfg.seed);
    if (!ckpt.empty()) m.params->load(ckpt);
    return m;
}

int cmd_stitch(const PipelineConfig& cfg, const std::string& ref_path,
               const std::string& target_path, const std::string& ckpt) {
    const stitch::Tensor4 ref = stitch::io::load_image(ref_path);
    const stitch::Tensor4 target = stitch::io::load_image(target_path);
    const stitch::StitchModel m = make_model(cfg, ckpt);
    const stitch::StitchOutput s = stitch::run_stitch(m, ref, target, cfg.pyramid);
    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    stitch::io::save_png(s.s_lr, (out / "s_lr.png").string());
    stitch::io::save_png(s.s_hr, (out / "s_hr.png").string());
    write_text((out / "offsets.json").string(),
               offsets_to_json(s.alignment).dump(2) + "\n");
    std::cout << "stitched " << s.alignment.canvas.width << "x"
              << s.alignment.canvas.height << ", consistency " << s.l_cs << "\n";
    return 0;
}

int cmd_train(const PipelineConfig& cfg, const std::string& manifest) {
    const auto pairs = stitch::load_dataset(manifest);
    if (pairs.empty()) throw stitch::DataError("train: empty dataset");
    std::vector<stitch::AlignmentResult> aligned;
    aligned.reserve(pairs.size());
    for (const auto& p : pairs)
        aligned.push_back(stitch::align_pair(p.ref, p.target, cfg.pyramid));

    stitch::StitchModel m = stitch::build_model(cfg.branch, cfg.seed);
    const auto records =
        stitch::train(m, aligned, cfg.weights, cfg.epochs, cfg.seed, cfg.adam);

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    std::ostringstream os;
    os << "iteration,l_lr,l_hr,l_cs,l_r,seam_lr,seam_hr\n";
    os.precision(17);
    for (const auto& r : records)
        os << r.iteration << "," << r.l_lr << "," << r.l_hr << "," << r.l_cs << ","
           << r.l_r << "," << r.seam_lr << "," << r.seam_hr << "\n";
    write_text((out / "trace.csv").string(), os.str());
    m.params->save((out / "model.ckpt").string());
    std::cout << "trained " << records.size() << " iterations; final L_R "
              << (records.empty() ? 0.0 : records.back().l_r) << "\n";
    return 0;
}

int cmd_eval(const PipelineConfig& cfg, const std::string& manifest,
             const std::string& metric_name) {
    const auto pairs = stitch::load_dataset(manifest);
    const bool use_psnr = metric_name == "psnr";
    std::vector<stitch::EvalSample> samples;
    for (const auto& p : pairs) {
        const stitch::FourPointOffsets est =
            stitch::estimate_offsets(p.ref, p.target, cfg.pyramid);
        double metric;
        if (use_psnr) {
            const stitch::Homography h =
                stitch::solve_dlt(est, p.ref.shape.w, p.ref.shape.h);
            metric = stitch::psnr_overlap(p.ref, p.target, h);
        } else {
            if (!p.record.truth_offsets)
                throw stitch::DataError("eval: record " + p.record.id +
                                        " has no ground truth for rmse");
            metric = stitch::four_pt_rmse(est, *p.record.truth_offsets);
        }
        samples.push_back({p.record.id, metric});
    }
    const stitch::EvalReport report = stitch::build_report(samples, use_psnr);
    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    write_text((out / "report.json").string(), report.to_json() + "\n");
    write_text((out / "report.txt").string(), report.to_text());
    std::cout << report.to_text();
    return 0;
}

int cmd_dump_features(const PipelineConfig& cfg, const std::string& ref_path,
                      const std::string& target_path, const std::string& ckpt) {
    const stitch::Tensor4 ref = stitch::io::load_image(ref_path);
    const stitch::Tensor4 target = stitch::io::load_image(target_path);
    const stitch::StitchModel m = make_model(cfg, ckpt);
    const stitch::AlignmentResult a = stitch::align_pair(ref, target, cfg.pyramid);
    const stitch::TrainSample s = stitch::prepare_sample(m, a);
    const auto files = stitch::dump_feature_maps(m, s.inputs.at("wa_lr"),
                                                 s.inputs.at("wb_lr"), cfg.out_dir);
    std::cout << "wrote " << files.size() << " feature maps to " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised deep image stitching pipeline"};
    app.require_subcommand(1);

    PipelineConfig cfg;
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override it")
        ->check(CLI::ExistingFile);

    // shared flags, registered per subcommand so --help shows them in place
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", cfg.out_dir, "output directory")
            ->capture_default_str();
        sub->add_option("--seed", cfg.seed, "master seed (all randomness derives from it)")
            ->capture_default_str();
    };
    auto add_pyramid = [&](CLI::App* sub) {
        sub->add_option("--levels", cfg.pyramid.levels, "pyramid levels")
            ->capture_default_str();
        sub->add_option("--iters", cfg.pyramid.iterations_per_level,
                        "iterations per pyramid level")
            ->capture_default_str();
        sub->add_option("--step", cfg.pyramid.step_init, "initial step, px")
            ->capture_default_str();
        sub->add_option("--max-offset", cfg.pyramid.max_offset,
                        "offset trust region, px (0 = 0.45 * width)")
            ->capture_default_str();
        sub->add_option("--min-overlap", cfg.pyramid.min_overlap_rate,
                        "reject steps below this overlap rate")
            ->capture_default_str();
    };

    std::string source, ref_path, target_path, manifest, ckpt, metric = "psnr";
    int n = 10;

    CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic warped-pair set");
    gen->add_option("--source", source, "source image (PNG/JPEG)")
        ->required()->check(CLI::ExistingFile);
    gen->add_option("--n", n, "number of pairs")->capture_default_str();
    gen->add_option("--disturbance", cfg.synth.disturbance, "max corner perturbation, px")
        ->capture_default_str();
    gen->add_option("--crop", cfg.synth.crop_size, "crop size, px")->capture_default_str();
    gen->add_flag("--jitter", cfg.synth.photometric_jitter,
                  "apply per-image gain/bias to targets");
    add_common(gen);

    CLI::App* al = app.add_subcommand("align", "estimate the aligning homography");
    al->add_option("--ref", ref_path, "reference image")->required()->check(CLI::ExistingFile);
    al->add_option("--target", target_path, "target image")->required()->check(CLI::ExistingFile);
    add_pyramid(al);
    add_common(al);

    CLI::App* st = app.add_subcommand("stitch", "align + reconstruct one pair");
    st->add_option("--ref", ref_path, "reference image")->required()->check(CLI::ExistingFile);
    st->add_option("--target", target_path, "target image")->required()->check(CLI::ExistingFile);
    st->add_option("--model", ckpt, "model checkpoint (default: seeded init)")
        ->check(CLI::ExistingFile);
    st->add_option("--channel-scale", cfg.branch.channel_scale, "filter-count scale")
        ->capture_default_str();
    st->add_option("--resblocks", cfg.branch.resblock_count, "HR residual blocks")
        ->capture_default_str();
    add_pyramid(st);
    add_common(st);

    CLI::App* tr = app.add_subcommand("train", "train the reconstruction network");
    tr->add_option("--manifest", manifest, "dataset manifest")
        ->required()->check(CLI::ExistingFile);
    tr->add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
    tr->add_option("--lr", cfg.adam.lr, "Adam learning rate")->capture_default_str();
    tr->add_option("--lambda-s", cfg.weights.lambda_s, "seam weight")->capture_default_str();
    tr->add_option("--lambda-c", cfg.weights.lambda_c, "content weight")->capture_default_str();
    tr->add_option("--channel-scale", cfg.branch.channel_scale, "filter-count scale")
        ->capture_default_str();
    tr->add_option("--lr-size", cfg.branch.lr_height, "LR branch input size")
        ->capture_default_str();
    tr->add_option("--resblocks", cfg.branch.resblock_count, "HR residual blocks")
        ->capture_default_str();
    tr->add_flag("--warm-start", cfg.branch.warm_start, "LR-only first 20% of iterations");
    add_pyramid(tr);
    add_common(tr);

    CLI::App* ev = app.add_subcommand("eval", "alignment metrics report");
    ev->add_option("--manifest", manifest, "dataset manifest")
        ->required()->check(CLI::ExistingFile);
    ev->add_option("--metric", metric, "psnr or rmse")
        ->check(CLI::IsMember({"psnr", "rmse"}))->capture_default_str();
    add_pyramid(ev);
    add_common(ev);

    CLI::App* df = app.add_subcommand("dump-features", "write LR-branch activation maps");
    df->add_option("--ref", ref_path, "reference image")->required()->check(CLI::ExistingFile);
    df->add_option("--target", target_path, "target image")->required()->check(CLI::ExistingFile);
    df->add_option("--model", ckpt, "model checkpoint (default: seeded init)")
        ->check(CLI::ExistingFile);
    add_pyramid(df);
    add_common(df);

    try {
        app.parse(argc, argv);
        if (!config_path.empty()) {
            // config file named on the command line: load it, then re-parse so
            // explicit flags win over file values
            PipelineConfig fresh;
            apply_config_file(fresh, config_path);
            cfg = fresh;
            app.clear();
            app.parse(argc, argv);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const stitch::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        cfg.branch.lr_width = cfg.branch.lr_height;
        if (*gen) return cmd_gen_synth(cfg, source, n);
        if (*al) return cmd_align(cfg, ref_path, target_path);
        if (*st) return cmd_stitch(cfg, ref_path, target_path, ckpt);
        if (*tr) return cmd_train(cfg, manifest);
        if (*ev) return cmd_eval(cfg, manifest, metric);
        if (*df) return cmd_dump_features(cfg, ref_path, target_path, ckpt);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const stitch::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const stitch::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
