#pragma once

// Command-line front end: synth -> degrade -> train -> sr / refine -> eval.
//
// run_cli() is the whole program; tools/dualsr.cpp only forwards argv. Every
// failure is reported as a single "dualsr: error: ..." line and a nonzero
// exit status.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dualsr/backprojection.hpp"
#include "dualsr/coarse_net.hpp"
#include "dualsr/cube_io.hpp"
#include "dualsr/metrics.hpp"
#include "dualsr/resample.hpp"
#include "dualsr/synth.hpp"
#include "dualsr/training.hpp"

namespace dualsr::cli {

namespace fs = std::filesystem;

/// Default worker count, from DUALSR_THREADS when set.
inline std::size_t default_threads()
{
    if (const char* env = std::getenv("DUALSR_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

/// Cube files named by a path: the file itself, or every *.hsr in a directory
/// in lexicographic order.
inline std::vector<fs::path> list_cubes(const fs::path& p)
{
    if (fs::is_regular_file(p)) return {p};
    require(fs::is_directory(p), "no such cube file or directory: " + p.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".hsr") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    require(!out.empty(), "no .hsr cubes in " + p.string());
    return out;
}

/// Runs fn(k) for k in [0, n) on up to `threads` workers. Results go to
/// caller-indexed slots, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn)
{
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < n; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

/// Fills options the user did not give on the command line from a
/// "key = value" file, so flags > config file > defaults.
inline void apply_config_file(CLI::App& app, const fs::path& file)
{
    std::ifstream in(file);
    require(static_cast<bool>(in), "cannot read config file: " + file.string());
    const auto kv = detail::parse_key_values(in, "config file " + file.string());
    for (const auto& [key, value] : kv) {
        CLI::Option* opt = app.get_option_no_throw("--" + key);
        require(opt != nullptr, "config file: unknown key '" + key + "' for command '" + app.get_name() + "'");
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

inline void write_trace(const FineStageTrace& t, const fs::path& dir)
{
    fs::create_directories(dir);
    write_cube(t.U, dir / "U.hsr");
    write_cube(t.V, dir / "V.hsr");
    write_cube(t.M, dir / "M.hsr");
    write_cube(t.Z, dir / "Z.hsr");
    write_cube(t.D, dir / "D.hsr");
    write_cube(t.N, dir / "N.hsr");
    write_cube(t.I_SR, dir / "I_SR.hsr");
    std::ofstream(dir / "lambda_sam.txt") << std::setprecision(17) << t.lambda_sam << "\n";
}

struct Common {
    std::size_t threads = default_threads();
    bool verbose = false;
    std::string config;
};

inline void add_common(CLI::App& sub, Common& c, bool with_config = true)
{
    sub.add_option("--threads", c.threads, "Worker threads (default from DUALSR_THREADS, else 1)")
        ->check(CLI::PositiveNumber);
    sub.add_flag("--verbose", c.verbose, "Verbose progress on stderr");
    if (with_config) sub.add_option("--config", c.config, "key = value file; command-line flags take precedence");
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"dualsr: dual-stage hyperspectral super-resolution toolkit", "dualsr"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");

    // synth
    Common synth_common;
    SceneSpec scene;
    std::size_t synth_count = 32, synth_size = 64;
    std::uint64_t synth_seed = 7;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate synthetic hyperspectral scenes");
    synth->add_option("--bands", scene.bands, "Band count")->capture_default_str();
    synth->add_option("--size", synth_size, "Square spatial edge in pixels")->capture_default_str();
    synth->add_option("--count", synth_count, "Number of cubes")->capture_default_str();
    synth->add_option("--materials", scene.materials, "Endmember count")->capture_default_str();
    synth->add_option("--smoothness", scene.smoothness, "Abundance cutoff frequency (cycles/image)")
        ->capture_default_str();
    synth->add_option("--seed", synth_seed, "Root seed")->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->required();
    add_common(*synth, synth_common);

    // degrade
    Common degrade_common;
    std::string degrade_in, degrade_out, degrade_kernels = "cubic";
    int degrade_scale = 4;
    auto* degrade = app.add_subcommand("degrade", "Build LR/HR pairs by downscaling HR cubes");
    degrade->add_option("--in", degrade_in, "HR cube file or directory")->required();
    degrade->add_option("--out", degrade_out, "Output directory (writes lr/ and hr/)")->required();
    degrade->add_option("--scale", degrade_scale, "Integer downscale factor")->capture_default_str()->check(
        CLI::PositiveNumber);
    degrade->add_option("--kernel", degrade_kernels,
                        "cubic|lanczos|box|linear; a comma list is assigned round-robin over the cubes")
        ->capture_default_str();
    add_common(*degrade, degrade_common);

    // train
    Common train_common;
    std::string train_data, train_out, train_log;
    CoarseConfig train_cfg;
    TrainConfig train_run;
    train_run.epochs = 30;
    train_run.batch = 64;
    train_run.seed = 7;
    int train_scale = 0;
    auto* trainc = app.add_subcommand("train", "Train the coarse model on LR/HR pairs");
    trainc->add_option("--data", train_data, "Directory holding lr/ and hr/ cube folders")->required();
    trainc->add_option("--out", train_out, "Checkpoint manifest path")->required();
    trainc->add_option("--epochs", train_run.epochs, "Epochs")->capture_default_str();
    trainc->add_option("--batch", train_run.batch, "Mini-batch size (patches)")->capture_default_str();
    trainc->add_option("--seed", train_run.seed, "Root seed (init, shuffling)")->capture_default_str();
    trainc->add_option("--lr", train_run.base_lr, "Initial learning rate (halved every 30 epochs)")
        ->capture_default_str();
    trainc->add_option("--channels", train_cfg.channels, "Feature width")->capture_default_str();
    trainc->add_option("--intra-stages", train_cfg.intra_stages, "Intra-group fusion stages")->capture_default_str();
    trainc->add_option("--global-residual", train_cfg.global_residual, "Add bicubic-upsampled LR band (true|false)")
        ->capture_default_str();
    trainc->add_option("--tap-weight", train_run.tap_weight, "Weight of the auxiliary L1 term on the s/2 output (0 = off)")
        ->capture_default_str();
    trainc->add_option("--scale", train_scale, "SR factor (default: inferred from the data)");
    trainc->add_option("--log", train_log, "Write per-epoch loss CSV here");
    add_common(*trainc, train_common);

    // sr
    Common sr_common;
    std::string sr_model, sr_in, sr_out, sr_trace;
    bool sr_fine = false;
    int sr_scale = 0;
    auto* sr = app.add_subcommand("sr", "Super-resolve LR cubes with a trained coarse model");
    sr->add_option("--model", sr_model, "Checkpoint manifest")->required();
    sr->add_option("--in", sr_in, "LR cube file or directory")->required();
    sr->add_option("--out", sr_out, "Output cube file (for a file input) or directory")->required();
    sr->add_option("--scale", sr_scale, "SR factor; must match the model");
    sr->add_flag("--fine", sr_fine, "Apply the back-projection refinement after the coarse stage");
    sr->add_option("--trace", sr_trace, "With --fine and a single input: dump every intermediate here");
    add_common(*sr, sr_common);

    // refine
    Common refine_common;
    std::string refine_lr, refine_model, refine_u, refine_v, refine_out, refine_trace, refine_sam = "per-pixel";
    int refine_scale = 0;
    bool refine_no_clamp = false;
    auto* refinec = app.add_subcommand("refine", "Back-projection refinement (model-driven or from U/V cubes)");
    auto* opt_lr = refinec->add_option("--lr", refine_lr, "LR cube (with --model and --scale)");
    auto* opt_model = refinec->add_option("--model", refine_model, "Checkpoint manifest");
    refinec->add_option("--scale", refine_scale, "Even SR factor");
    auto* opt_u = refinec->add_option("--u", refine_u, "Coarse SR cube at scale s");
    auto* opt_v = refinec->add_option("--v", refine_v, "Coarse SR cube at scale s/2");
    refinec->add_option("--out", refine_out, "Refined cube path")->required();
    refinec->add_option("--trace", refine_trace, "Dump every intermediate cube into this directory");
    refinec->add_option("--sam-mode", refine_sam, "per-pixel|global")
        ->check(CLI::IsMember({"per-pixel", "global"}))
        ->capture_default_str();
    refinec->add_flag("--no-clamp", refine_no_clamp, "Keep U + N unclamped");
    opt_lr->excludes(opt_u)->excludes(opt_v);
    opt_model->excludes(opt_u)->excludes(opt_v);
    add_common(*refinec, refine_common);

    // eval
    Common eval_common;
    std::string eval_ref, eval_test, eval_csv, eval_method = "test";
    bool eval_per_band = false, eval_append = false;
    auto* evalc = app.add_subcommand("eval", "PSNR / SSIM / SAM of test cubes against references");
    evalc->add_option("--ref", eval_ref, "Reference cube file or directory")->required();
    evalc->add_option("--test", eval_test, "Test cube file or directory (matched by file name)")->required();
    evalc->add_option("--method", eval_method, "Method label for the report")->capture_default_str();
    evalc->add_option("--csv", eval_csv, "Write a CSV report here");
    evalc->add_flag("--per-band", eval_per_band, "Add per-band PSNR/SSIM columns");
    evalc->add_flag("--append", eval_append, "Append rows to an existing CSV");
    add_common(*evalc, eval_common);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    auto log = [&](const Common& c, const std::string& msg) {
        if (c.verbose) err << msg << "\n";
    };

    try {
        if (synth->parsed()) {
            if (!synth_common.config.empty()) apply_config_file(*synth, synth_common.config);
            scene.height = scene.width = synth_size;
            fs::create_directories(synth_out);
            parallel_for(synth_count, synth_common.threads, [&](std::size_t k) {
                SceneSpec spec = scene;
                spec.seed = mix64(synth_seed) + k;
                std::ostringstream name;
                name << "scene_" << std::setw(4) << std::setfill('0') << k << ".hsr";
                write_cube(generate(spec), fs::path(synth_out) / name.str());
            });
            out << "synth: wrote " << synth_count << " cubes (" << scene.bands << "x" << synth_size << "x" << synth_size
                << ") to " << synth_out << "\n";
        } else if (degrade->parsed()) {
            if (!degrade_common.config.empty()) apply_config_file(*degrade, degrade_common.config);
            std::vector<KernelKind> kernels;
            std::stringstream ks(degrade_kernels);
            for (std::string k; std::getline(ks, k, ',');) kernels.push_back(parse_kernel(detail::trim(k)));
            require(!kernels.empty(), "degrade: no kernel given");
            const auto inputs = list_cubes(degrade_in);
            parallel_for(inputs.size(), degrade_common.threads, [&](std::size_t k) {
                const auto kernel = kernels[k % kernels.size()];
                auto pair = degrade_pair(read_cube(inputs[k]), degrade_scale, kernel);
                write_cube(pair.lr, fs::path(degrade_out) / "lr" / inputs[k].filename());
                write_cube(pair.hr, fs::path(degrade_out) / "hr" / inputs[k].filename());
            });
            out << "degrade: " << inputs.size() << " pairs at x" << degrade_scale << " -> " << degrade_out << "\n";
        } else if (trainc->parsed()) {
            if (!train_common.config.empty()) apply_config_file(*trainc, train_common.config);
            const auto lr_files = list_cubes(fs::path(train_data) / "lr");
            std::vector<DegradedPair> data;
            for (const auto& f : lr_files) {
                const fs::path hr = fs::path(train_data) / "hr" / f.filename();
                data.push_back({read_cube(f), read_cube(hr)});
            }
            const auto& first = data.front();
            require(first.hr.height() % first.lr.height() == 0, "train: HR height is not a multiple of LR height");
            const int inferred = static_cast<int>(first.hr.height() / first.lr.height());
            require(train_scale == 0 || train_scale == inferred,
                    "train: --scale " + std::to_string(train_scale) + " does not match data (x" +
                        std::to_string(inferred) + ")");
            train_cfg.scale = inferred;
            auto model = CoarseModel<float>::initialize(train_cfg, train_run.seed);
            log(train_common, "train: " + std::to_string(data.size()) + " pairs, " +
                                  std::to_string(model.parameter_count()) + " parameters");
            std::ofstream csv;
            if (!train_log.empty()) {
                csv.open(train_log, std::ios::trunc);
                require(static_cast<bool>(csv), "cannot write loss log: " + train_log);
                csv << "epoch,loss\n";
            }
            train(model, data, train_run, [&](std::size_t epoch, double loss) {
                out << "epoch " << epoch << " loss " << std::setprecision(9) << loss << "\n";
                if (csv) csv << epoch << ',' << std::setprecision(9) << loss << "\n";
            });
            model.save(train_out);
            out << "train: checkpoint written to " << train_out << "\n";
        } else if (sr->parsed()) {
            if (!sr_common.config.empty()) apply_config_file(*sr, sr_common.config);
            const auto model = CoarseModel<float>::load(sr_model);
            require(sr_scale == 0 || sr_scale == model.config.scale,
                    "sr: --scale " + std::to_string(sr_scale) + " does not match the model (x" +
                        std::to_string(model.config.scale) + ")");
            const auto inputs = list_cubes(sr_in);
            const bool single = fs::is_regular_file(sr_in);
            require(sr_trace.empty() || (sr_fine && single), "sr: --trace needs --fine and a single input cube");
            parallel_for(inputs.size(), sr_common.threads, [&](std::size_t k) {
                const HsiCube lr = read_cube(inputs[k]);
                HsiCube result;
                if (sr_fine) {
                    auto trace = refine(ModelUpscaler<float>{model}, lr, model.config.scale);
                    if (!sr_trace.empty()) write_trace(trace, sr_trace);
                    result = std::move(trace.I_SR);
                } else {
                    result = sr_cube(model, lr);
                }
                write_cube(result, single ? fs::path(sr_out) : fs::path(sr_out) / inputs[k].filename());
            });
            out << "sr: " << inputs.size() << " cube(s) at x" << model.config.scale << (sr_fine ? " (fine)" : "")
                << " -> " << sr_out << "\n";
        } else if (refinec->parsed()) {
            if (!refine_common.config.empty()) apply_config_file(*refinec, refine_common.config);
            RefineOptions opts;
            opts.sam = refine_sam == "global" ? SamMode::global : SamMode::per_pixel;
            opts.clamp = !refine_no_clamp;
            FineStageTrace trace;
            if (!refine_u.empty() || !refine_v.empty()) {
                require(!refine_u.empty() && !refine_v.empty(), "refine: --u and --v must be given together");
                trace = refine_from_cubes(read_cube(refine_u), read_cube(refine_v), opts);
            } else {
                require(!refine_lr.empty() && !refine_model.empty(),
                        "refine: give either --lr/--model/--scale or --u/--v");
                const auto model = CoarseModel<float>::load(refine_model);
                const int s = refine_scale == 0 ? model.config.scale : refine_scale;
                trace = refine(ModelUpscaler<float>{model}, read_cube(refine_lr), s, opts);
            }
            if (!refine_trace.empty()) write_trace(trace, refine_trace);
            write_cube(trace.I_SR, refine_out);
            out << "refine: lambda_sam=" << std::setprecision(6) << trace.lambda_sam << " rad ("
                << (trace.lambda_sam < 1.0 ? "constrained" : "unconstrained") << ") -> " << refine_out << "\n";
        } else if (evalc->parsed()) {
            if (!eval_common.config.empty()) apply_config_file(*evalc, eval_common.config);
            const auto tests = list_cubes(eval_test);
            const bool single = fs::is_regular_file(eval_ref);
            std::vector<MetricReport> reports(tests.size());
            std::vector<fs::path> refs(tests.size());
            for (std::size_t k = 0; k < tests.size(); ++k)
                refs[k] = single ? fs::path(eval_ref) : fs::path(eval_ref) / tests[k].filename();
            parallel_for(tests.size(), eval_common.threads,
                         [&](std::size_t k) { reports[k] = evaluate(read_cube(refs[k]), read_cube(tests[k])); });

            std::ofstream csv;
            if (!eval_csv.empty()) {
                const bool fresh = !eval_append || !fs::exists(eval_csv);
                csv.open(eval_csv, eval_append ? std::ios::app : std::ios::trunc);
                require(static_cast<bool>(csv), "cannot write CSV: " + eval_csv);
                if (fresh) {
                    csv << "cube,method,psnr_db,ssim,sam_deg";
                    if (eval_per_band) {
                        for (std::size_t l = 1; l <= reports.front().band_psnr.size(); ++l) csv << ",psnr_b" << l;
                        for (std::size_t l = 1; l <= reports.front().band_ssim.size(); ++l) csv << ",ssim_b" << l;
                    }
                    csv << "\n";
                }
                csv << std::setprecision(10);
            }
            for (std::size_t k = 0; k < tests.size(); ++k) {
                const auto& r = reports[k];
                out << tests[k].filename().string() << " " << eval_method << " psnr=" << std::setprecision(6) << r.psnr
                    << " ssim=" << r.ssim << " sam=" << r.sam << "\n";
                if (csv) {
                    csv << tests[k].filename().string() << ',' << eval_method << ',' << r.psnr << ',' << r.ssim << ','
                        << r.sam;
                    if (eval_per_band) {
                        for (double v : r.band_psnr) csv << ',' << v;
                        for (double v : r.band_ssim) csv << ',' << v;
                    }
                    csv << "\n";
                }
            }
        }
    } catch (const std::exception& e) {
        err << "dualsr: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int run_cli(int argc, const char* const* argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args);
}

} // namespace dualsr::cli
