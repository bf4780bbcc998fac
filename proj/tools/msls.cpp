// Command-line surface: blind and non-blind deblurring runs, synthetic data
// generation, evaluation reports, scale-sweep analysis, and schedule printing.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msls/io.hpp"
#include "msls/metrics.hpp"
#include "msls/nonuniform.hpp"
#include "msls/pipeline.hpp"
#include "msls/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace msls;

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitSolverFailure = 3;

int thread_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("MSLS_THREADS")) {
        int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return n;
}

// Runs fn(i) for i in [0, n) on up to thread_count() workers. Exceptions are
// captured and the first one rethrown after all workers join.
void parallel_for(int n, const std::function<void(int)>& fn) {
    int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

DeblurConfig load_config(const std::string& path) {
    DeblurConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("bad config JSON: " + std::string(e.what()));
    }
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("lambda1", cfg.lambda1);
    get("lambda2", cfg.lambda2);
    get("lambda3", cfg.lambda3);
    get("lambda4", cfg.lambda4);
    get("mu", cfg.mu);
    get("beta", cfg.beta);
    get("max_iteration", cfg.max_iteration);
    get("kernel_size", cfg.kernel_size);
    get("patch_size", cfg.patch_size);
    get("patch_stride", cfg.patch_stride);
    get("search_window", cfg.search_window);
    get("inner_alternations", cfg.inner_alternations);
    get("kernel_floor_fraction", cfg.kernel_floor_fraction);
    get("kernel_component_fraction", cfg.kernel_component_fraction);
    if (j.contains("admm")) {
        const json& a = j.at("admm");
        if (a.contains("rho")) cfg.admm.rho = a.at("rho").get<double>();
        if (a.contains("iterations")) cfg.admm.iterations = a.at("iterations").get<int>();
        if (a.contains("primal_tol")) cfg.admm.primal_tol = a.at("primal_tol").get<double>();
    }
    return cfg;
}

void write_trace_csv(const std::vector<TraceEntry>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write trace file: " + path);
    out << "level,iteration,kernel_size,objective,kernel_entropy\n";
    out.precision(17);
    for (const auto& e : trace)
        out << e.level << "," << e.iteration << "," << e.kernel_size << "," << e.objective << ","
            << e.kernel_entropy << "\n";
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// Restores every color plane with the shared kernel estimated on luminance.
ColorImage restore_planes(const ColorImage& input, const BlurKernel& k, const DeblurConfig& cfg) {
    ColorImage out;
    for (const ImageBuffer& plane : input.planes)
        out.planes.push_back(tv_deblur(plane, k, cfg.mu, cfg.admm));
    return out;
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir = ".";
    int kernel_size = 0;  // 0 = take from config
    uint64_t seed = 0;
    bool trace = false;
    std::string channels = "luma";
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_channels = false) {
    cmd->add_option("--config", f.config_path, "JSON config file overriding defaults");
    cmd->add_option("--out-dir", f.out_dir, "output directory");
    cmd->add_option("--kernel-size", f.kernel_size, "kernel support (odd)");
    cmd->add_option("--seed", f.seed, "RNG seed for synthetic steps");
    cmd->add_flag("--trace", f.trace, "write per-level trace CSV");
    if (with_channels)
        cmd->add_option("--channels", f.channels, "luma or rgb")
            ->check(CLI::IsMember({"luma", "rgb"}));
}

DeblurConfig resolve_config(const CommonFlags& f) {
    DeblurConfig cfg = load_config(f.config_path);
    if (f.kernel_size > 0) cfg.kernel_size = f.kernel_size;
    return cfg;
}

// ---------------------------------------------------------------- deblur ----

int run_deblur(const std::string& input, const CommonFlags& flags) {
    ColorImage color;
    DeblurConfig cfg;
    try {
        cfg = resolve_config(flags);
        cfg.validate();
        color = load_color(input);
        fs::create_directories(flags.out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    try {
        DeblurResult res = blind_deblur(color.luminance(), cfg);
        std::string base = (fs::path(flags.out_dir) / stem_of(input)).string();
        if (flags.channels == "rgb" && color.planes.size() == 3) {
            save_color(restore_planes(color, res.kernel, cfg), base + ".restored.png");
        } else {
            save_image(res.latent, base + ".restored.png");
        }
        save_kernel_text(res.kernel, base + ".kernel.txt");
        save_kernel_image(res.kernel, base + ".kernel.png");
        if (flags.trace) write_trace_csv(res.trace, base + ".trace.csv");
        std::cout << "restored " << input << " -> " << base << ".restored.png ("
                  << res.preliminary_seconds + res.refine_seconds << " s)\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}

// ------------------------------------------------------------- deblur-nu ----

// Renders the local kernel induced by the pose weights at a grid of image
// regions: at region center p, pose i contributes weight k_i at displacement
// H_i p - p.
ImageBuffer render_pose_kernel_grid(const PoseWeights& w, const PoseBasis& basis, int width,
                                    int height, int grid = 3) {
    // Support: largest displacement over all poses and region centers.
    double max_disp = 1.0;
    auto displacement = [](const Pose& p, double x, double y, double* dx, double* dy) {
        double sx = p.m[0][0] * x + p.m[0][1] * y + p.m[0][2];
        double sy = p.m[1][0] * x + p.m[1][1] * y + p.m[1][2];
        double sw = p.m[2][0] * x + p.m[2][1] * y + p.m[2][2];
        *dx = sx / sw - x;
        *dy = sy / sw - y;
    };
    std::vector<std::pair<double, double>> centers;
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx)
            centers.emplace_back((gx + 0.5) * width / grid, (gy + 0.5) * height / grid);
    for (const Pose& p : basis.poses)
        for (auto [cx, cy] : centers) {
            double dx, dy;
            displacement(p, cx, cy, &dx, &dy);
            max_disp = std::max({max_disp, std::abs(dx), std::abs(dy)});
        }
    int support = 2 * static_cast<int>(std::ceil(max_disp)) + 3;
    support = std::min(support, 63);
    const int cell = support + 1;  // one-pixel separator
    ImageBuffer out(grid * cell + 1, grid * cell + 1, 0.25);
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx) {
            auto [cx, cy] = centers[static_cast<size_t>(gy) * grid + gx];
            ImageBuffer local(support, support, 0.0);
            const int c = support / 2;
            for (size_t i = 0; i < basis.size(); ++i) {
                if (w.k[i] == 0.0) continue;
                double dx, dy;
                displacement(basis.poses[i], cx, cy, &dx, &dy);
                double px = std::clamp(c + dx, 0.0, support - 1.0);
                double py = std::clamp(c + dy, 0.0, support - 1.0);
                int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
                double fx = px - x0, fy = py - y0;
                for (int jj = 0; jj <= 1; ++jj)
                    for (int ii = 0; ii <= 1; ++ii) {
                        int qx = x0 + ii, qy = y0 + jj;
                        if (qx >= support || qy >= support) continue;
                        local.at(qx, qy) += w.k[i] * (ii ? fx : 1 - fx) * (jj ? fy : 1 - fy);
                    }
            }
            double mx = 0.0;
            for (double v : local.pixels()) mx = std::max(mx, v);
            for (int y = 0; y < support; ++y)
                for (int x = 0; x < support; ++x)
                    out.at(gx * cell + 1 + x, gy * cell + 1 + y) =
                        mx > 0.0 ? local.at(x, y) / mx : 0.0;
        }
    return out;
}

int run_deblur_nu(const std::string& input, const CommonFlags& flags,
                  const PoseGridConfig& grid_cfg) {
    ImageBuffer b;
    DeblurConfig cfg;
    try {
        cfg = resolve_config(flags);
        cfg.validate();
        b = load_image(input);
        fs::create_directories(flags.out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    try {
        NuDeblurResult res = nu_blind_deblur(b, cfg, grid_cfg);
        std::string base = (fs::path(flags.out_dir) / stem_of(input)).string();
        save_image(res.latent, base + ".restored.png");
        json jw;
        jw["rot_extent_deg"] = grid_cfg.rot_extent_deg;
        jw["rot_steps"] = grid_cfg.rot_steps;
        jw["trans_extent"] = grid_cfg.trans_extent;
        jw["trans_steps"] = grid_cfg.trans_steps;
        jw["identity_index"] = res.basis.identity_index;
        jw["weights"] = res.weights.k;
        std::ofstream out(base + ".weights.json");
        if (!out) throw Error("cannot write weights file");
        out << jw.dump(2) << "\n";
        save_image(render_pose_kernel_grid(res.weights, res.basis, b.width(), b.height()),
                   base + ".kernelgrid.png");
        std::cout << "restored " << input << " -> " << base << ".restored.png\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}

// -------------------------------------------------------------- nonblind ----

int run_nonblind(const std::string& input, const std::string& kernel_path,
                 const CommonFlags& flags) {
    ColorImage color;
    BlurKernel k;
    DeblurConfig cfg;
    try {
        cfg = resolve_config(flags);
        color = load_color(input);
        k = load_kernel_text(kernel_path);
        fs::create_directories(flags.out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    try {
        std::string base = (fs::path(flags.out_dir) / stem_of(input)).string();
        if (flags.channels == "rgb" && color.planes.size() == 3) {
            save_color(restore_planes(color, k, cfg), base + ".restored.png");
        } else {
            save_image(tv_deblur(color.luminance(), k, cfg.mu, cfg.admm),
                       base + ".restored.png");
        }
        std::cout << "restored " << input << " -> " << base << ".restored.png\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}

// ----------------------------------------------------------------- synth ----

struct SynthFlags {
    int scenes = 3;
    int kernels = 2;
    int width = 256;
    int height = 256;
    double noise = 0.01;
    std::string sharp_dir;  // optional: blur existing images instead
};

int run_synth(const CommonFlags& flags, const SynthFlags& sf) {
    DeblurConfig cfg;
    std::vector<std::pair<std::string, ImageBuffer>> sharps;
    try {
        cfg = resolve_config(flags);
        if (cfg.kernel_size <= 0 || cfg.kernel_size % 2 == 0 || cfg.kernel_size < 3)
            throw Error("kernel size must be odd and at least 3");
        if (sf.noise < 0.0) throw Error("noise sigma must be nonnegative");
        fs::create_directories(flags.out_dir);
        if (!sf.sharp_dir.empty()) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(sf.sharp_dir)) {
                std::string ext = e.path().extension().string();
                if (ext == ".png" || ext == ".pgm") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) throw Error("no images found in: " + sf.sharp_dir);
            for (const auto& p : files) sharps.emplace_back(p.stem().string(), load_image(p.string()));
        } else {
            for (int i = 0; i < sf.scenes; ++i)
                sharps.emplace_back("scene" + std::to_string(i),
                                    synthetic_scene(sf.width, sf.height, flags.seed * 131 + i));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    try {
        struct Job {
            std::string name;
            const ImageBuffer* sharp;
            BlurKernel kernel;
            uint64_t noise_seed;
        };
        std::vector<Job> jobs;
        for (size_t s = 0; s < sharps.size(); ++s)
            for (int j = 0; j < sf.kernels; ++j) {
                uint64_t kseed = flags.seed * 977 + s * 37 + j * 7 + 1;
                jobs.push_back({sharps[s].first + "_k" + std::to_string(j), &sharps[s].second,
                                random_walk_kernel(cfg.kernel_size, kseed),
                                flags.seed * 499 + s * 17 + j + 3});
            }
        parallel_for(static_cast<int>(jobs.size()), [&](int i) {
            const Job& job = jobs[i];
            SyntheticBlurSpec spec{job.kernel, sf.noise, job.noise_seed};
            ImageBuffer blur = synth_blur(*job.sharp, spec);
            blur.clamp01();
            std::string base = (fs::path(flags.out_dir) / job.name).string();
            save_image(*job.sharp, base + ".sharp.png");
            save_image(blur, base + ".blur.png");
            save_kernel_text(job.kernel, base + ".kernel.txt");
        });
        std::cout << "wrote " << jobs.size() << " instances to " << flags.out_dir << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}

// ------------------------------------------------------------------ eval ----

int run_eval(const std::string& data_dir, const CommonFlags& flags) {
    DeblurConfig base_cfg;
    std::vector<std::string> names;
    try {
        base_cfg = resolve_config(flags);
        if (!fs::is_directory(data_dir)) throw Error("not a directory: " + data_dir);
        for (const auto& e : fs::directory_iterator(data_dir)) {
            std::string fn = e.path().filename().string();
            const std::string suffix = ".blur.png";
            if (fn.size() > suffix.size() && fn.ends_with(suffix))
                names.push_back(fn.substr(0, fn.size() - suffix.size()));
        }
        std::sort(names.begin(), names.end());
        if (names.empty()) throw Error("no *.blur.png instances in: " + data_dir);
        fs::create_directories(flags.out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    try {
        EvalReport report;
        report.records.resize(names.size());
        parallel_for(static_cast<int>(names.size()), [&](int i) {
            const std::string& name = names[i];
            fs::path dir(data_dir);
            ImageBuffer sharp = load_image((dir / (name + ".sharp.png")).string());
            ImageBuffer blur = load_image((dir / (name + ".blur.png")).string());
            BlurKernel ktrue = load_kernel_text((dir / (name + ".kernel.txt")).string());

            DeblurConfig cfg = base_cfg;
            if (flags.kernel_size <= 0) cfg.kernel_size = ktrue.size();
            auto t0 = std::chrono::steady_clock::now();
            DeblurResult res = blind_deblur(blur, cfg);
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            ImageBuffer x_k = tv_deblur(blur, ktrue, cfg.mu, cfg.admm);

            EvalRecord rec;
            rec.name = name;
            rec.error_ratio = error_ratio(sharp, res.latent, x_k, &rec.degenerate_denominator);
            rec.kernel_similarity = kernel_similarity(res.kernel, ktrue);
            rec.psnr = psnr(res.latent, sharp);
            rec.runtime_seconds = secs;
            report.records[i] = rec;
        });

        std::string csv_path = (fs::path(flags.out_dir) / "report.csv").string();
        std::ofstream csv(csv_path);
        if (!csv) throw Error("cannot write report file: " + csv_path);
        csv << "name,error_ratio,kernel_similarity,psnr,runtime_seconds,degenerate\n";
        csv.precision(17);
        for (const auto& r : report.records)
            csv << r.name << "," << r.error_ratio << "," << r.kernel_similarity << "," << r.psnr
                << "," << r.runtime_seconds << "," << (r.degenerate_denominator ? 1 : 0) << "\n";

        std::cout.precision(6);
        std::cout << "instances: " << report.records.size() << "\n"
                  << "mean_error_ratio: " << report.mean_error_ratio() << "\n"
                  << "median_error_ratio: " << report.median_error_ratio() << "\n"
                  << "worst_error_ratio: " << report.worst_error_ratio() << "\n"
                  << "success_rate: " << report.success_rate() << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}

// ---------------------------------------------------------------- claim1 ----

struct Claim1Flags {
    double sigma = 2.0;
    int steps = 12;
    int scene_size = 256;
    std::string kernel_path;  // optional: sweep a stored kernel instead
};

int run_claim1(const CommonFlags& flags, const Claim1Flags& cf) {
    BlurKernel k;
    DeblurConfig cfg;
    try {
        cfg = resolve_config(flags);
        if (!cf.kernel_path.empty()) {
            k = load_kernel_text(cf.kernel_path);
        } else {
            int ks = cfg.kernel_size > 0 ? cfg.kernel_size : 13;
            k = gaussian_kernel(ks, cf.sigma);
        }
        if (cf.steps < 2) throw Error("need at least two sweep steps");
        fs::create_directories(flags.out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    try {
        ImageBuffer x = synthetic_scene(cf.scene_size, cf.scene_size, flags.seed + 11);
        ImageBuffer b = convolve2d(x, k);
        std::string csv_path = (fs::path(flags.out_dir) / "claim1.csv").string();
        std::ofstream csv(csv_path);
        if (!csv) throw Error("cannot write CSV file: " + csv_path);
        csv << "alpha,delta_distance,commutation_error\n";
        csv.precision(17);
        for (int i = 0; i < cf.steps; ++i) {
            double alpha = 1.0 + (k.size() - 1.0) * i / (cf.steps - 1.0);
            double dd = delta_distance(downsample_kernel(k, alpha));
            ImageBuffer db = lowpass_downsample(b, alpha);
            ImageBuffer dx = lowpass_downsample(x, alpha);
            double mae = 0.0;
            for (size_t n = 0; n < db.size(); ++n)
                mae += std::abs(db.data()[n] - dx.data()[n]);
            mae /= static_cast<double>(db.size());
            csv << alpha << "," << dd << "," << mae << "\n";
        }
        std::cout << "wrote " << csv_path << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}

// -------------------------------------------------------------- schedule ----

int run_schedule(int width, int height, const CommonFlags& flags, double beta) {
    try {
        DeblurConfig cfg = resolve_config(flags);
        if (beta > 0.0) cfg.beta = beta;
        ScaleSchedule s = build_schedule(width, height, cfg.kernel_size, cfg.beta);
        json j;
        j["beta"] = s.beta;
        j["levels"] = json::array();
        for (const auto& l : s.levels)
            j["levels"].push_back({{"level", l.level},
                                   {"width", l.width},
                                   {"height", l.height},
                                   {"kernel_size", l.kernel_size},
                                   {"factor", l.factor}});
        std::cout << j.dump(2) << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Blind image deblurring with multi-scale self-example priors"};
    app.require_subcommand(1);

    CommonFlags deblur_flags;
    std::string deblur_input;
    CLI::App* cmd_deblur = app.add_subcommand("deblur", "blind uniform deblurring");
    cmd_deblur->add_option("input", deblur_input, "blurry image")->required();
    add_common(cmd_deblur, deblur_flags, /*with_channels=*/true);

    CommonFlags nu_flags;
    std::string nu_input;
    PoseGridConfig grid_cfg;
    CLI::App* cmd_nu = app.add_subcommand("deblur-nu", "blind non-uniform deblurring");
    cmd_nu->add_option("input", nu_input, "blurry image")->required();
    add_common(cmd_nu, nu_flags);
    cmd_nu->add_option("--rot-extent", grid_cfg.rot_extent_deg, "rotation extent, degrees");
    cmd_nu->add_option("--rot-steps", grid_cfg.rot_steps, "rotation grid steps (odd)");
    cmd_nu->add_option("--trans-extent", grid_cfg.trans_extent, "translation extent, pixels");
    cmd_nu->add_option("--trans-steps", grid_cfg.trans_steps, "translation grid steps (odd)");

    CommonFlags nb_flags;
    std::string nb_input, nb_kernel;
    CLI::App* cmd_nb = app.add_subcommand("nonblind", "deconvolution with a supplied kernel");
    cmd_nb->add_option("input", nb_input, "blurry image")->required();
    cmd_nb->add_option("kernel", nb_kernel, "kernel text file")->required();
    add_common(cmd_nb, nb_flags, /*with_channels=*/true);

    CommonFlags synth_flags;
    synth_flags.kernel_size = 15;
    SynthFlags sf;
    CLI::App* cmd_synth = app.add_subcommand("synth", "generate a synthetic blurry test set");
    add_common(cmd_synth, synth_flags);
    cmd_synth->add_option("--scenes", sf.scenes, "number of generated sharp scenes");
    cmd_synth->add_option("--kernels", sf.kernels, "kernels per scene");
    cmd_synth->add_option("--width", sf.width, "scene width");
    cmd_synth->add_option("--height", sf.height, "scene height");
    cmd_synth->add_option("--noise", sf.noise, "Gaussian noise sigma");
    cmd_synth->add_option("--sharp-dir", sf.sharp_dir, "blur existing images from this directory");

    CommonFlags eval_flags;
    std::string eval_dir;
    CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate blind deblurring over a directory");
    cmd_eval->add_option("data-dir", eval_dir, "directory of *.sharp.png/*.blur.png/*.kernel.txt")
        ->required();
    add_common(cmd_eval, eval_flags);

    CommonFlags c1_flags;
    Claim1Flags cf;
    CLI::App* cmd_c1 = app.add_subcommand(
        "claim1", "sweep the down-sampling factor; CSV of kernel-to-delta distance");
    add_common(cmd_c1, c1_flags);
    cmd_c1->add_option("--sigma", cf.sigma, "Gaussian kernel sigma");
    cmd_c1->add_option("--steps", cf.steps, "number of sweep points");
    cmd_c1->add_option("--scene-size", cf.scene_size, "synthetic scene side length");
    cmd_c1->add_option("--kernel", cf.kernel_path, "sweep a stored kernel instead");

    CommonFlags sched_flags;
    int sched_w = 0, sched_h = 0;
    double sched_beta = 0.0;
    CLI::App* cmd_sched = app.add_subcommand("schedule", "print the pyramid plan as JSON");
    cmd_sched->add_option("width", sched_w, "image width")->required();
    cmd_sched->add_option("height", sched_h, "image height")->required();
    add_common(cmd_sched, sched_flags);
    cmd_sched->add_option("--beta", sched_beta, "pyramid scale factor");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitBadInput;
    }

    if (cmd_deblur->parsed()) return run_deblur(deblur_input, deblur_flags);
    if (cmd_nu->parsed()) return run_deblur_nu(nu_input, nu_flags, grid_cfg);
    if (cmd_nb->parsed()) return run_nonblind(nb_input, nb_kernel, nb_flags);
    if (cmd_synth->parsed()) return run_synth(synth_flags, sf);
    if (cmd_eval->parsed()) return run_eval(eval_dir, eval_flags);
    if (cmd_c1->parsed()) return run_claim1(c1_flags, cf);
    if (cmd_sched->parsed()) return run_schedule(sched_w, sched_h, sched_flags, sched_beta);
    return kExitBadInput;
}
