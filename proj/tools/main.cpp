// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "specray/ddm.hpp"
#include "specray/errors.hpp"
#include "specray/image_io.hpp"
#include "specray/procedural.hpp"
#include "specray/scheduler.hpp"
#include "specray/sweep.hpp"

namespace {

using namespace specray;

struct RenderArgs {
    std::string scene_path;
    std::string algorithm = "scanline";
    int threads = 1;
    int tile_size = 32;
    int group_size = 0; // 0: use the scene setting
    int subdomains = 1;
    int memory_budget = 0; // 0: equal to subdomains
    double watermark_low = 0.01;
    double watermark_high = 0.10;
    uint64_t seed = 0; // 0: use the scene setting
    std::string out = "out.pfm";
    std::string png;
    std::string spectral_dump;
    std::string event_log;
    std::string job_log;
    bool emit_channels = false;
};

int cmd_render(const RenderArgs& args) {
    Scene scene = load_scene(args.scene_path);
    if (args.seed != 0) scene.settings.seed = args.seed;
    int group_size = args.group_size > 0 ? args.group_size : scene.settings.spectral_group_size;

    auto t0 = std::chrono::steady_clock::now();

    PhotonMaps maps;
    bool global = args.algorithm == "photonmap";
    if (global)
        maps = run_photon_jobs(scene, scene.settings.photon_count, args.threads,
                               scene.settings.seed);

    Framebuffer fb;
    GlobalChannels channels;
    RunReport report;
    DdmReport ddm_report;
    if (args.subdomains > 1) {
        DdmOptions opt;
        opt.subdomains = args.subdomains;
        opt.workers = args.threads;
        opt.memory_budget = args.memory_budget > 0 ? args.memory_budget : args.subdomains;
        opt.watermark_low = args.watermark_low;
        opt.watermark_high = args.watermark_high;
        opt.photon_maps = global ? &maps : nullptr;
        opt.collect_events = !args.event_log.empty();
        fb = run_ddm(scene, opt, &ddm_report);
        if (!args.event_log.empty()) write_event_log_csv(args.event_log, ddm_report.events);
    } else if (group_size < kBandCount && !global) {
        fb = run_spectral_groups(scene, group_size, args.threads,
                                 args.job_log.empty() ? nullptr : &report);
    } else if (global) {
        fb = run_tiled_global(scene, maps, args.tile_size, args.threads,
                              args.job_log.empty() ? nullptr : &report,
                              args.emit_channels ? &channels : nullptr);
    } else {
        fb = run_tiled(scene, args.tile_size, args.threads,
                       args.job_log.empty() ? nullptr : &report);
    }

    auto t1 = std::chrono::steady_clock::now();
    double seconds = std::chrono::duration<double>(t1 - t0).count();

    write_pfm(args.out, fb);
    if (!args.png.empty()) write_png_rgb8(args.png, fb);
    if (!args.spectral_dump.empty()) write_spectral_dump(args.spectral_dump, fb);
    if (!args.job_log.empty()) write_claim_csv(args.job_log, report);
    if (args.emit_channels && global && args.subdomains <= 1) {
        namespace fs = std::filesystem;
        fs::path base(args.out);
        auto channel_path = [&](const char* name) {
            fs::path p = base;
            p.replace_extension(std::string(".") + name + ".pfm");
            return p.string();
        };
        write_pfm(channel_path("direct"), channels.direct);
        write_pfm(channel_path("specular"), channels.specular);
        write_pfm(channel_path("caustic"), channels.caustic);
        write_pfm(channel_path("indirect"), channels.indirect);
    }

    std::printf("rendered %dx%d (%s, threads=%d, subdomains=%d) in %.3f s -> %s\n",
                fb.width, fb.height, args.algorithm.c_str(), args.threads, args.subdomains,
                seconds, args.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"specray: full-spectral ray tracer with domain-decomposition scheduling"};
    app.require_subcommand(1);

    RenderArgs render_args;
    CLI::App* render = app.add_subcommand("render", "Render a scene to PFM/PNG");
    render->add_option("--scene", render_args.scene_path, "Scene JSON file")->required();
    render->add_option("--algorithm", render_args.algorithm, "scanline|photonmap")
        ->check(CLI::IsMember({"scanline", "photonmap"}));
    render->add_option("--threads", render_args.threads)->check(CLI::PositiveNumber);
    render->add_option("--tile-size", render_args.tile_size)->check(CLI::PositiveNumber);
    render->add_option("--spectral-group-size", render_args.group_size)
        ->check(CLI::Range(1, static_cast<int>(kBandCount)));
    render->add_option("--subdomains", render_args.subdomains)->check(CLI::PositiveNumber);
    render->add_option("--memory-budget", render_args.memory_budget)->check(CLI::PositiveNumber);
    render->add_option("--watermark-low", render_args.watermark_low);
    render->add_option("--watermark-high", render_args.watermark_high);
    render->add_option("--seed", render_args.seed);
    render->add_option("--out", render_args.out, "Output PFM path");
    render->add_option("--png", render_args.png, "Also write an 8-bit sRGB PNG");
    render->add_option("--spectral-dump", render_args.spectral_dump, "Raw 81-band dump");
    render->add_option("--event-log", render_args.event_log, "DDM event log CSV");
    render->add_option("--job-log", render_args.job_log, "Per-job claim CSV");
    render->add_flag("--emit-channels", render_args.emit_channels,
                     "Write the four photon-mapping contributions separately");

    std::string sweep_scene, sweep_out = "sweep_out", sweep_algorithm = "scanline";
    std::vector<int> sweep_threads{1, 2, 4, 8}, sweep_subs{1, 2, 4, 8};
    int sweep_reps = 5, sweep_tile = 32;
    bool sweep_no_warmup = false;
    CLI::App* sweep = app.add_subcommand("sweep", "Timed speedup sweep over threads x sub-domains");
    sweep->add_option("--scene", sweep_scene)->required();
    sweep->add_option("--threads", sweep_threads, "Thread counts")->delimiter(',');
    sweep->add_option("--subdomains", sweep_subs, "Sub-domain counts")->delimiter(',');
    sweep->add_option("--repetitions", sweep_reps)->check(CLI::PositiveNumber);
    sweep->add_option("--algorithm", sweep_algorithm)
        ->check(CLI::IsMember({"scanline", "photonmap"}));
    sweep->add_option("--tile-size", sweep_tile)->check(CLI::PositiveNumber);
    sweep->add_option("--out-dir", sweep_out);
    sweep->add_flag("--no-warmup", sweep_no_warmup);

    std::string check_scene;
    CLI::App* check = app.add_subcommand("scene-check", "Validate a scene file and exit");
    check->add_option("--scene", check_scene)->required();

    std::string nave_out = "nave";
    int nave_triangles = 2000, nave_image = 256;
    CLI::App* gen = app.add_subcommand("gen-nave", "Emit the procedural benchmark scene");
    gen->add_option("--out", nave_out, "Output directory");
    gen->add_option("--triangles", nave_triangles)->check(CLI::PositiveNumber);
    gen->add_option("--image", nave_image, "Square image resolution")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2; // usage errors exit 2
    }

    try {
        if (render->parsed()) return cmd_render(render_args);
        if (sweep->parsed()) {
            Scene scene = load_scene(sweep_scene);
            SweepConfig config;
            config.threads = sweep_threads;
            config.subdomains = sweep_subs;
            config.repetitions = sweep_reps;
            config.algorithm = sweep_algorithm;
            config.tile_size = sweep_tile;
            config.warmup = !sweep_no_warmup;
            config.out_dir = sweep_out;
            SweepResult result = run_sweep(scene, config);
            std::cout << sweep_markdown_table(config, result);
            std::printf("baseline %.3f s; results in %s\n", result.baseline_seconds,
                        sweep_out.c_str());
            if (!result.all_valid()) {
                std::fprintf(stderr, "sweep: at least one cell failed validation\n");
                return 1;
            }
            return 0;
        }
        if (check->parsed()) {
            Scene scene = load_scene(check_scene);
            std::printf("ok: %zu triangles, %zu materials, %zu lights, %dx%d image\n",
                        scene.triangles.size(), scene.materials.size(), scene.lights.size(),
                        scene.camera.width, scene.camera.height);
            return 0;
        }
        if (gen->parsed()) {
            NaveParams params;
            params.target_triangles = nave_triangles;
            params.image_width = params.image_height = nave_image;
            write_nave_assets(nave_out, params);
            std::printf("wrote %s/scene.json\n", nave_out.c_str());
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
