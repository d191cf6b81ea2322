// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "specray/ddm.hpp"
#include "specray/errors.hpp"
#include "specray/image_io.hpp"
#include "specray/scheduler.hpp"

namespace specray {

bool SweepResult::all_valid() const {
    for (const auto& c : cells)
        if (!c.valid) return false;
    return true;
}

const SweepCell* SweepResult::cell(int subdomains, int threads) const {
    for (const auto& c : cells)
        if (c.subdomains == subdomains && c.threads == threads) return &c;
    return nullptr;
}

namespace {

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[values.size() / 2];
}

struct TimedRender {
    Framebuffer image;
    double seconds = 0.0;
};

// Every cell (including the 1-sub-domain row) times the decomposition
// program itself; only the speedup baseline is the plain serial renderer.
TimedRender timed_render(const Scene& scene, const SweepConfig& config, int subs, int threads) {
    auto t0 = std::chrono::steady_clock::now();
    Framebuffer fb;
    if (subs == 1 && threads == 1 && config.algorithm == "scanline") {
        fb = run_tiled(scene, config.tile_size, 1); // serial baseline path
    } else {
        DdmOptions opt;
        opt.subdomains = subs;
        opt.workers = threads;
        opt.memory_budget = subs;
        PhotonMaps maps;
        if (config.algorithm == "photonmap") {
            maps = run_photon_jobs(scene, scene.settings.photon_count, threads,
                                   scene.settings.seed);
            opt.photon_maps = &maps;
        }
        opt.collect_events = false;
        fb = run_ddm(scene, opt);
    }
    auto t1 = std::chrono::steady_clock::now();
    TimedRender out;
    out.image = std::move(fb);
    // Whole nanoseconds, so the emitted CSV reproduces these values exactly.
    out.seconds =
        1e-9 * static_cast<double>(
                   std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    return out;
}

} // namespace

SweepResult run_sweep(const Scene& scene, const SweepConfig& config) {
    if (config.threads.empty() || config.subdomains.empty() || config.repetitions < 1)
        throw InvalidArgument("sweep: thread/sub-domain lists must be non-empty, repetitions >= 1");
    if (config.algorithm != "scanline" && config.algorithm != "photonmap")
        throw InvalidArgument("sweep: algorithm must be scanline or photonmap");

    if (config.warmup) timed_render(scene, config, 1, 1);

    // Serial reference: image correctness oracle and speedup baseline.
    SweepResult result;
    Framebuffer reference;
    std::vector<double> baseline_times;
    for (int r = 0; r < config.repetitions; ++r) {
        TimedRender run = timed_render(scene, config, 1, 1);
        baseline_times.push_back(run.seconds);
        if (r == 0) reference = std::move(run.image);
    }
    result.baseline_seconds = median_of(baseline_times);

    for (int subs : config.subdomains) {
        for (int threads : config.threads) {
            SweepCell cell;
            cell.subdomains = subs;
            cell.threads = threads;
            cell.valid = true;
            if (subs == 1 && threads == 1) {
                // The baseline cell is the baseline: speedup 1 by definition.
                cell.seconds = baseline_times;
            } else {
                for (int r = 0; r < config.repetitions; ++r) {
                    TimedRender run = timed_render(scene, config, subs, threads);
                    cell.seconds.push_back(run.seconds);
                    if (r == 0) {
                        // Timings of wrong answers are meaningless.
                        if (subs == 1) {
                            cell.valid = run.image.bitwise_equal(reference);
                        } else {
                            cell.valid =
                                max_relative_deviation(run.image, reference) <= config.tolerance;
                        }
                    }
                }
            }
            cell.median_seconds = median_of(cell.seconds);
            cell.speedup = result.baseline_seconds / cell.median_seconds;
            result.cells.push_back(std::move(cell));
        }
    }

    if (!config.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(config.out_dir);
        std::ofstream csv(fs::path(config.out_dir) / "sweep.csv");
        csv << "subdomains,threads,run_index,wall_ns\n";
        for (const auto& cell : result.cells)
            for (size_t r = 0; r < cell.seconds.size(); ++r)
                csv << cell.subdomains << "," << cell.threads << "," << r << ","
                    << static_cast<uint64_t>(std::llround(cell.seconds[r] * 1e9)) << "\n";
        std::ofstream md(fs::path(config.out_dir) / "sweep.md");
        md << sweep_markdown_table(config, result);
    }
    return result;
}

std::string sweep_markdown_table(const SweepConfig& config, const SweepResult& result) {
    std::ostringstream md;
    md << "| |";
    for (int t : config.threads) md << " " << t << " threads |";
    md << "\n|---|";
    for (size_t i = 0; i < config.threads.size(); ++i) md << "---|";
    md << "\n";
    for (int subs : config.subdomains) {
        md << "| " << subs << (subs == 1 ? " sub-domain" : " sub-domains") << " |";
        for (int t : config.threads) {
            const SweepCell* cell = result.cell(subs, t);
            md << " ";
            if (!cell) {
                md << "-";
            } else if (!cell->valid) {
                md << "INVALID";
            } else {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.2f", cell->speedup);
                md << buf;
            }
            md << " |";
        }
        md << "\n";
    }
    return md.str();
}

} // namespace specray
