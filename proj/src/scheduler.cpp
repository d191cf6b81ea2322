// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "specray/errors.hpp"

namespace specray {

namespace {

uint64_t now_ns() {
    return static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

// Runs `work(job_id, worker_id)` for every job exactly once across
// worker_count threads, recording claim/finish stamps.
template <typename Work>
void run_job_pool(int job_count, int worker_count, RunReport* report, Work&& work) {
    JobQueue queue(job_count);
    std::mutex report_mu;

    auto worker = [&](int worker_id) {
        std::vector<ClaimRecord> local;
        for (;;) {
            int job = queue.claim();
            if (job < 0) break;
            uint64_t t0 = now_ns();
            work(job, worker_id);
            uint64_t t1 = now_ns();
            if (report) local.push_back({job, worker_id, t0, t1});
        }
        if (report && !local.empty()) {
            std::lock_guard<std::mutex> lock(report_mu);
            report->claims.insert(report->claims.end(), local.begin(), local.end());
        }
    };

    if (worker_count <= 1) {
        worker(0);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(worker_count);
    for (int w = 0; w < worker_count; ++w) threads.emplace_back(worker, w);
    for (auto& t : threads) t.join();
}

} // namespace

void write_claim_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw InvalidData("cannot write claim log: " + path);
    out << "job_id,worker_id,claim_ns,finish_ns\n";
    for (const auto& c : report.claims)
        out << c.job_id << "," << c.worker_id << "," << c.claim_ns << "," << c.finish_ns << "\n";
}

LivenessStats analyze_liveness(const RunReport& report) {
    LivenessStats stats;
    if (report.claims.empty()) return stats;

    uint64_t last_claim = 0;
    for (const auto& c : report.claims) {
        stats.max_job_ns = std::max(stats.max_job_ns, c.finish_ns - c.claim_ns);
        last_claim = std::max(last_claim, c.claim_ns);
    }

    std::map<int, std::vector<ClaimRecord>> per_worker;
    for (const auto& c : report.claims) per_worker[c.worker_id].push_back(c);
    for (auto& [worker, claims] : per_worker) {
        std::sort(claims.begin(), claims.end(),
                  [](const ClaimRecord& a, const ClaimRecord& b) { return a.claim_ns < b.claim_ns; });
        for (size_t i = 1; i < claims.size(); ++i) {
            // Idle between finishing one job and claiming the next, counted
            // only while the queue still had work (approximated by the last
            // claim instant anywhere).
            if (claims[i - 1].finish_ns < last_claim) {
                uint64_t gap = claims[i].claim_ns - claims[i - 1].finish_ns;
                stats.max_idle_gap_ns = std::max(stats.max_idle_gap_ns, gap);
            }
        }
    }
    return stats;
}

std::vector<TileRect> make_tiles(int width, int height, int tile_size) {
    if (tile_size < 1) throw InvalidArgument("tile size must be >= 1");
    std::vector<TileRect> tiles;
    for (int y = 0; y < height; y += tile_size)
        for (int x = 0; x < width; x += tile_size)
            tiles.push_back({x, y, std::min(x + tile_size, width), std::min(y + tile_size, height)});
    return tiles;
}

Framebuffer run_tiled(const Scene& scene, int tile_size, int worker_count, RunReport* report) {
    if (worker_count < 1) throw InvalidArgument("worker count must be >= 1");
    Framebuffer fb(scene.camera.width, scene.camera.height);
    auto tiles = make_tiles(fb.width, fb.height, tile_size);
    run_job_pool(static_cast<int>(tiles.size()), worker_count, report,
                 [&](int job, int) { render_local_tile(scene, fb, tiles[job], {}); });
    return fb;
}

Framebuffer run_tiled_global(const Scene& scene, const PhotonMaps& maps, int tile_size,
                             int worker_count, RunReport* report, GlobalChannels* channels) {
    if (worker_count < 1) throw InvalidArgument("worker count must be >= 1");
    Framebuffer fb(scene.camera.width, scene.camera.height);
    if (channels) {
        channels->direct = Framebuffer(fb.width, fb.height);
        channels->specular = Framebuffer(fb.width, fb.height);
        channels->caustic = Framebuffer(fb.width, fb.height);
        channels->indirect = Framebuffer(fb.width, fb.height);
    }
    auto tiles = make_tiles(fb.width, fb.height, tile_size);
    run_job_pool(static_cast<int>(tiles.size()), worker_count, report, [&](int job, int) {
        render_global_tile(scene, maps, fb, tiles[job], {}, channels);
    });
    return fb;
}

PhotonMaps run_photon_jobs(const Scene& scene, uint32_t emit_count, int worker_count, uint64_t seed,
                           RunReport* report) {
    if (worker_count < 1) throw InvalidArgument("worker count must be >= 1");
    auto plan = plan_photon_emission(scene, emit_count);

    constexpr uint32_t kChunk = 4096; // photon indices per job
    int job_count = static_cast<int>((emit_count + kChunk - 1) / kChunk);

    std::vector<std::vector<StampedPhoton>> per_worker(std::max(1, worker_count));
    run_job_pool(job_count, worker_count, report, [&](int job, int worker_id) {
        uint32_t begin = static_cast<uint32_t>(job) * kChunk;
        uint32_t end = std::min(emit_count, begin + kChunk);
        auto& out = per_worker[worker_id];
        for (uint32_t i = begin; i < end; ++i) trace_photon(scene, plan, i, seed, out);
    });

    // Stores are keyed by (photon index, bounce) so the merged population is
    // independent of which worker produced them.
    std::vector<StampedPhoton> all;
    for (auto& v : per_worker) {
        all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
        v.clear();
    }
    return build_photon_maps(std::move(all), emit_count);
}

Framebuffer run_spectral_groups(const Scene& scene, int group_size, int worker_count,
                                RunReport* report) {
    if (worker_count < 1) throw InvalidArgument("worker count must be >= 1");
    auto groups = split_groups(group_size);
    Framebuffer fb(scene.camera.width, scene.camera.height);
    TileRect whole{0, 0, fb.width, fb.height};
    // Group jobs write disjoint band ranges of every pixel; the in-place
    // writes are the band-order concatenation merge_groups performs.
    run_job_pool(static_cast<int>(groups.size()), worker_count, report, [&](int job, int) {
        render_local_tile(scene, fb, whole, groups[job].bands(),
                          static_cast<uint16_t>(groups[job].index));
    });
    return fb;
}

} // namespace specray
