// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <string>
#include <vector>

#include "specray/render_global.hpp"
#include "specray/render_local.hpp"

namespace specray {

// Shared claim cursor: every job id in [0, total) is handed out exactly once,
// in order, with one atomic increment per claim.
class JobQueue {
public:
    explicit JobQueue(int total) : total_(total) {}

    // Next unclaimed job id, or -1 when drained.
    int claim() {
        int id = cursor_.fetch_add(1, std::memory_order_relaxed);
        return id < total_ ? id : -1;
    }

    int total() const { return total_; }

private:
    std::atomic<int> cursor_{0};
    int total_;
};

struct ClaimRecord {
    int job_id = 0;
    int worker_id = 0;
    uint64_t claim_ns = 0;
    uint64_t finish_ns = 0;
};

struct RunReport {
    std::vector<ClaimRecord> claims; // sorted by claim time per worker
};

void write_claim_csv(const std::string& path, const RunReport& report);

// Largest per-worker idle gap while unclaimed jobs remained, and the longest
// single job, both in ns. The balancing property bounds the former by the
// latter.
struct LivenessStats {
    uint64_t max_idle_gap_ns = 0;
    uint64_t max_job_ns = 0;
};
LivenessStats analyze_liveness(const RunReport& report);

std::vector<TileRect> make_tiles(int width, int height, int tile_size);

// Dynamic tile-balanced render; bit-identical to the serial render for any
// worker count or tile size (pixels are written by exactly one job).
Framebuffer run_tiled(const Scene& scene, int tile_size, int worker_count,
                      RunReport* report = nullptr);

// Same scheduling for the photon-mapping camera pass against shared maps.
Framebuffer run_tiled_global(const Scene& scene, const PhotonMaps& maps, int tile_size,
                             int worker_count, RunReport* report = nullptr,
                             GlobalChannels* channels = nullptr);

// Photon shooting with dynamically claimed photon-index ranges; the stored
// multiset equals the serial shoot_photons result for any worker count.
PhotonMaps run_photon_jobs(const Scene& scene, uint32_t emit_count, int worker_count, uint64_t seed,
                           RunReport* report = nullptr);

// One job per spectral group; each job renders the full image restricted to
// its band range. The grouped result is bit-identical to the ungrouped render.
Framebuffer run_spectral_groups(const Scene& scene, int group_size, int worker_count,
                                RunReport* report = nullptr);

} // namespace specray
