// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "specray/scene.hpp"

namespace specray {

struct SweepConfig {
    std::vector<int> threads{1, 2, 4, 8};
    std::vector<int> subdomains{1, 2, 4, 8};
    int repetitions = 5;             // odd keeps the median an actual sample
    std::string algorithm = "scanline"; // or "photonmap"
    bool warmup = true;
    int tile_size = 32;
    std::string out_dir;             // empty: no files written
    double tolerance = 1e-6;         // per-band relative validation bound
};

struct SweepCell {
    int subdomains = 0;
    int threads = 0;
    std::vector<double> seconds;    // one entry per repetition
    double median_seconds = 0.0;
    double speedup = 0.0;           // baseline / median
    bool valid = false;             // image matched the serial reference
};

struct SweepResult {
    double baseline_seconds = 0.0;  // single-thread single-sub-domain median
    std::vector<SweepCell> cells;

    bool all_valid() const;
    const SweepCell* cell(int subdomains, int threads) const;
};

// Times every (sub-domains x threads) cell with `repetitions` runs (median
// reported), validating each cell's image against the serial reference before
// its timing counts. Writes sweep.csv and sweep.md into out_dir when set.
SweepResult run_sweep(const Scene& scene, const SweepConfig& config);

std::string sweep_markdown_table(const SweepConfig& config, const SweepResult& result);

} // namespace specray
