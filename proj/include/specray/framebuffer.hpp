// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "specray/spectrum.hpp"

namespace specray {

// Full-spectral accumulation target. Parallel writers are partitioned by
// pixel (tiles) or by band range (spectral groups), never overlapping.
struct Framebuffer {
    int width = 0;
    int height = 0;
    std::vector<Spectrum> pixels;
    std::vector<uint8_t> done; // per-pixel status flag

    Framebuffer() = default;
    Framebuffer(int w, int h)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h), done(static_cast<size_t>(w) * h, 0) {}

    Spectrum& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    const Spectrum& at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

    size_t pixel_count() const { return pixels.size(); }

    bool bitwise_equal(const Framebuffer& o) const {
        if (width != o.width || height != o.height) return false;
        for (size_t i = 0; i < pixels.size(); ++i)
            if (!(pixels[i] == o.pixels[i])) return false;
        return true;
    }
};

// max over pixels/bands of |a-b| / max(|a|, |b|, floor); the decomposition
// tolerance checks use floor = 1e-12 so empty pixels compare equal.
double max_relative_deviation(const Framebuffer& a, const Framebuffer& b, double floor = 1e-12);

} // namespace specray
