// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace specray {

// Counter-based pseudo-random stream. The sequence is a pure function of
// (seed, stream_id), so any consumer of stream i produces the same draws no
// matter which worker runs it or in what order streams are interleaved.
// Core mixer is splitmix64.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t stream_id)
        : state_(mix(seed ^ mix(stream_id + 0x9E3779B97F4A7C15ull))) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    uint64_t state_;
};

} // namespace specray
