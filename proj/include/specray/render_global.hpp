// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "specray/photon_map.hpp"
#include "specray/render_local.hpp"
#include "specray/scene.hpp"

namespace specray {

struct PhotonMaps {
    PhotonMap global;  // every diffuse store not classified as caustic
    PhotonMap caustic; // first diffuse hit after a specular chain
};

// Deterministic per-light photon allocation: counts split proportionally to
// emitted power (largest remainder, total exact), photon index ranges mapped
// to lights by prefix sums. Photon paths draw from a counter-based stream
// keyed by (seed, photon index), so the stored multiset is independent of how
// indices are distributed over workers.
struct LightEmission {
    int light = 0;
    uint32_t first = 0;
    uint32_t count = 0;
    Spectrum photon_power; // per emitted photon
};

std::vector<LightEmission> plan_photon_emission(const Scene& scene, uint32_t emit_count);

// A photon store tagged with its origin for deterministic merging.
struct StampedPhoton {
    uint32_t photon_index = 0;
    uint16_t bounce_seq = 0;
    bool caustic = false;
    Photon photon;
};

struct PhotonTraceOptions {
    bool force_survival = false; // disable Russian roulette (tests)
    int depth_cap = 64;
};

// Traces a single emitted photon through the scene, appending every diffuse
// store to `out`.
void trace_photon(const Scene& scene, const std::vector<LightEmission>& plan, uint32_t photon_index,
                  uint64_t seed, std::vector<StampedPhoton>& out, const PhotonTraceOptions& opt = {});

// Builds both maps from stamped stores (sorted by (photon_index, bounce_seq)).
PhotonMaps build_photon_maps(std::vector<StampedPhoton> stores, uint64_t emitted);

// Serial reference shooting pass. Throws ValidationError when the scene has
// no lights.
PhotonMaps shoot_photons(const Scene& scene, uint32_t emit_count, uint64_t seed,
                         const PhotonTraceOptions& opt = {});

// The four per-pixel contributions, individually dumpable.
struct GlobalChannels {
    Framebuffer direct, specular, caustic, indirect;
};

// direct + specular exactly as the local renderer computes them (one shared
// accumulator, so a zero-photon render reproduces render_local bit for bit),
// plus caustic/indirect-diffuse radiance estimates at the primary hit.
void render_global_tile(const Scene& scene, const PhotonMaps& maps, Framebuffer& fb,
                        const TileRect& tile, BandRange bands, GlobalChannels* channels = nullptr);

Framebuffer render_global(const Scene& scene, const PhotonMaps& maps,
                          GlobalChannels* channels = nullptr);

} // namespace specray
