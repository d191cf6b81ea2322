// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "specray/framebuffer.hpp"
#include "specray/scene.hpp"

namespace specray {

// Pixel rectangle [x0, x1) x [y0, y1).
struct TileRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Primary ray for a pixel center: orthographic rays share the view direction
// and start on the world-space image plane; pinhole rays start at the camera
// position. Throws InvalidArgument when the pixel is out of range.
Ray generate_primary_ray(const Camera& camera, int x, int y);

// Material at a hit after distribution-map resolution: rho/ior/flags come from
// the mapped material when the surface carries a map, and the interior
// thickness comes from the map texel.
struct ResolvedSurface {
    const Material* material = nullptr;
    Spectrum rho;
    const ComplexIor* ior = nullptr;
    double thickness_m = 0.0;
    bool diffuse = false;
    bool specular_reflect = false;
    bool specular_transmit = false;
    bool thin = false;
};

ResolvedSurface resolve_surface(const Scene& scene, const Hit& hit);

// One light's pending direct contribution: add `contribution` to the pixel iff
// the segment [a, b] (shrunk by the scene ray offset at both ends) is clear.
// Terms whose contribution vanishes on `bands` are omitted. The weight is
// already folded in.
struct DirectTerm {
    int light = 0;
    Vec3 seg_a, seg_b;
    Spectrum contribution;
};

std::vector<DirectTerm> direct_light_terms(const Scene& scene, const Hit& hit,
                                           const ResolvedSurface& surf, const Spectrum& weight,
                                           BandRange bands);

// Fresnel-weighted specular children of a hit. Child weights are masked per
// band against the throughput threshold (dead bands zeroed); children whose
// whole range died are dropped. TIR folds the transmitted energy into the
// reflected child. Thin surfaces transmit along the incident direction with
// the map/declared thickness absorbed immediately.
struct ChildRay {
    Vec3 origin;
    Vec3 dir;
    Spectrum weight;
    bool inside = false;
};

std::vector<ChildRay> specular_children(const Scene& scene, const Hit& hit,
                                        const ResolvedSurface& surf, const Vec3& incoming,
                                        const Spectrum& weight, bool inside, BandRange bands);

// Direct lighting at a hit per the point/directional sum: Lambertian rho/pi
// BRDF, clamped cosine, one shadow test per light against the whole scene.
Spectrum shade_direct(const Scene& scene, const Hit& hit, const Vec3& wo);

// Full recursive evaluation of one camera ray: direct lighting at every path
// node plus Fresnel-weighted specular recursion, interior Beer-Lambert
// attenuation, per-band threshold termination, bounce cap. Non-finite pixel
// values clamp to zero and bump the diagnostics counter instead of erroring.
Spectrum trace(const Scene& scene, const Ray& ray);
Spectrum trace(const Scene& scene, const Ray& ray, BandRange bands);

uint64_t trace_anomaly_count();

// One trace per pixel of the tile, written into the matching framebuffer
// pixels; deterministic for a given (scene, settings) regardless of tiling.
void render_local_tile(const Scene& scene, Framebuffer& fb, const TileRect& tile, BandRange bands,
                       uint16_t group_id = 0);

// Whole image, single-threaded reference.
Framebuffer render_local(const Scene& scene);

} // namespace specray
