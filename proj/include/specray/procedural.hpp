// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "specray/scene.hpp"

namespace specray {

// Long corridor with rows of mapped thin-glass windows on both side walls and
// directional daylight outside: the interface-heavy benchmark scene. The
// triangle target is met by subdividing the stone walls.
struct NaveParams {
    int target_triangles = 2000;
    int image_width = 256;
    int image_height = 256;
    int max_bounces = 6;
    uint64_t seed = 1;
};

Scene make_nave_scene(const NaveParams& params = {});

// Writes scene.json plus the meshes, spectra, and distribution-map PNGs it
// references; load_scene() on the result reproduces make_nave_scene() exactly.
void write_nave_assets(const std::string& dir, const NaveParams& params = {});

// Five-wall box, two inner blocks, a mirror panel, a standing thin-glass pane,
// one point light near the ceiling.
Scene make_cornell_scene(int image_width = 128, int image_height = 128);

// Closed icosphere of uniform reflectance 0.5 with a point light at the
// center: the analytic multibounce environment for the photon-map checks.
Scene make_furnace_scene(int image_size = 64, int subdivisions = 3, double reflectance = 0.5);

} // namespace specray
