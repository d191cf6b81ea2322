// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "specray/geometry.hpp"
#include "specray/optics.hpp"

namespace specray {

struct PointLight {
    Vec3 position;
    Spectrum intensity; // radiant intensity, W sr^-1 nm^-1
};

struct DirectionalLight {
    Vec3 direction;     // unit, direction of travel
    Spectrum irradiance; // W m^-2 nm^-1 on a facing surface
};

using Light = std::variant<PointLight, DirectionalLight>;

struct LightSample {
    Vec3 to_light;       // unit vector from the shading point toward the light
    Spectrum factor;     // incident radiance factor (intensity/d^2 or irradiance)
    double distance = 0; // kInfinity for directional lights
};

// Throws GeometryError when a point light coincides with the shading point
// (distance below 1e-9).
LightSample light_sample(const Light& light, const Vec3& shading_point);

struct OrthographicCamera {
    Vec3 center;    // image-plane rectangle center, world space
    Vec3 view_dir;  // unit; every primary ray shares it
    Vec3 up{0, 1, 0};
    double width_m = 1.0;
    double height_m = 1.0;
};

struct PinholeCamera {
    Vec3 position;
    Vec3 look_at;
    Vec3 up{0, 1, 0};
    double vfov_rad = kPi / 3.0;
};

struct Camera {
    std::variant<OrthographicCamera, PinholeCamera> projection;
    int width = 0;
    int height = 0;
};

struct RenderSettings {
    int max_bounces = 8;
    double throughput_threshold = 1e-4;
    int spectral_group_size = kBandCount;
    int photon_count = 100000;
    int knn_k = 50;
    double knn_rmax_frac = 0.05;   // fraction of the scene diagonal
    uint64_t seed = 1;
    double ray_offset_frac = 1e-4; // secondary-ray t_min, fraction of the diagonal
};

struct Scene {
    std::vector<TriangleMesh> meshes;
    std::vector<Triangle> triangles; // flattened, degenerates dropped
    Bvh accel;
    std::vector<Material> materials;
    std::map<std::string, int> material_ids;
    std::vector<Light> lights;
    Camera camera;
    RenderSettings settings;

    Box3 bounds;
    double diagonal = 0.0;

    double ray_offset() const { return settings.ray_offset_frac * diagonal; }
    double knn_rmax() const { return settings.knn_rmax_frac * diagonal; }
};

// Flattens meshes, builds the accel tree, computes bounds, and checks every
// invariant (cross-references, spectra ranges, settings ranges). Throws
// ValidationError naming the violated rule; a scene that returns passed every
// check.
void finalize_scene(Scene& scene);

// Strict JSON scene loader; unknown keys are errors. Asset paths resolve
// relative to the scene file. Throws ParseError (with line/column) on syntax,
// ValidationError on dangling references or invariant violations.
Scene load_scene(const std::string& path);

// Writes a scene back out as a loadable JSON file (asset files referenced by
// the scene must already exist on disk; used by the procedural generators).
void save_scene_json(const std::string& path, const std::string& json_text);

} // namespace specray
