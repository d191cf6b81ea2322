// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/render_local.hpp"

#include <atomic>
#include <cmath>

#include "specray/errors.hpp"

namespace specray {

namespace {

struct CameraBasis {
    Vec3 right, up, forward;
};

CameraBasis orthonormal_basis(const Vec3& forward, const Vec3& up_hint) {
    Vec3 right = normalized(cross(forward, up_hint));
    if (length_squared(right) == 0.0) // up parallel to view; pick another hint
        right = normalized(cross(forward, Vec3{1, 0, 0}));
    Vec3 up = cross(right, forward);
    return {right, up, forward};
}

} // namespace

Ray generate_primary_ray(const Camera& camera, int x, int y) {
    if (x < 0 || y < 0 || x >= camera.width || y >= camera.height)
        throw InvalidArgument("generate_primary_ray: pixel (" + std::to_string(x) + ", " +
                              std::to_string(y) + ") out of range");

    double u = (x + 0.5) / camera.width - 0.5;
    double v = (y + 0.5) / camera.height - 0.5;

    Ray ray;
    ray.pixel = static_cast<uint32_t>(y) * camera.width + x;
    if (const auto* ortho = std::get_if<OrthographicCamera>(&camera.projection)) {
        CameraBasis basis = orthonormal_basis(normalized(ortho->view_dir), ortho->up);
        ray.origin = ortho->center + basis.right * (u * ortho->width_m) -
                     basis.up * (v * ortho->height_m);
        ray.dir = basis.forward;
    } else {
        const auto& pin = std::get<PinholeCamera>(camera.projection);
        CameraBasis basis = orthonormal_basis(normalized(pin.look_at - pin.position), pin.up);
        double half_h = std::tan(pin.vfov_rad * 0.5);
        double half_w = half_h * camera.width / camera.height;
        ray.origin = pin.position;
        ray.dir = normalized(basis.forward + basis.right * (2.0 * u * half_w) -
                             basis.up * (2.0 * v * half_h));
    }
    return ray;
}

ResolvedSurface resolve_surface(const Scene& scene, const Hit& hit) {
    const Material& base = scene.materials[hit.material];
    const Material* mat = &base;
    double thickness = base.thickness_m;
    if (base.map) {
        DistributionMap::Texel texel = sample_map(*base.map, hit.uv.x, hit.uv.y);
        mat = &scene.materials[base.map_palette[texel.material_index]];
        thickness = base.map->has_thickness ? texel.thickness_m : mat->thickness_m;
    }
    ResolvedSurface surf;
    surf.material = mat;
    surf.rho = mat->diffuse_reflectance;
    surf.ior = mat->ior ? &*mat->ior : nullptr;
    surf.thickness_m = thickness;
    surf.diffuse = mat->diffuse;
    surf.specular_reflect = mat->specular_reflect;
    surf.specular_transmit = mat->specular_transmit;
    surf.thin = mat->thin;
    return surf;
}

std::vector<DirectTerm> direct_light_terms(const Scene& scene, const Hit& hit,
                                           const ResolvedSurface& surf, const Spectrum& weight,
                                           BandRange bands) {
    std::vector<DirectTerm> terms;
    if (!surf.diffuse) return terms;

    for (size_t i = 0; i < scene.lights.size(); ++i) {
        const Light& light = scene.lights[i];
        if (const auto* point = std::get_if<PointLight>(&light))
            if (length(point->position - hit.point) < 1e-9) continue; // degenerate; skip
        LightSample sample = light_sample(light, hit.point);
        double cos_i = dot(hit.normal, sample.to_light);
        if (cos_i <= 0.0) continue;

        DirectTerm term;
        term.light = static_cast<int>(i);
        term.seg_a = hit.point;
        term.seg_b = std::isfinite(sample.distance)
                         ? std::get<PointLight>(light).position
                         : hit.point + sample.to_light * (2.0 * scene.diagonal + 1.0);
        bool nonzero = false;
        for (int j = bands.begin; j < bands.end; ++j) {
            term.contribution[j] = weight[j] * surf.rho[j] * kInvPi * sample.factor[j] * cos_i;
            nonzero |= term.contribution[j] != 0.0;
        }
        if (nonzero) terms.push_back(std::move(term));
    }
    return terms;
}

std::vector<ChildRay> specular_children(const Scene& scene, const Hit& hit,
                                        const ResolvedSurface& surf, const Vec3& incoming,
                                        const Spectrum& weight, bool inside, BandRange bands) {
    std::vector<ChildRay> children;
    if (!(surf.specular_reflect || surf.specular_transmit) || surf.ior == nullptr)
        return children;
    double cos_i = -dot(incoming, hit.normal);
    if (cos_i <= 0.0) return children; // grazing degenerate

    static const Spectrum air = Spectrum::ones();
    const Spectrum& n_i = inside ? surf.ior->n : air;
    const Spectrum& n_t = inside ? air : surf.ior->n;
    FresnelSplit fresnel = fresnel_dielectric(cos_i, n_i, n_t, bands);

    double threshold = scene.settings.throughput_threshold;
    auto masked_alive = [&](Spectrum& w) {
        bool alive = false;
        for (int j = bands.begin; j < bands.end; ++j) {
            if (w[j] < threshold) w[j] = 0.0;
            else alive = true;
        }
        return alive;
    };

    bool tir = false;
    std::optional<Vec3> refracted;
    if (surf.specular_transmit && !surf.thin) {
        double eta = n_i[kReferenceBand] / n_t[kReferenceBand];
        refracted = refract_direction(incoming, hit.normal, eta);
        tir = !refracted.has_value();
    }

    if (surf.specular_transmit) {
        if (surf.thin) {
            // Thin tile: in/out refraction cancels; absorb over the map thickness now.
            Spectrum trans = volume_transmittance(*surf.ior, surf.thickness_m, bands);
            Spectrum w;
            for (int j = bands.begin; j < bands.end; ++j)
                w[j] = weight[j] * fresnel.transmit[j] * trans[j];
            if (masked_alive(w)) children.push_back({hit.point, incoming, w, inside});
        } else if (refracted) {
            Spectrum w;
            for (int j = bands.begin; j < bands.end; ++j) w[j] = weight[j] * fresnel.transmit[j];
            if (masked_alive(w)) children.push_back({hit.point, *refracted, w, !inside});
        }
    }
    if (surf.specular_reflect) {
        Spectrum w;
        for (int j = bands.begin; j < bands.end; ++j) {
            double r = tir ? fresnel.reflect[j] + fresnel.transmit[j] : fresnel.reflect[j];
            w[j] = weight[j] * r;
        }
        if (masked_alive(w))
            children.push_back({hit.point, reflect_direction(incoming, hit.normal), w, inside});
    }
    return children;
}

Spectrum shade_direct(const Scene& scene, const Hit& hit, const Vec3& /*wo*/) {
    ResolvedSurface surf = resolve_surface(scene, hit);
    Spectrum out;
    for (const DirectTerm& term : direct_light_terms(scene, hit, surf, Spectrum::ones(), {}))
        if (!scene.accel.occluded(term.seg_a, term.seg_b, scene.ray_offset()))
            out += term.contribution;
    return out;
}

namespace {

struct PathNode {
    Ray ray;
};

std::atomic<uint64_t> g_trace_anomalies{0};

} // namespace

uint64_t trace_anomaly_count() { return g_trace_anomalies.load(); }

// The exact operation sequence here (node order, accumulation order, where
// attenuation applies) is mirrored by the sub-domain tracer; k=1 decomposed
// runs must reproduce it bit for bit.
Spectrum trace(const Scene& scene, const Ray& primary, BandRange bands) {
    Spectrum out;
    std::vector<PathNode> stack;
    stack.push_back({primary});

    while (!stack.empty()) {
        PathNode node = std::move(stack.back());
        stack.pop_back();

        std::optional<Hit> hit = scene.accel.intersect(node.ray);
        if (!hit) continue; // background

        ResolvedSurface surf = resolve_surface(scene, *hit);
        Spectrum weight = node.ray.throughput;
        if (node.ray.inside && surf.ior != nullptr) {
            Spectrum trans =
                volume_transmittance(*surf.ior, node.ray.interior_dist + hit->t, bands);
            for (int j = bands.begin; j < bands.end; ++j) weight[j] *= trans[j];
        }

        for (const DirectTerm& term : direct_light_terms(scene, *hit, surf, weight, bands))
            if (!scene.accel.occluded(term.seg_a, term.seg_b, scene.ray_offset()))
                out += term.contribution;

        if (node.ray.bounce < scene.settings.max_bounces) {
            for (ChildRay& child :
                 specular_children(scene, *hit, surf, node.ray.dir, weight, node.ray.inside, bands)) {
                Ray next;
                next.origin = child.origin;
                next.dir = child.dir;
                next.t_min = scene.ray_offset();
                next.throughput = child.weight;
                next.bounce = node.ray.bounce + 1;
                next.pixel = node.ray.pixel;
                next.group = node.ray.group;
                next.inside = child.inside;
                next.interior_dist = 0.0;
                stack.push_back({next});
            }
        }
    }
    if (!out.all_finite()) {
        g_trace_anomalies.fetch_add(1, std::memory_order_relaxed);
        return Spectrum{};
    }
    return out;
}

Spectrum trace(const Scene& scene, const Ray& ray) { return trace(scene, ray, BandRange{}); }

void render_local_tile(const Scene& scene, Framebuffer& fb, const TileRect& tile, BandRange bands,
                       uint16_t group_id) {
    for (int y = tile.y0; y < tile.y1; ++y) {
        for (int x = tile.x0; x < tile.x1; ++x) {
            Ray ray = generate_primary_ray(scene.camera, x, y);
            ray.throughput = Spectrum::ones(bands);
            ray.group = group_id;
            Spectrum value = trace(scene, ray, bands);
            Spectrum& px = fb.at(x, y);
            for (int j = bands.begin; j < bands.end; ++j) px[j] = value[j];
            fb.done[ray.pixel] = 1;
        }
    }
}

Framebuffer render_local(const Scene& scene) {
    Framebuffer fb(scene.camera.width, scene.camera.height);
    render_local_tile(scene, fb, {0, 0, scene.camera.width, scene.camera.height}, {});
    return fb;
}

} // namespace specray
