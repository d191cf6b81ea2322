// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/render_global.hpp"

#include <algorithm>
#include <cmath>

#include "specray/errors.hpp"
#include "specray/rng.hpp"

namespace specray {

namespace {

double light_power_weight(const Scene& scene, const Light& light) {
    if (const auto* point = std::get_if<PointLight>(&light))
        return 4.0 * kPi * point->intensity.sum();
    const auto& dir = std::get<DirectionalLight>(light);
    double radius = scene.diagonal * 0.5;
    return dir.irradiance.sum() * kPi * radius * radius;
}

} // namespace

std::vector<LightEmission> plan_photon_emission(const Scene& scene, uint32_t emit_count) {
    if (scene.lights.empty())
        throw ValidationError("photon shooting requires at least one light");

    std::vector<double> weights(scene.lights.size());
    double total = 0.0;
    for (size_t i = 0; i < scene.lights.size(); ++i) {
        weights[i] = light_power_weight(scene, scene.lights[i]);
        total += weights[i];
    }
    if (total <= 0.0)
        throw ValidationError("photon shooting requires a light with non-zero power");

    // Largest-remainder split; ties to lower light index.
    std::vector<uint32_t> counts(weights.size(), 0);
    std::vector<std::pair<double, size_t>> remainders;
    uint32_t assigned = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        double exact = emit_count * weights[i] / total;
        counts[i] = static_cast<uint32_t>(std::floor(exact));
        assigned += counts[i];
        remainders.push_back({exact - counts[i], i});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t r = 0; assigned < emit_count; ++r, ++assigned) ++counts[remainders[r].second];

    std::vector<LightEmission> plan;
    uint32_t first = 0;
    for (size_t i = 0; i < scene.lights.size(); ++i) {
        if (counts[i] == 0) continue;
        LightEmission e;
        e.light = static_cast<int>(i);
        e.first = first;
        e.count = counts[i];
        if (const auto* point = std::get_if<PointLight>(&scene.lights[i]))
            e.photon_power = point->intensity * (4.0 * kPi / counts[i]);
        else {
            const auto& dir = std::get<DirectionalLight>(scene.lights[i]);
            double radius = scene.diagonal * 0.5;
            e.photon_power = dir.irradiance * (kPi * radius * radius / counts[i]);
        }
        plan.push_back(e);
        first += counts[i];
    }
    return plan;
}

namespace {

Vec3 uniform_sphere(CounterRng& rng) {
    double z = 1.0 - 2.0 * rng.next_double();
    double phi = 2.0 * kPi * rng.next_double();
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

void tangent_frame(const Vec3& n, Vec3& t1, Vec3& t2) {
    Vec3 a = std::abs(n.x) > 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
    t1 = normalized(cross(a, n));
    t2 = cross(n, t1);
}

Vec3 cosine_hemisphere(CounterRng& rng, const Vec3& normal) {
    double u1 = rng.next_double();
    double phi = 2.0 * kPi * rng.next_double();
    double r = std::sqrt(u1);
    double z = std::sqrt(std::max(0.0, 1.0 - u1));
    Vec3 t1, t2;
    tangent_frame(normal, t1, t2);
    return normalized(t1 * (r * std::cos(phi)) + t2 * (r * std::sin(phi)) + normal * z);
}

double band_mean(const Spectrum& s) { return s.sum() / kBandCount; }

} // namespace

void trace_photon(const Scene& scene, const std::vector<LightEmission>& plan, uint32_t photon_index,
                  uint64_t seed, std::vector<StampedPhoton>& out, const PhotonTraceOptions& opt) {
    const LightEmission* emission = nullptr;
    for (const auto& e : plan)
        if (photon_index >= e.first && photon_index < e.first + e.count) {
            emission = &e;
            break;
        }
    if (emission == nullptr) return;

    CounterRng rng(seed, photon_index);

    Ray ray;
    ray.throughput = Spectrum::ones();
    Spectrum power = emission->photon_power;
    const Light& light = scene.lights[emission->light];
    if (const auto* point = std::get_if<PointLight>(&light)) {
        ray.origin = point->position;
        ray.dir = uniform_sphere(rng);
    } else {
        const auto& dl = std::get<DirectionalLight>(light);
        double radius = scene.diagonal * 0.5;
        double r = radius * std::sqrt(rng.next_double());
        double phi = 2.0 * kPi * rng.next_double();
        Vec3 t1, t2;
        tangent_frame(dl.direction, t1, t2);
        ray.origin = scene.bounds.center() - dl.direction * (1.5 * radius) +
                     t1 * (r * std::cos(phi)) + t2 * (r * std::sin(phi));
        ray.dir = dl.direction;
    }

    bool specular_chain = false;
    bool inside = false;
    uint16_t store_seq = 0;

    for (int depth = 0; depth < opt.depth_cap; ++depth) {
        std::optional<Hit> hit = scene.accel.intersect(ray);
        if (!hit) return;

        ResolvedSurface surf = resolve_surface(scene, *hit);
        if (inside && surf.ior != nullptr)
            power *= volume_transmittance(*surf.ior, hit->t);

        if (surf.diffuse) {
            StampedPhoton store;
            store.photon_index = photon_index;
            store.bounce_seq = store_seq++;
            store.caustic = specular_chain;
            store.photon = {hit->point, ray.dir, power, specular_chain};
            out.push_back(store);
        }

        // Continuation channels and their per-band factors.
        double cos_i = -dot(ray.dir, hit->normal);
        Spectrum f_reflect, f_transmit;
        Vec3 dir_reflect{}, dir_transmit{};
        bool transmit_flips_inside = false;
        double w_d = 0.0, w_r = 0.0, w_t = 0.0;
        if (surf.diffuse) w_d = band_mean(surf.rho);
        if ((surf.specular_reflect || surf.specular_transmit) && surf.ior != nullptr && cos_i > 0.0) {
            static const Spectrum air = Spectrum::ones();
            const Spectrum& n_i = inside ? surf.ior->n : air;
            const Spectrum& n_t = inside ? air : surf.ior->n;
            FresnelSplit fresnel = fresnel_dielectric(cos_i, n_i, n_t);
            bool tir = false;
            if (surf.specular_transmit && !surf.thin) {
                double eta = n_i[kReferenceBand] / n_t[kReferenceBand];
                auto refr = refract_direction(ray.dir, hit->normal, eta);
                tir = !refr.has_value();
                if (refr) {
                    dir_transmit = *refr;
                    transmit_flips_inside = true;
                }
            }
            if (surf.specular_reflect) {
                f_reflect = tir ? fresnel.reflect + fresnel.transmit : fresnel.reflect;
                dir_reflect = reflect_direction(ray.dir, hit->normal);
                w_r = band_mean(f_reflect);
            }
            if (surf.specular_transmit) {
                if (surf.thin) {
                    f_transmit = fresnel.transmit * volume_transmittance(*surf.ior, surf.thickness_m);
                    dir_transmit = ray.dir;
                    w_t = band_mean(f_transmit);
                } else if (!tir) {
                    f_transmit = fresnel.transmit;
                    w_t = band_mean(f_transmit);
                }
            }
        }

        double w_total = w_d + w_r + w_t;
        if (w_total <= 0.0) return;

        // Russian roulette on the max-band albedo, then channel selection.
        Spectrum albedo;
        if (surf.diffuse) albedo += surf.rho;
        albedo += f_reflect;
        albedo += f_transmit;
        double survive = std::min(1.0, albedo.max_value());
        if (opt.force_survival) survive = 1.0;
        if (rng.next_double() >= survive) return;

        double pick = rng.next_double() * w_total;
        if (pick < w_d) {
            double q = w_d / w_total;
            power *= surf.rho * (1.0 / (survive * q));
            ray.origin = hit->point;
            ray.dir = cosine_hemisphere(rng, hit->normal);
            specular_chain = false;
        } else if (pick < w_d + w_r) {
            double q = w_r / w_total;
            power *= f_reflect * (1.0 / (survive * q));
            ray.origin = hit->point;
            ray.dir = dir_reflect;
            specular_chain = true;
        } else {
            double q = w_t / w_total;
            power *= f_transmit * (1.0 / (survive * q));
            ray.origin = hit->point;
            ray.dir = dir_transmit;
            specular_chain = true;
            if (transmit_flips_inside) inside = !inside;
        }
        ray.t_min = scene.ray_offset();
    }
}

PhotonMaps build_photon_maps(std::vector<StampedPhoton> stores, uint64_t emitted) {
    std::sort(stores.begin(), stores.end(), [](const StampedPhoton& a, const StampedPhoton& b) {
        if (a.photon_index != b.photon_index) return a.photon_index < b.photon_index;
        return a.bounce_seq < b.bounce_seq;
    });
    std::vector<Photon> global_photons, caustic_photons;
    for (auto& s : stores)
        (s.caustic ? caustic_photons : global_photons).push_back(std::move(s.photon));
    PhotonMaps maps;
    maps.global = PhotonMap::build(std::move(global_photons), emitted);
    maps.caustic = PhotonMap::build(std::move(caustic_photons), emitted);
    return maps;
}

PhotonMaps shoot_photons(const Scene& scene, uint32_t emit_count, uint64_t seed,
                         const PhotonTraceOptions& opt) {
    auto plan = plan_photon_emission(scene, emit_count);
    std::vector<StampedPhoton> stores;
    for (uint32_t i = 0; i < emit_count; ++i) trace_photon(scene, plan, i, seed, stores, opt);
    return build_photon_maps(std::move(stores), emit_count);
}

void render_global_tile(const Scene& scene, const PhotonMaps& maps, Framebuffer& fb,
                        const TileRect& tile, BandRange bands, GlobalChannels* channels) {
    int k = scene.settings.knn_k;
    double r_max = scene.knn_rmax();
    for (int y = tile.y0; y < tile.y1; ++y) {
        for (int x = tile.x0; x < tile.x1; ++x) {
            Ray ray = generate_primary_ray(scene.camera, x, y);
            ray.throughput = Spectrum::ones(bands);

            // Direct + specular share one accumulator in trace() order, so the
            // zero-photon image reproduces the local renderer exactly.
            Spectrum local = trace(scene, ray, bands);

            Spectrum caustic, indirect;
            std::optional<Hit> hit = scene.accel.intersect(ray);
            if (hit) {
                ResolvedSurface surf = resolve_surface(scene, *hit);
                if (surf.diffuse) {
                    caustic = radiance_estimate(maps.caustic, hit->point, -ray.dir, surf.rho, k,
                                                r_max, bands);
                    indirect = radiance_estimate(maps.global, hit->point, -ray.dir, surf.rho, k,
                                                 r_max, bands);
                }
            }

            Spectrum total = local;
            total += caustic;
            total += indirect;
            Spectrum& px = fb.at(x, y);
            for (int j = bands.begin; j < bands.end; ++j) px[j] = total[j];
            fb.done[ray.pixel] = 1;

            if (channels) {
                Spectrum direct0;
                if (hit) {
                    ResolvedSurface surf = resolve_surface(scene, *hit);
                    for (const DirectTerm& term :
                         direct_light_terms(scene, *hit, surf, Spectrum::ones(bands), bands))
                        if (!scene.accel.occluded(term.seg_a, term.seg_b, scene.ray_offset()))
                            direct0 += term.contribution;
                }
                Spectrum spec = local;
                for (int j = bands.begin; j < bands.end; ++j) spec[j] -= direct0[j];
                channels->direct.at(x, y) = direct0;
                channels->specular.at(x, y) = spec;
                channels->caustic.at(x, y) = caustic;
                channels->indirect.at(x, y) = indirect;
            }
        }
    }
}

Framebuffer render_global(const Scene& scene, const PhotonMaps& maps, GlobalChannels* channels) {
    Framebuffer fb(scene.camera.width, scene.camera.height);
    if (channels) {
        channels->direct = Framebuffer(fb.width, fb.height);
        channels->specular = Framebuffer(fb.width, fb.height);
        channels->caustic = Framebuffer(fb.width, fb.height);
        channels->indirect = Framebuffer(fb.width, fb.height);
    }
    render_global_tile(scene, maps, fb, {0, 0, fb.width, fb.height}, {}, channels);
    return fb;
}

} // namespace specray
