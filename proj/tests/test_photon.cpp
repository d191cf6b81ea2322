// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <random>

#include "specray/errors.hpp"
#include "specray/photon_map.hpp"
#include "specray/procedural.hpp"
#include "specray/render_global.hpp"
#include "specray/render_local.hpp"

using namespace specray;

namespace {

std::vector<Photon> random_photons(std::mt19937_64& rng, int count, double extent) {
    std::uniform_real_distribution<double> pos(-extent, extent);
    std::vector<Photon> photons;
    for (int i = 0; i < count; ++i) {
        Photon p;
        p.position = {pos(rng), pos(rng), pos(rng)};
        p.incident_dir = normalized(Vec3{pos(rng), pos(rng), pos(rng) + 2 * extent});
        p.power = Spectrum(1.0);
        photons.push_back(p);
    }
    return photons;
}

// Linear-scan oracle with the identical (distance^2, insertion index) order.
std::vector<std::pair<double, uint32_t>> knn_oracle(const std::vector<Photon>& photons,
                                                    const Vec3& q, int k, double r_max) {
    std::vector<std::pair<double, uint32_t>> all;
    for (uint32_t i = 0; i < photons.size(); ++i) {
        double d2 = length_squared(photons[i].position - q);
        if (d2 <= r_max * r_max) all.push_back({d2, i});
    }
    std::sort(all.begin(), all.end());
    if (static_cast<int>(all.size()) > k) all.resize(k);
    return all;
}

} // namespace

TEST_CASE("knn_query: empty map, k overflow, exact ordering") {
    PhotonMap empty = PhotonMap::build({}, 0);
    std::vector<KnnResult> out;
    empty.knn_query({0, 0, 0}, 5, 1.0, out);
    CHECK(out.empty());

    std::vector<Photon> three;
    for (double d : {1.0, 2.0, 3.0}) {
        Photon p;
        p.position = {d, 0, 0};
        p.power = Spectrum(1.0);
        three.push_back(p);
    }
    PhotonMap map = PhotonMap::build(three, 3);

    // k = 2, r_max = 2.5: the first two, sorted by distance
    map.knn_query({0, 0, 0}, 2, 2.5, out);
    REQUIRE(out.size() == 2);
    CHECK(out[0].order == 0);
    CHECK(out[1].order == 1);
    CHECK(out[0].distance == doctest::Approx(1.0));
    CHECK(out[1].distance == doctest::Approx(2.0));

    // k exceeding the population: everything within r_max, sorted
    map.knn_query({0, 0, 0}, 10, 10.0, out);
    REQUIRE(out.size() == 3);
    CHECK(out[2].order == 2);

    CHECK_THROWS_AS(map.knn_query({0, 0, 0}, 0, 1.0, out), InvalidArgument);
    CHECK_THROWS_AS(map.knn_query({0, 0, 0}, 1, 0.0, out), InvalidArgument);
}

TEST_CASE("knn_query: agrees with a linear scan exactly on random maps") {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> pos(-5.5, 5.5);
    auto photons = random_photons(rng, 10000, 5.0);
    PhotonMap map = PhotonMap::build(photons, photons.size());

    std::vector<KnnResult> got;
    int nonempty = 0;
    for (int q = 0; q < 1000; ++q) {
        Vec3 point{pos(rng), pos(rng), pos(rng)};
        int k = 1 + static_cast<int>(rng() % 64);
        double r_max = 0.2 + 2.5 * std::uniform_real_distribution<double>(0, 1)(rng);
        map.knn_query(point, k, r_max, got);
        auto expect = knn_oracle(photons, point, k, r_max);
        REQUIRE(got.size() == expect.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].order == expect[i].second);
            CHECK(got[i].distance == std::sqrt(expect[i].first)); // bitwise
        }
        if (!got.empty()) ++nonempty;
    }
    CHECK(nonempty > 500);
}

TEST_CASE("radiance_estimate: empty map, linearity, analytic disc") {
    PhotonMap empty = PhotonMap::build({}, 0);
    Spectrum zero = radiance_estimate(empty, {0, 0, 0}, {0, 0, 1}, Spectrum(1.0), 10, 1.0);
    CHECK(zero.is_zero({}));

    // k photons uniformly covering a disc of radius r on a rho=1 surface:
    // estimate = k * (1/pi) * p / (pi r^2), up to the discrete kth-distance.
    std::vector<Photon> disc;
    int k = 40;
    double r = 0.5, p = 0.25;
    for (int i = 0; i < k; ++i) {
        // spiral covering; the kth distance equals r for the outermost photon
        double rr = r * std::sqrt((i + 1.0) / k);
        double phi = 2.399963 * i;
        Photon ph;
        ph.position = {rr * std::cos(phi), rr * std::sin(phi), 0};
        ph.power = Spectrum(p);
        disc.push_back(ph);
    }
    PhotonMap map = PhotonMap::build(disc, k);
    Spectrum est = radiance_estimate(map, {0, 0, 0}, {0, 0, 1}, Spectrum(1.0), k, 2.0);
    double expect = k * (1.0 / kPi) * p / (kPi * r * r);
    CHECK(est[40] == doctest::Approx(expect).epsilon(1e-9));

    // doubling every photon's power doubles the estimate
    std::vector<Photon> doubled = disc;
    for (auto& ph : doubled) ph.power = ph.power * 2.0;
    PhotonMap map2 = PhotonMap::build(doubled, k);
    Spectrum est2 = radiance_estimate(map2, {0, 0, 0}, {0, 0, 1}, Spectrum(1.0), k, 2.0);
    for (int j = 0; j < kBandCount; j += 16)
        CHECK(est2[j] == doctest::Approx(2.0 * est[j]).epsilon(1e-12));
}

TEST_CASE("plan_photon_emission: energy-proportional largest-remainder split") {
    Scene scene = make_furnace_scene(8, 1);
    // Replace lights: two point lights with 3:1 power ratio.
    scene.lights.clear();
    PointLight strong;
    strong.position = {0.1, 0, 0};
    strong.intensity = Spectrum(3.0);
    PointLight weak;
    weak.position = {-0.1, 0, 0};
    weak.intensity = Spectrum(1.0);
    scene.lights.push_back(strong);
    scene.lights.push_back(weak);

    for (uint32_t total : {1000u, 1001u, 7u, 12345u}) {
        auto plan = plan_photon_emission(scene, total);
        REQUIRE(plan.size() == 2);
        uint32_t sum = 0;
        for (const auto& e : plan) sum += e.count;
        CHECK(sum == total);
        double expect_strong = total * 0.75;
        CHECK(std::abs(static_cast<double>(plan[0].count) - expect_strong) <= 1.0);
    }

    Scene no_lights = make_furnace_scene(8, 1);
    no_lights.lights.clear();
    CHECK_THROWS_AS(plan_photon_emission(no_lights, 100), ValidationError);
}

TEST_CASE("shoot_photons: classification rules") {
    SUBCASE("no diffuse surfaces: both maps empty") {
        Scene scene = make_furnace_scene(8, 1);
        Material glass;
        glass.name = "glass";
        glass.specular_reflect = true;
        glass.specular_transmit = true;
        glass.thin = true;
        glass.ior = ComplexIor{Spectrum(1.5), Spectrum(0.0)};
        scene.materials[0] = glass;
        scene.material_ids.clear();
        scene.material_ids["glass"] = 0;
        finalize_scene(scene);
        PhotonMaps maps = shoot_photons(scene, 500, 1);
        CHECK(maps.global.size() == 0);
        CHECK(maps.caustic.size() == 0);
    }

    SUBCASE("diffuse-only scene: caustic map empty, global populated") {
        Scene scene = make_furnace_scene(8, 1);
        PhotonMaps maps = shoot_photons(scene, 500, 1);
        CHECK(maps.caustic.size() == 0);
        CHECK(maps.global.size() >= 500); // every first hit stores
    }

    SUBCASE("light -> glass pane -> floor: caustic photons flagged") {
        // floor below, thin glass pane between light and floor
        Scene scene;
        Material floor;
        floor.name = "floor";
        floor.diffuse = true;
        floor.diffuse_reflectance = Spectrum(0.6);
        scene.material_ids["floor"] = 0;
        scene.materials.push_back(floor);
        Material glass;
        glass.name = "glass";
        glass.specular_reflect = true;
        glass.specular_transmit = true;
        glass.thin = true;
        glass.thickness_m = 0.003;
        glass.ior = ComplexIor{Spectrum(1.5), Spectrum(1e-6)};
        scene.material_ids["glass"] = 1;
        scene.materials.push_back(glass);

        TriangleMesh fl;
        fl.positions = {{-4, 0, -4}, {4, 0, -4}, {4, 0, 4}, {-4, 0, 4}};
        fl.faces = {{0, 1, 2}, {0, 2, 3}};
        fl.material = 0;
        scene.meshes.push_back(fl);
        TriangleMesh pane;
        pane.positions = {{-1, 1, -1}, {1, 1, -1}, {1, 1, 1}, {-1, 1, 1}};
        pane.faces = {{0, 1, 2}, {0, 2, 3}};
        pane.material = 1;
        scene.meshes.push_back(pane);

        PointLight bulb;
        bulb.position = {0, 2, 0};
        bulb.intensity = Spectrum(1.0);
        scene.lights.push_back(bulb);

        OrthographicCamera cam;
        cam.center = {0, 3, 0};
        cam.view_dir = {0, -1, 0};
        cam.width_m = cam.height_m = 8;
        scene.camera.projection = cam;
        scene.camera.width = scene.camera.height = 4;
        finalize_scene(scene);

        PhotonMaps maps = shoot_photons(scene, 4000, 9);
        CHECK(maps.caustic.size() > 0);
        CHECK(maps.global.size() > 0);
        for (const Photon& p : maps.caustic.photons()) CHECK(p.specular_path);
        for (const Photon& p : maps.global.photons()) CHECK_FALSE(p.specular_path);
    }
}

TEST_CASE("shoot_photons: power conservation with roulette disabled") {
    // One-bounce cap, survival forced: stored direct photons carry exactly the
    // emitted power when every emitted photon lands on the closed sphere.
    Scene scene = make_furnace_scene(8, 2);
    PhotonTraceOptions opt;
    opt.force_survival = true;
    opt.depth_cap = 1; // store the first diffuse hit only
    uint32_t emitted = 20000;
    PhotonMaps maps = shoot_photons(scene, emitted, 3, opt);
    CHECK(maps.global.size() == emitted);

    double total_emitted = 4.0 * kPi * Spectrum(1.0).sum();
    double total_stored = 0.0;
    for (const Photon& p : maps.global.photons()) total_stored += p.power.sum();
    CHECK(std::abs(total_stored - total_emitted) / total_emitted <= 1e-9);
}

TEST_CASE("shoot_photons: deterministic for a fixed seed") {
    Scene scene = make_furnace_scene(8, 1);
    PhotonMaps a = shoot_photons(scene, 2000, 42);
    PhotonMaps b = shoot_photons(scene, 2000, 42);
    REQUIRE(a.global.size() == b.global.size());
    for (size_t i = 0; i < a.global.size(); ++i) {
        CHECK(a.global.photons()[i].position == b.global.photons()[i].position);
        CHECK(a.global.photons()[i].power == b.global.photons()[i].power);
    }
    PhotonMaps c = shoot_photons(scene, 2000, 43);
    bool any_differs = a.global.size() != c.global.size();
    for (size_t i = 0; !any_differs && i < a.global.size(); ++i)
        any_differs = !(a.global.photons()[i].position == c.global.photons()[i].position);
    CHECK(any_differs);
}

TEST_CASE("render_global: zero photons reproduces render_local exactly") {
    Scene scene = make_cornell_scene(20, 20);
    PhotonMaps empty;
    empty.global = PhotonMap::build({}, 0);
    empty.caustic = PhotonMap::build({}, 0);
    Framebuffer global = render_global(scene, empty);
    Framebuffer local = render_local(scene);
    CHECK(global.bitwise_equal(local));
}

TEST_CASE("render_global: channels sum to the total") {
    Scene scene = make_cornell_scene(16, 16);
    scene.settings.photon_count = 5000;
    PhotonMaps maps = shoot_photons(scene, 5000, 7);
    GlobalChannels channels;
    Framebuffer fb = render_global(scene, maps, &channels);
    for (int idx : {0, 37, 135, 255}) {
        const Spectrum& total = fb.pixels[idx];
        for (int j = 0; j < kBandCount; j += 27) {
            double sum = channels.direct.pixels[idx][j] + channels.specular.pixels[idx][j] +
                         channels.caustic.pixels[idx][j] + channels.indirect.pixels[idx][j];
            CHECK(total[j] == doctest::Approx(sum).epsilon(1e-9));
        }
    }
}

TEST_CASE("photon dump round trip") {
    std::mt19937_64 rng(71);
    auto photons = random_photons(rng, 257, 3.0);
    photons[3].specular_path = true;
    PhotonMap map = PhotonMap::build(photons, 1000);
    std::string path = "photon_dump_tmp.bin";
    write_photon_dump(path, map);
    PhotonMap loaded = read_photon_dump(path);
    REQUIRE(loaded.size() == map.size());
    CHECK(loaded.emitted() == 1000);
    for (size_t i = 0; i < map.size(); ++i) {
        CHECK(loaded.photons()[i].position == map.photons()[i].position);
        CHECK(loaded.photons()[i].power == map.photons()[i].power);
        CHECK(loaded.photons()[i].specular_path == map.photons()[i].specular_path);
    }
    std::remove(path.c_str());
}
