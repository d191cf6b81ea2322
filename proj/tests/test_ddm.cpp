// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "specray/ddm.hpp"
#include "specray/errors.hpp"
#include "specray/image_io.hpp"
#include "specray/procedural.hpp"
#include "specray/scheduler.hpp"

using namespace specray;

namespace {

// Two unit triangles far apart on x, for hand-traceable partitions.
Scene two_triangle_scene() {
    Scene scene;
    Material white;
    white.name = "white";
    white.diffuse = true;
    white.diffuse_reflectance = Spectrum(0.5);
    scene.material_ids["white"] = 0;
    scene.materials.push_back(white);

    TriangleMesh mesh;
    mesh.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {9, 0, 0}, {10, 0, 0}, {9, 1, 0}};
    mesh.faces = {{0, 1, 2}, {3, 4, 5}};
    mesh.material = 0;
    scene.meshes.push_back(mesh);

    DirectionalLight sun;
    sun.direction = {0, 0, -1};
    sun.irradiance = Spectrum(1.0);
    scene.lights.push_back(sun);

    OrthographicCamera cam;
    cam.center = {5, 0.3, 3};
    cam.view_dir = {0, 0, -1};
    cam.width_m = 11;
    cam.height_m = 1.2;
    scene.camera.projection = cam;
    scene.camera.width = 16;
    scene.camera.height = 4;
    finalize_scene(scene);
    return scene;
}

void audit_report(const DdmReport& report, const DdmOptions& opt) {
    // Exactly-once: the consumed sequence numbers are precisely 0..N-1.
    REQUIRE(report.brays_emitted == report.brays_consumed);
    std::vector<uint64_t> seqs = report.consumed_seqs;
    std::sort(seqs.begin(), seqs.end());
    REQUIRE(seqs.size() == report.brays_emitted);
    for (size_t i = 0; i < seqs.size(); ++i) REQUIRE(seqs[i] == i);

    // Ray conservation: every local radiance ray ends exactly one way, and
    // every shadow walk resolves exactly one way.
    const SubTraceCounters& c = report.counters;
    CHECK(c.local_rays == c.terminated + c.background + c.forwarded + c.anomalies);
    CHECK((c.consumed - c.shadow_consumed) + c.local_children == c.local_rays);
    CHECK(c.shadow_started + c.shadow_consumed ==
          c.verdict_visible + c.verdict_occluded + c.shadow_forwarded + c.anomalies);
    CHECK(c.anomalies == 0);

    // Budget safety from the event log.
    int resident = 0, max_resident = 0;
    for (const auto& e : report.events) {
        if (e.kind == DdmEvent::Kind::Load) ++resident;
        if (e.kind == DdmEvent::Kind::Unload) --resident;
        max_resident = std::max(max_resident, resident);
    }
    CHECK(max_resident <= opt.memory_budget);
    CHECK(report.max_resident <= opt.memory_budget);
}

} // namespace

TEST_CASE("partition: k = 1 yields one sub-domain and no interfaces") {
    Scene scene = two_triangle_scene();
    PartitionResult part = partition(scene, 1);
    CHECK(part.subdomains.size() == 1);
    CHECK(part.interfaces.empty());
    CHECK(part.subdomains[0].triangles.size() == scene.triangles.size());
    CHECK_THROWS_AS(partition(scene, 3), InvalidArgument);
    CHECK_THROWS_AS(partition(scene, 0), InvalidArgument);

    Scene empty = scene;
    empty.meshes.clear();
    finalize_scene(empty);
    CHECK_THROWS_AS(partition(empty, 2), ValidationError);
}

TEST_CASE("partition: k = 2 splits on x with one interface") {
    Scene scene = two_triangle_scene();
    PartitionResult part = partition(scene, 2);
    REQUIRE(part.subdomains.size() == 2);
    REQUIRE(part.interfaces.size() == 1);

    // The cut sits at the lower-median centroid (the first triangle's), so
    // that triangle straddles and is duplicated; the far one stays right-only.
    CHECK(part.subdomains[0].triangles.size() == 1);
    CHECK(part.subdomains[1].triangles.size() == 2);
    const Interface& iface = part.interfaces[0];
    CHECK(iface.left_id == 0);
    CHECK(iface.right_id == 1);
    CHECK(iface.rect.min.x == iface.rect.max.x); // degenerate on the cut axis

    // coverage: per-sub-domain triangle sets union to the scene's
    std::vector<bool> seen(scene.triangles.size(), false);
    for (const auto& sub : part.subdomains)
        for (uint32_t t : sub.triangles) seen[t] = true;
    for (bool s : seen) CHECK(s);
}

TEST_CASE("partition: straddling triangles are duplicated") {
    Scene scene = make_cornell_scene(8, 8);
    PartitionResult part = partition(scene, 8);
    size_t total = 0;
    std::vector<bool> seen(scene.triangles.size(), false);
    for (const auto& sub : part.subdomains) {
        total += sub.triangles.size();
        for (uint32_t t : sub.triangles) {
            seen[t] = true;
            CHECK(triangle_overlaps_box(scene.triangles[t], sub.bounds));
        }
    }
    for (bool s : seen) CHECK(s);
    CHECK(total >= scene.triangles.size()); // duplicates allowed, losses not
}

TEST_CASE("route and owner: interface crossing, corners, exits") {
    Scene scene = two_triangle_scene();
    PartitionResult part = partition(scene, 2);
    double cut = part.subdomains[0].bounds.max.x;

    // on the interface heading right -> right sub-domain
    Vec3 on_iface{cut, 0.4, 0.0};
    CHECK(part.route(on_iface, {1, 0, 0}) == 1);
    CHECK(part.route(on_iface, {-1, 0, 0}) == 0);

    // heading out of the (padded) scene box: background
    Vec3 near_edge{part.scene_bounds.max.x - 1e-9, 0.4, 0.0};
    CHECK(part.route(near_edge, {1, 0, 0}) == -1);

    // ownership ties on the cut plane go to the lower id
    CHECK(part.owner({cut, 0.4, 0.0}) == 0);
    // clamped ownership: a point a hair outside the hull still resolves
    Vec3 outside = scene.bounds.max + Vec3{1e-12, 1e-12, 1e-12};
    CHECK(part.owner(outside) == static_cast<int>(part.subdomains.size()) - 1);
}

TEST_CASE("route: 4-way corner resolves deterministically by advanced point") {
    Scene scene = make_cornell_scene(8, 8);
    PartitionResult part = partition(scene, 4);
    // find a corner where two cuts meet: use bsp root cut + child cut
    double cx = part.bsp[0].cut;
    int axis0 = part.bsp[0].axis;
    const auto& child = part.bsp[part.bsp[0].left];
    double cy = child.cut;
    int axis1 = child.axis;
    Vec3 corner = scene.bounds.center();
    if (axis0 == 0) corner.x = cx; else if (axis0 == 1) corner.y = cx; else corner.z = cx;
    if (axis1 == 0) corner.x = cy; else if (axis1 == 1) corner.y = cy; else corner.z = cy;

    Vec3 diag = normalized(Vec3{0.7, 0.5, 0.3});
    int a = part.route(corner, diag);
    int b = part.route(corner, diag);
    CHECK(a == b); // deterministic
    CHECK(a >= 0);
}

TEST_CASE("trace_subdomain: pass-through preserves state bit for bit") {
    Scene scene = two_triangle_scene();
    PartitionResult part = partition(scene, 2);
    // left sub-domain, a ray crossing empty space toward the right cluster
    Bvh left_tree = Bvh::build(scene.triangles, part.subdomains[0].triangles);

    BoundaryRay in;
    in.kind = RayKind::Radiance;
    in.destination = 0;
    in.pixel = 77;
    in.group = 3;
    in.bounce = 2;
    in.origin = {part.subdomains[0].bounds.min.x, 0.2, 0.0}; // coplanar: passes through
    in.dir = normalized(Vec3{1, 0, 0});
    in.throughput = Spectrum(0.33);

    std::unordered_map<uint32_t, Spectrum> partials;
    std::vector<BoundaryRay> outbound;
    SubTraceCounters counters;
    trace_subdomain(scene, part, 0, left_tree, std::span(&in, 1), {}, {}, partials, outbound,
                    counters);

    REQUIRE(outbound.size() == 1);
    const BoundaryRay& out = outbound[0];
    CHECK(out.destination == 1);
    CHECK(out.pixel == 77);
    CHECK(out.group == 3);
    CHECK(out.bounce == 2);
    CHECK(out.dir == in.dir);
    CHECK(out.throughput == in.throughput);
    CHECK(out.origin.x ==
          doctest::Approx(part.subdomains[0].bounds.max.x).epsilon(1e-12));
    CHECK(partials.empty());
    CHECK(counters.forwarded == 1);
    CHECK(counters.terminated == 0);
}

TEST_CASE("trace_subdomain: owned diffuse hit emits one shadow segment per crossing light") {
    // One point light placed in the other sub-domain with a clear line of
    // sight: the verdict cannot resolve locally, so a shadow-segment boundary
    // ray must leave.
    Scene scene = make_cornell_scene(16, 16);
    scene.lights.clear();
    PointLight lamp;
    lamp.position = {0.9, 0.95, 0.8};
    lamp.intensity = Spectrum(1.0);
    scene.lights.push_back(lamp);
    finalize_scene(scene);

    PartitionResult part = partition(scene, 2);
    int light_sub = part.locate(lamp.position);

    BoundaryRay in;
    in.kind = RayKind::Radiance;
    in.destination = 0;
    in.pixel = 5;
    in.origin = {0.1, 0.5, 0.85}; // straight down onto the floor, clear of blocks
    in.dir = {0, -1, 0};
    in.throughput = Spectrum::ones();
    int start_sub = part.locate(in.origin);
    REQUIRE(start_sub >= 0);
    REQUIRE(start_sub != light_sub); // the segment must cross the cut
    in.destination = static_cast<uint32_t>(start_sub);

    Bvh tree = Bvh::build(scene.triangles, part.subdomains[start_sub].triangles);
    std::unordered_map<uint32_t, Spectrum> partials;
    std::vector<BoundaryRay> outbound;
    SubTraceCounters counters;
    trace_subdomain(scene, part, start_sub, tree, std::span(&in, 1), {}, {}, partials, outbound,
                    counters);

    REQUIRE(counters.shadow_started == 1);
    REQUIRE(counters.shadow_forwarded == 1);
    bool found = false;
    for (const auto& out : outbound) {
        if (out.kind != RayKind::Shadow) continue;
        found = true;
        CHECK(out.destination != in.destination);
        CHECK(out.pixel == 5);
        CHECK(out.light_id == 0);
        CHECK(out.seg_b == lamp.position);
        CHECK(out.seg_progress > 0.0);
    }
    CHECK(found);
    CHECK(partials.empty()); // verdict still pending next door
}

TEST_CASE("trace_subdomain: below-threshold inbound ray dies quietly") {
    Scene scene = two_triangle_scene();
    PartitionResult part = partition(scene, 2);
    Bvh left_tree = Bvh::build(scene.triangles, part.subdomains[0].triangles);

    BoundaryRay in;
    in.kind = RayKind::Radiance;
    in.destination = 0;
    in.origin = {0.25, 0.25, 3.0};
    in.dir = {0, 0, -1};
    in.throughput = Spectrum{}; // all bands dead already
    in.bounce = 8;              // at the cap: no children

    std::unordered_map<uint32_t, Spectrum> partials;
    std::vector<BoundaryRay> outbound;
    SubTraceCounters counters;
    trace_subdomain(scene, part, 0, left_tree, std::span(&in, 1), {}, {}, partials, outbound,
                    counters);
    CHECK(outbound.empty());
    // direct terms are weighted by the dead throughput: all-zero, so omitted
    CHECK(partials.empty());
    CHECK(counters.terminated == 1);
}

TEST_CASE("trace_subdomain: wrong destination raises a routing violation") {
    Scene scene = two_triangle_scene();
    PartitionResult part = partition(scene, 2);
    Bvh tree = Bvh::build(scene.triangles, part.subdomains[0].triangles);
    BoundaryRay in;
    in.destination = 1; // delivered to sub 0
    std::unordered_map<uint32_t, Spectrum> partials;
    std::vector<BoundaryRay> outbound;
    SubTraceCounters counters;
    CHECK_THROWS_AS(
        trace_subdomain(scene, part, 0, tree, std::span(&in, 1), {}, {}, partials, outbound,
                        counters),
        RoutingError);
}

TEST_CASE("run_ddm: k = 1 is byte-identical to the tiled render") {
    for (Scene scene : {two_triangle_scene(), make_cornell_scene(24, 24)}) {
        Framebuffer reference = run_tiled(scene, 32, 1);
        DdmOptions opt;
        opt.subdomains = 1;
        opt.workers = 1;
        opt.memory_budget = 1;
        Framebuffer ddm = run_ddm(scene, opt);
        CHECK(ddm.bitwise_equal(reference));
    }
}

TEST_CASE("run_ddm: decomposition invariance on the cornell scene") {
    Scene scene = make_cornell_scene(32, 32);
    Framebuffer reference = run_tiled(scene, 32, 1);
    for (int k : {2, 4, 8}) {
        for (int budget : {1, k}) {
            for (int workers : {1, 3}) {
                DdmOptions opt;
                opt.subdomains = k;
                opt.workers = workers;
                opt.memory_budget = budget;
                opt.audit = true;
                DdmReport report;
                Framebuffer ddm = run_ddm(scene, opt, &report);
                double dev = max_relative_deviation(ddm, reference);
                INFO("k=", k, " budget=", budget, " workers=", workers, " dev=", dev);
                CHECK(dev <= 1e-6);
                audit_report(report, opt);
            }
        }
    }
}

TEST_CASE("run_ddm: budget = k never unloads; budget < k does") {
    Scene scene = make_cornell_scene(24, 24);
    DdmOptions full;
    full.subdomains = 4;
    full.workers = 2;
    full.memory_budget = 4;
    DdmReport report_full;
    run_ddm(scene, full, &report_full);
    // With the budget covering every sub-domain, each loads exactly once.
    CHECK(report_full.loads == 4);

    DdmOptions tight = full;
    tight.memory_budget = 1;
    DdmReport report_tight;
    run_ddm(scene, tight, &report_tight);
    CHECK(report_tight.loads > 4); // swaps forced reloads
    CHECK(report_tight.max_resident <= 1);
}

TEST_CASE("run_ddm: shadow verdicts equal the global occlusion oracle") {
    // Statistical end-to-end: the budgeted DDM image equals the reference,
    // which can only happen if every shadow verdict matched the global test.
    Scene scene = make_cornell_scene(24, 24);
    Framebuffer reference = run_tiled(scene, 32, 1);
    DdmOptions opt;
    opt.subdomains = 8;
    opt.workers = 2;
    opt.memory_budget = 2;
    Framebuffer ddm = run_ddm(scene, opt);
    CHECK(max_relative_deviation(ddm, reference) <= 1e-6);
}

TEST_CASE("run_ddm: photon-mapping shade policy matches the tiled global render") {
    Scene scene = make_cornell_scene(24, 24);
    scene.settings.photon_count = 8000;
    scene.settings.knn_k = 30;
    PhotonMaps maps = run_photon_jobs(scene, 8000, 2, scene.settings.seed);
    Framebuffer reference = run_tiled_global(scene, maps, 32, 1);

    for (int k : {1, 4}) {
        DdmOptions opt;
        opt.subdomains = k;
        opt.workers = 2;
        opt.memory_budget = k;
        opt.photon_maps = &maps;
        Framebuffer ddm = run_ddm(scene, opt);
        CHECK(max_relative_deviation(ddm, reference) <= 1e-6);
    }
}

TEST_CASE("run_ddm: gather overlaps processing when the budget is tight") {
    Scene scene = make_cornell_scene(96, 96);
    DdmOptions opt;
    opt.subdomains = 4;
    opt.workers = 4;
    opt.memory_budget = 1;
    DdmReport report;
    run_ddm(scene, opt, &report);

    struct Interval {
        uint64_t start = 0, end = 0;
    };
    std::vector<Interval> gathers, claims;
    std::map<int, uint64_t> open_gather, open_claim;
    for (const auto& e : report.events) {
        if (e.kind == DdmEvent::Kind::Gather) {
            if (std::string(e.tag) == "start") open_gather[e.subdomain] = e.t_ns;
            else gathers.push_back({open_gather[e.subdomain], e.t_ns});
        }
        if (e.kind == DdmEvent::Kind::Claim) {
            if (std::string(e.tag) == "start") open_claim[e.subdomain] = e.t_ns;
            else claims.push_back({open_claim[e.subdomain], e.t_ns});
        }
    }
    REQUIRE(!gathers.empty());
    REQUIRE(!claims.empty());
    bool overlap = false;
    for (const auto& g : gathers)
        for (const auto& c : claims)
            if (g.start < c.end && c.start < g.end) overlap = true;
    CHECK(overlap);
}

TEST_CASE("boundary ray wire codec round trip") {
    BoundaryRay ray;
    ray.kind = RayKind::Radiance;
    ray.destination = 5;
    ray.pixel = 123456;
    ray.group = 7;
    ray.bounce = 3;
    ray.inside = true;
    ray.origin = {1.25, -2.5, 3.75};
    ray.dir = normalized(Vec3{0.1, 0.9, -0.4});
    for (int j = 0; j < kBandCount; ++j) ray.throughput[j] = 0.001 * j;

    BandRange full{};
    auto bytes = encode_boundary_ray(ray, full);
    CHECK(bytes.size() == boundary_ray_wire_size(RayKind::Radiance, kBandCount));
    BoundaryRay back = decode_boundary_ray(bytes, full);
    CHECK(back.kind == RayKind::Radiance);
    CHECK(back.destination == 5);
    CHECK(back.pixel == 123456);
    CHECK(back.group == 7);
    CHECK(back.bounce == 3);
    CHECK(back.inside);
    CHECK(back.origin == ray.origin); // f64 fields exact
    CHECK(back.dir == ray.dir);
    for (int j = 0; j < kBandCount; ++j) // throughput rides as f32
        CHECK(back.throughput[j] == doctest::Approx(ray.throughput[j]).epsilon(1e-6));

    BoundaryRay shadow = ray;
    shadow.kind = RayKind::Shadow;
    shadow.seg_b = {9, 8, 7};
    shadow.light_id = 2;
    auto sbytes = encode_boundary_ray(shadow, full);
    CHECK(sbytes.size() == boundary_ray_wire_size(RayKind::Shadow, kBandCount));
    BoundaryRay sback = decode_boundary_ray(sbytes, full);
    CHECK(sback.seg_b == shadow.seg_b);
    CHECK(sback.light_id == 2);

    // group-restricted payload
    BandRange narrow{12, 17};
    auto nbytes = encode_boundary_ray(ray, narrow);
    CHECK(nbytes.size() == boundary_ray_wire_size(RayKind::Radiance, 5));
    BoundaryRay nback = decode_boundary_ray(nbytes, narrow);
    for (int j = 12; j < 17; ++j)
        CHECK(nback.throughput[j] == doctest::Approx(ray.throughput[j]).epsilon(1e-6));

    CHECK_THROWS_AS(decode_boundary_ray(std::span<const uint8_t>(bytes.data(), 10), full),
                    InvalidData);
}

TEST_CASE("DdmLedger: terminated without flush is an error") {
    DdmLedger ledger(4, 4, 2);
    std::unordered_map<uint32_t, Spectrum> partial;
    partial[5] = Spectrum(1.0);
    ledger.merge_partial(0, partial);
    ledger.mark_terminated(0);
    ledger.mark_terminated(1); // never flushed
    CHECK_THROWS_AS(ledger.finalize(), IncompleteGatherError);

    DdmLedger ok(4, 4, 2);
    ok.merge_partial(0, partial);
    ok.merge_partial(1, {});
    ok.mark_terminated(0);
    ok.mark_terminated(1);
    Framebuffer fb = ok.finalize();
    CHECK(fb.pixels[5][0] == 1.0);

    // two partials per pixel sum commutatively
    DdmLedger two(4, 4, 2);
    std::unordered_map<uint32_t, Spectrum> a, b;
    a[3] = Spectrum(0.25);
    b[3] = Spectrum(0.5);
    two.merge_partial(0, a);
    two.merge_partial(1, b);
    two.mark_terminated(0);
    two.mark_terminated(1);
    CHECK(two.finalize().pixels[3][40] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("event log CSV writer") {
    std::vector<DdmEvent> events{{100, DdmEvent::Kind::Load, 0, "", 10},
                                 {200, DdmEvent::Kind::Claim, 0, "start", 64},
                                 {300, DdmEvent::Kind::BoundaryEmit, 1, "", 7}};
    std::string path = "events_tmp.csv";
    write_event_log_csv(path, events);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "event_ns,kind,subdomain_id,detail");
    std::getline(in, line);
    CHECK(line == "100,load,0,10");
    std::getline(in, line);
    CHECK(line == "200,claim,0,start:64");
    in.close();
    std::remove(path.c_str());
}
