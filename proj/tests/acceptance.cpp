// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line; the
// binary exits non-zero if any criterion fails. SKIP appears only where a
// criterion's own precondition (hardware threads) is not met.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "specray/ddm.hpp"
#include "specray/image_io.hpp"
#include "specray/procedural.hpp"
#include "specray/render_global.hpp"
#include "specray/scheduler.hpp"
#include "specray/sweep.hpp"

using namespace specray;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    if (!pass) ++g_failures;
}

void report_skip(int criterion, const std::string& name, const std::string& why) {
    std::printf("[SKIP] criterion %d: %s (%s)\n", criterion, name.c_str(), why.c_str());
}

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ---------------------------------------------------------------- criterion 1+8
struct DdmAuditOutcome {
    bool ok = true;
    std::string detail;
};

DdmAuditOutcome audit(const DdmReport& report, int budget) {
    DdmAuditOutcome out;
    auto fail = [&](const std::string& why) {
        out.ok = false;
        if (!out.detail.empty()) out.detail += "; ";
        out.detail += why;
    };

    if (report.brays_emitted != report.brays_consumed)
        fail("emitted " + std::to_string(report.brays_emitted) + " != consumed " +
             std::to_string(report.brays_consumed));
    std::vector<uint64_t> seqs = report.consumed_seqs;
    std::sort(seqs.begin(), seqs.end());
    if (seqs.size() != report.brays_emitted) fail("sequence count mismatch");
    for (size_t i = 0; i < seqs.size(); ++i)
        if (seqs[i] != i) {
            fail("sequence " + std::to_string(i) + " not consumed exactly once");
            break;
        }

    const SubTraceCounters& c = report.counters;
    if (c.local_rays != c.terminated + c.background + c.forwarded + c.anomalies)
        fail("radiance ray conservation violated");
    if ((c.consumed - c.shadow_consumed) + c.local_children != c.local_rays)
        fail("local ray ledger violated");
    if (c.shadow_started + c.shadow_consumed !=
        c.verdict_visible + c.verdict_occluded + c.shadow_forwarded + c.anomalies)
        fail("shadow walk conservation violated");
    if (c.anomalies != 0) fail(std::to_string(c.anomalies) + " routing anomalies");

    int resident = 0, max_resident = 0;
    for (const auto& e : report.events) {
        if (e.kind == DdmEvent::Kind::Load) ++resident;
        if (e.kind == DdmEvent::Kind::Unload) --resident;
        max_resident = std::max(max_resident, resident);
    }
    if (max_resident > budget)
        fail("event log shows " + std::to_string(max_resident) + " resident > budget " +
             std::to_string(budget));
    return out;
}

void criterion_1_and_8() {
    double t_start = now_s();

    NaveParams nave_params;
    nave_params.target_triangles = 1400;
    nave_params.image_width = nave_params.image_height = 256;
    Scene nave = make_nave_scene(nave_params);
    Scene cornell = make_cornell_scene(256, 256);

    struct Case {
        const char* name;
        Scene* scene;
    } cases[] = {{"nave", &nave}, {"cornell", &cornell}};

    double worst_dev = 0.0;
    bool invariance_ok = true;
    bool k1_bitwise_ok = true;
    DdmAuditOutcome audits;
    std::string first_fail;

    for (auto& cs : cases) {
        Framebuffer reference = run_tiled(*cs.scene, 32, 1);
        for (int k : {1, 2, 4, 8}) {
            std::set<int> budgets{1, k};
            for (int budget : budgets) {
                for (int workers : {1, 4}) {
                    DdmOptions opt;
                    opt.subdomains = k;
                    opt.workers = workers;
                    opt.memory_budget = budget;
                    opt.audit = true;
                    DdmReport rep;
                    Framebuffer fb = run_ddm(*cs.scene, opt, &rep);

                    double dev = max_relative_deviation(fb, reference);
                    worst_dev = std::max(worst_dev, dev);
                    if (dev > 1e-6 && invariance_ok) {
                        invariance_ok = false;
                        first_fail = std::string(cs.name) + " k=" + std::to_string(k) +
                                     " budget=" + std::to_string(budget) +
                                     " workers=" + std::to_string(workers);
                    }
                    if (k == 1 && workers == 1 && !fb.bitwise_equal(reference))
                        k1_bitwise_ok = false;

                    DdmAuditOutcome a = audit(rep, budget);
                    if (!a.ok && audits.ok) audits = a;
                }
            }
        }
    }

    double elapsed = now_s() - t_start;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "max per-band relative deviation %.3e, k=1 bitwise %s, matrix %.1f s",
                  worst_dev, k1_bitwise_ok ? "equal" : "UNEQUAL", elapsed);
    report(1, "decomposition invariance <= 1e-6 over k x budget x workers",
           invariance_ok && k1_bitwise_ok,
           invariance_ok ? buf : (std::string(buf) + "; first failure " + first_fail).c_str());

    // Criterion 8 part 1: bookkeeping audits over all invariance runs.
    // Part 2: gather/processing overlap on a budget-constrained run.
    Scene overlap_scene = make_cornell_scene(128, 128);
    DdmOptions opt;
    opt.subdomains = 4;
    opt.workers = 4;
    opt.memory_budget = 1;
    opt.audit = true;
    DdmReport rep;
    run_ddm(overlap_scene, opt, &rep);
    DdmAuditOutcome overlap_audit = audit(rep, opt.memory_budget);

    struct Interval {
        uint64_t s, e;
    };
    std::vector<Interval> gathers, claims;
    std::map<int, uint64_t> open_g, open_c;
    for (const auto& e : rep.events) {
        if (e.kind == DdmEvent::Kind::Gather) {
            if (std::string(e.tag) == "start") open_g[e.subdomain] = e.t_ns;
            else gathers.push_back({open_g[e.subdomain], e.t_ns});
        } else if (e.kind == DdmEvent::Kind::Claim) {
            if (std::string(e.tag) == "start") open_c[e.subdomain] = e.t_ns;
            else claims.push_back({open_c[e.subdomain], e.t_ns});
        }
    }
    bool overlap = false;
    for (const auto& g : gathers)
        for (const auto& c : claims)
            if (g.s < c.e && c.s < g.e) overlap = true;

    bool ok = audits.ok && overlap_audit.ok && overlap;
    std::string detail = "exactly-once + conservation + budget audits clean";
    if (!audits.ok) detail = "invariance-run audit: " + audits.detail;
    else if (!overlap_audit.ok) detail = "overlap-run audit: " + overlap_audit.detail;
    else if (!overlap) detail = "no gather interval overlapped a processing interval";
    else detail += "; " + std::to_string(gathers.size()) + " gathers, overlap observed";
    report(8, "DDM bookkeeping: exactly-once, conservation, budget, gather overlap", ok, detail);
}

// ------------------------------------------------------------------ criterion 2
void criterion_2() {
    NaveParams params;
    params.target_triangles = 1400;
    params.image_width = params.image_height = 128;
    Scene nave = make_nave_scene(params);

    Framebuffer serial = run_tiled(nave, 32, 1);
    std::vector<float> serial_pfm = pfm_pixels(serial);

    bool ok = true;
    std::string fail_case;
    auto check = [&](const Framebuffer& fb, const std::string& what) {
        if (!(fb.bitwise_equal(serial) && pfm_pixels(fb) == serial_pfm)) {
            if (ok) fail_case = what;
            ok = false;
        }
    };

    for (int workers : {1, 2, 4, 8})
        for (int tile : {8, 32})
            check(run_tiled(nave, tile, workers),
                  "tiled w=" + std::to_string(workers) + " t=" + std::to_string(tile));
    for (int group : {3, 4, 81})
        for (int workers : {1, 2, 4, 8})
            check(run_spectral_groups(nave, group, workers),
                  "groups n=" + std::to_string(group) + " w=" + std::to_string(workers));

    report(2, "run_tiled / run_spectral_groups byte-identical to the serial PFM", ok,
           ok ? "8 tiled + 12 grouped configurations, all byte-equal"
              : "first mismatch: " + fail_case);
}

// ------------------------------------------------------------------ criterion 3
void criterion_3() {
    std::mt19937_64 rng(2026);
    std::uniform_real_distribution<double> angle(0.0, kPi / 2 - 1e-6);
    std::uniform_real_distribution<double> index(1.0, 2.5);

    double worst = 0.0;
    for (int trial = 0; trial < 100000; ++trial) {
        double cos_i = std::cos(angle(rng));
        if (!(cos_i > 0.0)) continue;
        Spectrum n_i(index(rng)), n_t(index(rng));
        FresnelSplit f = fresnel_dielectric(cos_i, n_i, n_t, {40, 41});
        worst = std::max(worst, std::abs(f.reflect[40] + f.transmit[40] - 1.0));
    }
    bool sum_ok = worst <= 1e-12;

    // TIR onset: bisect the indicator and compare against asin(n_t/n_i).
    double worst_onset = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        double n_hi = index(rng), n_lo = 1.0 + (n_hi - 1.0) * 0.5;
        if (n_lo >= n_hi) std::swap(n_lo, n_hi);
        if (n_hi - n_lo < 1e-3) continue;
        Spectrum ni(n_hi), nt(n_lo);
        auto is_tir = [&](double theta) {
            FresnelSplit f = fresnel_dielectric(std::cos(theta), ni, nt, {40, 41});
            return f.reflect[40] == 1.0 && f.transmit[40] == 0.0;
        };
        double lo = 1e-6, hi = kPi / 2 - 1e-9;
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            if (is_tir(mid)) hi = mid;
            else lo = mid;
        }
        double expect = std::asin(n_lo / n_hi);
        worst_onset = std::max(worst_onset, std::abs(hi - expect));
    }
    bool onset_ok = worst_onset <= 1e-9;

    char buf[160];
    std::snprintf(buf, sizeof(buf), "max |R+T-1| = %.2e over 1e5 triples; TIR onset error %.2e",
                  worst, worst_onset);
    report(3, "Fresnel energy conservation and TIR onset", sum_ok && onset_ok, buf);
}

// ------------------------------------------------------------------ criterion 4
void criterion_4() {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    std::uniform_real_distribution<double> coord(-3.0, 3.0);
    std::uniform_int_distribution<int> count(1, 4);
    std::uniform_int_distribution<int> kind(0, 1);

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Spectrum rho;
        for (int j = 0; j < kBandCount; ++j) rho[j] = unit(rng);

        Scene scene;
        Material m;
        m.name = "m";
        m.diffuse = true;
        m.diffuse_reflectance = rho;
        scene.material_ids["m"] = 0;
        scene.materials.push_back(m);
        TriangleMesh plane;
        plane.positions = {{-20, -20, 0}, {20, -20, 0}, {20, 20, 0}, {-20, 20, 0}};
        plane.faces = {{0, 1, 2}, {0, 2, 3}};
        plane.material = 0;
        scene.meshes.push_back(plane);

        int n = count(rng);
        for (int i = 0; i < n; ++i) {
            Spectrum power;
            for (int j = 0; j < kBandCount; ++j) power[j] = unit(rng) * 2.0;
            if (kind(rng) == 0) {
                PointLight pl;
                pl.position = {coord(rng), coord(rng), unit(rng) + 0.5};
                pl.intensity = power;
                scene.lights.push_back(pl);
            } else {
                DirectionalLight dl;
                dl.direction = normalized(Vec3{coord(rng), coord(rng), -(unit(rng) + 0.2)});
                dl.irradiance = power;
                scene.lights.push_back(dl);
            }
        }
        OrthographicCamera cam;
        cam.center = {0, 0, 5};
        cam.view_dir = {0, 0, -1};
        cam.width_m = cam.height_m = 1;
        scene.camera.projection = cam;
        scene.camera.width = scene.camera.height = 2;
        finalize_scene(scene);

        Hit hit;
        hit.point = {coord(rng) * 0.3, coord(rng) * 0.3, 0.0};
        hit.normal = {0, 0, 1};
        hit.material = 0;

        Spectrum got = shade_direct(scene, hit, {0, 0, 1});

        // Independent brute-force evaluation of the light sum.
        Spectrum expect;
        for (const Light& light : scene.lights) {
            Vec3 w;
            Spectrum incident;
            if (const auto* pl = std::get_if<PointLight>(&light)) {
                Vec3 d = pl->position - hit.point;
                double d2 = dot(d, d);
                w = d / std::sqrt(d2);
                incident = pl->intensity * (1.0 / d2);
            } else {
                const auto& dl = std::get<DirectionalLight>(light);
                w = -dl.direction;
                incident = dl.irradiance;
            }
            double cosine = std::max(0.0, dot(hit.normal, w));
            for (int j = 0; j < kBandCount; ++j)
                expect[j] += (rho[j] / kPi) * incident[j] * cosine;
        }
        for (int j = 0; j < kBandCount; ++j) {
            double denom = std::max(std::abs(expect[j]), 1e-300);
            worst = std::max(worst, std::abs(got[j] - expect[j]) / denom);
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max relative error %.2e over 100 configurations", worst);
    report(4, "direct-lighting sum matches the brute-force oracle", worst <= 1e-12, buf);
}

// ------------------------------------------------------------------ criterion 5
void criterion_5() {
    // knn oracle
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> pos(-5.0, 5.0);
    std::vector<Photon> photons;
    for (int i = 0; i < 10000; ++i) {
        Photon p;
        p.position = {pos(rng), pos(rng), pos(rng)};
        p.power = Spectrum(1.0);
        photons.push_back(p);
    }
    PhotonMap map = PhotonMap::build(photons, photons.size());
    bool knn_ok = true;
    std::vector<KnnResult> got;
    for (int q = 0; q < 1000 && knn_ok; ++q) {
        Vec3 point{pos(rng), pos(rng), pos(rng)};
        int k = 1 + static_cast<int>(rng() % 80);
        double r_max = 0.3 + 2.0 * std::uniform_real_distribution<double>(0, 1)(rng);
        map.knn_query(point, k, r_max, got);
        std::vector<std::pair<double, uint32_t>> all;
        for (uint32_t i = 0; i < photons.size(); ++i) {
            double d2 = length_squared(photons[i].position - point);
            if (d2 <= r_max * r_max) all.push_back({d2, i});
        }
        std::sort(all.begin(), all.end());
        if (static_cast<int>(all.size()) > k) all.resize(k);
        if (got.size() != all.size()) knn_ok = false;
        for (size_t i = 0; knn_ok && i < got.size(); ++i)
            if (got[i].order != all[i].second || got[i].distance != std::sqrt(all[i].first))
                knn_ok = false;
    }

    // furnace: closed sphere, rho = 0.5, uniform point emission at the center
    const double rho = 0.5;
    Scene furnace = make_furnace_scene(64, 3, rho);
    furnace.settings.photon_count = 100000;

    PhotonMaps maps1 = run_photon_jobs(furnace, 100000, 1, furnace.settings.seed);
    PhotonMaps maps4 = run_photon_jobs(furnace, 100000, 4, furnace.settings.seed);
    bool multiset_ok = maps1.global.size() == maps4.global.size();
    for (size_t i = 0; multiset_ok && i < maps1.global.size(); ++i) {
        const Photon& a = maps1.global.photons()[i];
        const Photon& b = maps4.global.photons()[i];
        if (!(a.position == b.position) || !(a.power == b.power)) multiset_ok = false;
    }

    GlobalChannels channels;
    Framebuffer fb = render_global(furnace, maps1, &channels);
    (void)fb;
    double sum = 0.0, sum2 = 0.0;
    size_t n = 0;
    for (const Spectrum& px : channels.indirect.pixels) {
        double v = px[40];
        sum += v;
        sum2 += v * v;
        ++n;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    double cov = mean > 0.0 ? std::sqrt(std::max(0.0, var)) / mean : 1.0;

    // Analytic multibounce estimate from the photon population: incident flux
    // E (1 + rho + rho^2 + ...) reflected by rho/pi.
    double radius = 1.0;
    double expect = rho / (kPi * (1.0 - rho)) * (1.0 / (radius * radius));
    double mean_err = std::abs(mean - expect) / expect;

    bool ok = knn_ok && multiset_ok && cov <= 0.10 && mean_err <= 0.15;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "knn %s; multiset %s; CoV %.1f%%; mean %.4f vs analytic %.4f (err %.1f%%)",
                  knn_ok ? "exact" : "MISMATCH", multiset_ok ? "identical" : "DIFFERS",
                  cov * 100.0, mean, expect, mean_err * 100.0);
    report(5, "photon-map oracles: knn exactness + furnace uniformity", ok, buf);
}

// ------------------------------------------------------------------ criterion 6
void criterion_6() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> kval(0.0, 2e-4);
    std::uniform_real_distribution<double> dval(1e-5, 0.02);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        ComplexIor ior{Spectrum(1.5), Spectrum{}};
        for (int j = 0; j < kBandCount; ++j) ior.k[j] = kval(rng);
        double d1 = dval(rng), d2 = dval(rng);
        Spectrum a = volume_transmittance(ior, d1);
        Spectrum b = volume_transmittance(ior, d2);
        Spectrum doubled = volume_transmittance(ior, 2.0 * d1);
        Spectrum summed = volume_transmittance(ior, d1 + d2);
        for (int j = 0; j < kBandCount; ++j) {
            worst = std::max(worst, std::abs(doubled[j] - a[j] * a[j]) / doubled[j]);
            worst = std::max(worst, std::abs(summed[j] - a[j] * b[j]) / summed[j]);
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max relative defect %.2e over 500 random curves", worst);
    report(6, "Beer-Lambert multiplicativity in path length", worst <= 1e-12, buf);
}

// ------------------------------------------------------------------ criterion 7
void criterion_7() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw < 8) {
        report_skip(7, "scaling trend vs sub-domain count",
                    "requires >= 8 hardware threads, found " + std::to_string(hw) +
                        "; sweep machinery covered by unit tests");
        return;
    }

    NaveParams params;
    params.target_triangles = 1400;
    params.image_width = params.image_height = 128;
    Scene nave = make_nave_scene(params);

    SweepConfig config;
    config.threads = {static_cast<int>(hw) >= 8 ? 8 : static_cast<int>(hw)};
    config.subdomains = {1, 2, 4, 8};
    config.repetitions = 5;
    config.algorithm = "scanline";
    SweepResult result = run_sweep(nave, config);

    bool valid = result.all_valid();
    std::vector<double> speedups;
    for (int s : config.subdomains) speedups.push_back(result.cell(s, config.threads[0])->speedup);

    bool nondecreasing = true;
    for (size_t i = 1; i < speedups.size(); ++i)
        if (speedups[i] < speedups[i - 1] * 0.95) nondecreasing = false; // 5% noise band
    bool strictly_better = speedups.back() > speedups.front();

    char buf[200];
    std::snprintf(buf, sizeof(buf), "speedups at %d threads: 1->%.2f 2->%.2f 4->%.2f 8->%.2f",
                  config.threads[0], speedups[0], speedups[1], speedups[2], speedups[3]);
    report(7, "speedup non-decreasing in sub-domain count, 8 > 1",
           valid && nondecreasing && strictly_better, buf);
}

// ------------------------------------------------------------------ criterion 9
void criterion_9() {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> pos(-10.0, 10.0);
    std::uniform_real_distribution<double> delta(-1.2, 1.2);

    bool ok = true;
    double worst_t = 0.0;
    uint64_t hits = 0;
    for (int scene_idx = 0; scene_idx < 3 && ok; ++scene_idx) {
        std::vector<Triangle> tris;
        for (int i = 0; i < 1000; ++i) {
            Triangle t;
            t.a = {pos(rng), pos(rng), pos(rng)};
            t.b = t.a + Vec3{delta(rng), delta(rng), delta(rng)};
            t.c = t.a + Vec3{delta(rng), delta(rng), delta(rng)};
            tris.push_back(t);
        }
        Bvh bvh = Bvh::build(tris);

        for (int q = 0; q < 10000 && ok; ++q) {
            Ray ray;
            ray.origin = {pos(rng), pos(rng), pos(rng)};
            ray.dir = normalized(Vec3{pos(rng), pos(rng), pos(rng)} - ray.origin);
            auto fast = bvh.intersect(ray);

            std::optional<std::pair<double, uint32_t>> slow;
            for (uint32_t i = 0; i < tris.size(); ++i) {
                auto t = intersect_triangle(tris[i], ray.origin, ray.dir);
                if (!t || *t < ray.t_min || *t > ray.t_max) continue;
                if (!slow || *t < slow->first || (*t == slow->first && i < slow->second))
                    slow = {{*t, i}};
            }
            if (fast.has_value() != slow.has_value()) { ok = false; break; }
            if (fast) {
                ++hits;
                if (fast->triangle != slow->second) { ok = false; break; }
                worst_t = std::max(worst_t, std::abs(fast->t - slow->first));
            }

            Vec3 a{pos(rng), pos(rng), pos(rng)};
            Vec3 b{pos(rng), pos(rng), pos(rng)};
            if (length(b - a) < 1e-6) continue;
            Vec3 dir = normalized(b - a);
            bool brute = false;
            for (const auto& tri : tris) {
                auto t = intersect_triangle(tri, a, dir);
                if (t && *t >= 1e-4 && *t <= length(b - a) - 1e-4) { brute = true; break; }
            }
            if (bvh.occluded(a, b, 1e-4) != brute) { ok = false; break; }
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%llu hits agreed exactly, max |dt| = %.2e",
                  static_cast<unsigned long long>(hits), worst_t);
    report(9, "BVH intersect/occluded agree with brute force", ok && worst_t <= 1e-9, buf);
}

} // namespace

int main() {
    double t0 = now_s();
    criterion_1_and_8();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_9();
    std::printf("acceptance: %s (%d failure%s, %.1f s total)\n",
                g_failures == 0 ? "ALL CRITERIA PASS" : "FAILURES PRESENT", g_failures,
                g_failures == 1 ? "" : "s", now_s() - t0);
    return g_failures == 0 ? 0 : 1;
}
