// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/ddm.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "specray/errors.hpp"

namespace specray {

namespace {

uint64_t now_ns() {
    return static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

} // namespace

SubTraceCounters& SubTraceCounters::operator+=(const SubTraceCounters& o) {
    consumed += o.consumed;
    shadow_consumed += o.shadow_consumed;
    local_rays += o.local_rays;
    local_children += o.local_children;
    terminated += o.terminated;
    background += o.background;
    forwarded += o.forwarded;
    shadow_started += o.shadow_started;
    shadow_forwarded += o.shadow_forwarded;
    verdict_visible += o.verdict_visible;
    verdict_occluded += o.verdict_occluded;
    anomalies += o.anomalies;
    return *this;
}

namespace {

int descend_bsp(const std::vector<PartitionResult::CutNode>& bsp, const Vec3& point) {
    int32_t node = 0;
    for (;;) {
        const PartitionResult::CutNode& n = bsp[node];
        if (n.leaf_id >= 0) return n.leaf_id;
        // On-plane points descend left: ownership ties go to the lower id.
        node = point[n.axis] <= n.cut ? n.left : n.right;
    }
}

} // namespace

int PartitionResult::locate(const Vec3& point) const {
    if (!scene_bounds.contains(point)) return -1;
    return descend_bsp(bsp, point);
}

int PartitionResult::owner(const Vec3& point) const {
    Vec3 q{std::clamp(point.x, scene_bounds.min.x, scene_bounds.max.x),
           std::clamp(point.y, scene_bounds.min.y, scene_bounds.max.y),
           std::clamp(point.z, scene_bounds.min.z, scene_bounds.max.z)};
    return descend_bsp(bsp, q);
}

int PartitionResult::route(const Vec3& origin, const Vec3& dir) const {
    Vec3 advanced = origin + dir * route_epsilon;
    return locate(advanced);
}

namespace {

struct PartitionBuilder {
    const Scene& scene;
    PartitionResult result;

    int32_t split(Box3 box, std::vector<uint32_t> tris, int levels) {
        int32_t node_index = static_cast<int32_t>(result.bsp.size());
        result.bsp.emplace_back();

        if (levels == 0) {
            SubDomain sub;
            sub.id = static_cast<int>(result.subdomains.size());
            sub.bounds = box;
            sub.triangles = std::move(tris);
            result.bsp[node_index].leaf_id = sub.id;
            result.subdomains.push_back(std::move(sub));
            return node_index;
        }

        int axis = box.longest_axis();
        std::vector<std::pair<double, uint32_t>> centroids;
        centroids.reserve(tris.size());
        for (uint32_t t : tris) centroids.push_back({scene.triangles[t].centroid()[axis], t});
        std::sort(centroids.begin(), centroids.end());
        double cut = centroids.empty() ? (box.min[axis] + box.max[axis]) * 0.5
                                       : centroids[(centroids.size() - 1) / 2].first;
        // Never produce an empty child box.
        if (!(cut > box.min[axis] && cut < box.max[axis]))
            cut = (box.min[axis] + box.max[axis]) * 0.5;

        Box3 lbox = box, rbox = box;
        if (axis == 0) { lbox.max.x = cut; rbox.min.x = cut; }
        else if (axis == 1) { lbox.max.y = cut; rbox.min.y = cut; }
        else { lbox.max.z = cut; rbox.min.z = cut; }

        std::vector<uint32_t> ltris, rtris;
        for (uint32_t t : tris) {
            // Straddlers live in both halves; hit ownership resolves later.
            if (triangle_overlaps_box(scene.triangles[t], lbox)) ltris.push_back(t);
            if (triangle_overlaps_box(scene.triangles[t], rbox)) rtris.push_back(t);
        }

        result.bsp[node_index].axis = axis;
        result.bsp[node_index].cut = cut;
        int32_t left = split(lbox, std::move(ltris), levels - 1);
        int32_t right = split(rbox, std::move(rtris), levels - 1);
        result.bsp[node_index].left = left;
        result.bsp[node_index].right = right;
        return node_index;
    }
};

} // namespace

PartitionResult partition(const Scene& scene, int k) {
    if (k < 1 || (k & (k - 1)) != 0)
        throw InvalidArgument("partition: sub-domain count must be a power of two, got " +
                              std::to_string(k));
    if (scene.triangles.empty())
        throw ValidationError("partition: scene has no geometry");

    int levels = 0;
    while ((1 << levels) < k) ++levels;

    // Pad the root box so hit points computed a rounding step outside the
    // geometry hull still locate, and planar scenes get positive-extent
    // sub-domain boxes.
    Box3 padded = scene.bounds;
    double pad = 1e-4 * scene.diagonal;
    padded.min = padded.min - Vec3{pad, pad, pad};
    padded.max = padded.max + Vec3{pad, pad, pad};

    PartitionBuilder builder{scene, {}};
    builder.result.scene_bounds = padded;
    builder.result.route_epsilon = 1e-6 * scene.diagonal;

    std::vector<uint32_t> all(scene.triangles.size());
    for (uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    builder.split(padded, std::move(all), levels);

    PartitionResult result = std::move(builder.result);

    // Interfaces: adjacent pairs sharing a positive-area face rectangle.
    for (size_t i = 0; i < result.subdomains.size(); ++i) {
        for (size_t j = i + 1; j < result.subdomains.size(); ++j) {
            Box3 ix = box_intersection(result.subdomains[i].bounds, result.subdomains[j].bounds);
            if (ix.min.x > ix.max.x || ix.min.y > ix.max.y || ix.min.z > ix.max.z) continue;
            Vec3 e = ix.extent();
            int degenerate = (e.x == 0.0) + (e.y == 0.0) + (e.z == 0.0);
            if (degenerate != 1) continue; // edge/corner contact only
            double area = (e.x == 0.0) ? e.y * e.z : (e.y == 0.0) ? e.x * e.z : e.x * e.y;
            if (area <= 0.0) continue;
            int index = static_cast<int>(result.interfaces.size());
            result.interfaces.push_back({static_cast<int>(i), static_cast<int>(j), ix});
            result.subdomains[i].interfaces.push_back(index);
            result.subdomains[j].interfaces.push_back(index);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Wire codec

namespace {

template <typename T>
void put_raw(std::vector<uint8_t>& out, const T& value) {
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T)); // little-endian host assumed
}

template <typename T>
T get_raw(std::span<const uint8_t>& in) {
    T value;
    std::memcpy(&value, in.data(), sizeof(T));
    in = in.subspan(sizeof(T));
    return value;
}

} // namespace

size_t boundary_ray_wire_size(RayKind kind, int band_count) {
    size_t base = 1 + 4 + 4 + 2 + 2 + 1 + 3 * 8 + 3 * 8 + static_cast<size_t>(band_count) * 4;
    if (kind == RayKind::Shadow) base += 3 * 8 + 4;
    return base;
}

std::vector<uint8_t> encode_boundary_ray(const BoundaryRay& ray, BandRange bands) {
    std::vector<uint8_t> out;
    out.reserve(boundary_ray_wire_size(ray.kind, bands.size()));
    put_raw(out, static_cast<uint8_t>(ray.kind));
    put_raw(out, ray.destination);
    put_raw(out, ray.pixel);
    put_raw(out, ray.group);
    put_raw(out, ray.bounce);
    put_raw(out, static_cast<uint8_t>(ray.inside ? 1 : 0));
    for (int a = 0; a < 3; ++a) put_raw(out, ray.origin[a]);
    for (int a = 0; a < 3; ++a) put_raw(out, ray.dir[a]);
    for (int j = bands.begin; j < bands.end; ++j)
        put_raw(out, static_cast<float>(ray.throughput[j]));
    if (ray.kind == RayKind::Shadow) {
        for (int a = 0; a < 3; ++a) put_raw(out, ray.seg_b[a]);
        put_raw(out, ray.light_id);
    }
    return out;
}

BoundaryRay decode_boundary_ray(std::span<const uint8_t> bytes, BandRange bands) {
    if (bytes.size() < boundary_ray_wire_size(RayKind::Radiance, bands.size()))
        throw InvalidData("boundary ray record too short");
    BoundaryRay ray;
    ray.kind = static_cast<RayKind>(get_raw<uint8_t>(bytes));
    ray.destination = get_raw<uint32_t>(bytes);
    ray.pixel = get_raw<uint32_t>(bytes);
    ray.group = get_raw<uint16_t>(bytes);
    ray.bounce = get_raw<uint16_t>(bytes);
    ray.inside = get_raw<uint8_t>(bytes) != 0;
    double o[3], d[3];
    for (double& v : o) v = get_raw<double>(bytes);
    for (double& v : d) v = get_raw<double>(bytes);
    ray.origin = {o[0], o[1], o[2]};
    ray.dir = {d[0], d[1], d[2]};
    for (int j = bands.begin; j < bands.end; ++j) ray.throughput[j] = get_raw<float>(bytes);
    if (ray.kind == RayKind::Shadow) {
        if (bytes.size() < 3 * 8 + 4) throw InvalidData("shadow boundary ray record too short");
        double e[3];
        for (double& v : e) v = get_raw<double>(bytes);
        ray.seg_b = {e[0], e[1], e[2]};
        ray.light_id = get_raw<uint32_t>(bytes);
    }
    return ray;
}

// ---------------------------------------------------------------------------
// Sub-domain tracing

namespace {

struct LocalRay {
    Vec3 origin;
    Vec3 dir;
    double t_min = 0.0;
    Spectrum weight;
    int bounce = 0;
    bool inside = false;
    double interior_dist = 0.0;
    uint32_t hops = 0;
    uint32_t pixel = 0;
    uint16_t group = 0;
};

void add_partial(std::unordered_map<uint32_t, Spectrum>& partials, uint32_t pixel,
                 const Spectrum& value, BandRange bands) {
    Spectrum& acc = partials[pixel];
    for (int j = bands.begin; j < bands.end; ++j) acc[j] += value[j];
}

// Walks one shadow segment as far as this sub-domain can see. Returns
// true when fully resolved here (verdict applied), false when forwarded.
bool shadow_walk_local(const Scene& scene, const PartitionResult& part, int sub_id,
                       const Bvh& local_tree, const Vec3& seg_a, const Vec3& seg_b,
                       double progress, uint32_t hops, const Spectrum& contribution,
                       uint32_t pixel, uint16_t group, uint32_t light_id, BandRange bands,
                       std::unordered_map<uint32_t, Spectrum>& partials,
                       std::vector<BoundaryRay>& outbound, SubTraceCounters& counters) {
    double seg_len = length(seg_b - seg_a);
    double eps = scene.ray_offset();
    double t_end = seg_len - eps;
    if (t_end <= eps) { // degenerate short segment: nothing can occlude it
        add_partial(partials, pixel, contribution, bands);
        ++counters.verdict_visible;
        return true;
    }
    Vec3 dir = normalized(seg_b - seg_a);

    // Parametric span of this sub-domain's box along the original segment.
    bool grazing = false;
    double box_t0 = 0.0, box_t1 = kInfinity;
    const Box3& box = part.subdomains[sub_id].bounds;
    if (!box.ray_range(seg_a, dir, box_t0, box_t1)) {
        // Rounding sliver: the routed segment barely misses this box. Step
        // forward by the routing epsilon so the walk keeps making progress.
        grazing = true;
        box_t1 = progress + part.route_epsilon;
    }

    double t0 = std::max(progress, eps);
    double t1 = std::min(box_t1, t_end);
    if (!grazing && t0 < t1 && local_tree.occluded_range(seg_a, seg_b, t0, t1)) {
        ++counters.verdict_occluded;
        return true; // blocked: contribution dropped
    }
    if (box_t1 >= t_end) {
        add_partial(partials, pixel, contribution, bands);
        ++counters.verdict_visible;
        return true;
    }

    uint32_t next_hops = grazing ? hops + 1 : 0;
    if (next_hops > 64) {
        ++counters.anomalies; // stuck on a corner; drop the pending contribution
        return true;
    }

    // Continue in the next sub-domain along the segment.
    Vec3 exit_point = seg_a + dir * box_t1;
    int dest = part.route(exit_point, dir);
    if (dest < 0) { // leaves the scene bounds: no geometry remains
        add_partial(partials, pixel, contribution, bands);
        ++counters.verdict_visible;
        return true;
    }
    BoundaryRay fwd;
    fwd.kind = RayKind::Shadow;
    fwd.destination = static_cast<uint32_t>(dest);
    fwd.pixel = pixel;
    fwd.group = group;
    fwd.inside = false;
    fwd.origin = exit_point;
    fwd.dir = dir;
    fwd.throughput = contribution;
    fwd.seg_a = seg_a;
    fwd.seg_b = seg_b;
    fwd.seg_progress = box_t1;
    fwd.light_id = light_id;
    fwd.hops = next_hops;
    outbound.push_back(std::move(fwd));
    ++counters.shadow_forwarded;
    return false;
}

} // namespace

void trace_subdomain(const Scene& scene, const PartitionResult& part, int sub_id,
                     const Bvh& local_tree, std::span<const BoundaryRay> inbound, BandRange bands,
                     const DdmShadePolicy& policy,
                     std::unordered_map<uint32_t, Spectrum>& partials,
                     std::vector<BoundaryRay>& outbound, SubTraceCounters& counters) {
    const Box3& box = part.subdomains[sub_id].bounds;
    const double progress_eps = 1e-9 * std::max(scene.diagonal, 1e-30);

    std::vector<LocalRay> stack;
    for (const BoundaryRay& in : inbound) {
        if (static_cast<int>(in.destination) != sub_id)
            throw RoutingError("trace_subdomain: inbound ray destined to sub-domain " +
                               std::to_string(in.destination) + " arrived at " +
                               std::to_string(sub_id));
        ++counters.consumed;

        if (in.kind == RayKind::Shadow) {
            ++counters.shadow_consumed;
            shadow_walk_local(scene, part, sub_id, local_tree, in.seg_a, in.seg_b, in.seg_progress,
                              in.hops, in.throughput, in.pixel, in.group, in.light_id, bands,
                              partials, outbound, counters);
            continue;
        }

        stack.clear();
        LocalRay first;
        first.origin = in.origin;
        first.dir = in.dir;
        first.t_min = in.t_min;
        first.weight = in.throughput;
        first.bounce = in.bounce;
        first.inside = in.inside;
        first.interior_dist = in.interior_dist;
        first.hops = in.hops;
        first.pixel = in.pixel;
        first.group = in.group;
        stack.push_back(std::move(first));

        while (!stack.empty()) {
            LocalRay node = std::move(stack.back());
            stack.pop_back();
            ++counters.local_rays;

            Ray ray;
            ray.origin = node.origin;
            ray.dir = node.dir;
            ray.t_min = node.t_min;
            std::optional<Hit> hit = local_tree.intersect(ray);

            bool owned = hit && part.owner(hit->point) == sub_id;
            if (hit && !owned && node.hops >= 4) {
                // Ownership flip-flopped on a cut plane within rounding noise;
                // claim the hit to guarantee progress (the geometry is
                // duplicated, so the shading is the same either way).
                owned = true;
            }

            if (!owned) {
                // Pass through: advance to the box exit and forward, state
                // preserved bit for bit.
                double t0 = 0.0, t1 = kInfinity;
                if (!box.ray_range(node.origin, node.dir, t0, t1)) {
                    ++counters.anomalies; // numeric sliver: drop the ray
                    continue;
                }
                Vec3 exit_point = node.origin + node.dir * t1;
                int dest = part.route(exit_point, node.dir);
                if (dest < 0) {
                    ++counters.background;
                    continue;
                }
                BoundaryRay fwd;
                fwd.kind = RayKind::Radiance;
                fwd.destination = static_cast<uint32_t>(dest);
                fwd.pixel = node.pixel;
                fwd.group = node.group;
                fwd.bounce = static_cast<uint16_t>(node.bounce);
                fwd.inside = node.inside;
                fwd.origin = exit_point;
                fwd.dir = node.dir;
                fwd.throughput = node.weight;
                fwd.interior_dist = node.interior_dist + (node.inside ? t1 : 0.0);
                // Keep whatever is left of the self-intersection offset, or a
                // fresh child forwarded within its own offset would re-hit the
                // surface it just left in the neighboring sub-domain.
                fwd.t_min = std::max(0.0, node.t_min - t1);
                fwd.hops = t1 < progress_eps ? node.hops + 1 : 0;
                if (fwd.hops > 64) {
                    ++counters.anomalies;
                    continue;
                }
                outbound.push_back(std::move(fwd));
                ++counters.forwarded;
                continue;
            }

            // Owned hit: same shading sequence as the reference tracer.
            hit->subdomain = sub_id;
            ResolvedSurface surf = resolve_surface(scene, *hit);
            Spectrum weight = node.weight;
            if (node.inside && surf.ior != nullptr) {
                Spectrum trans =
                    volume_transmittance(*surf.ior, node.interior_dist + hit->t, bands);
                for (int j = bands.begin; j < bands.end; ++j) weight[j] *= trans[j];
            }

            for (const DirectTerm& term : direct_light_terms(scene, *hit, surf, weight, bands)) {
                ++counters.shadow_started;
                shadow_walk_local(scene, part, sub_id, local_tree, term.seg_a, term.seg_b, 0.0, 0,
                                  term.contribution, node.pixel, node.group,
                                  static_cast<uint32_t>(term.light), bands, partials, outbound,
                                  counters);
            }

            if (policy.maps != nullptr && node.bounce == 0 && surf.diffuse) {
                int k = scene.settings.knn_k;
                double r_max = scene.knn_rmax();
                Spectrum caustic = radiance_estimate(policy.maps->caustic, hit->point, -node.dir,
                                                     surf.rho, k, r_max, bands);
                Spectrum indirect = radiance_estimate(policy.maps->global, hit->point, -node.dir,
                                                      surf.rho, k, r_max, bands);
                caustic += indirect;
                add_partial(partials, node.pixel, caustic, bands);
            }

            if (node.bounce < scene.settings.max_bounces) {
                for (ChildRay& child :
                     specular_children(scene, *hit, surf, node.dir, weight, node.inside, bands)) {
                    LocalRay next;
                    next.origin = child.origin;
                    next.dir = child.dir;
                    next.t_min = scene.ray_offset();
                    next.weight = child.weight;
                    next.bounce = node.bounce + 1;
                    next.inside = child.inside;
                    next.interior_dist = 0.0;
                    next.hops = 0;
                    next.pixel = node.pixel;
                    next.group = node.group;
                    stack.push_back(std::move(next));
                    ++counters.local_children;
                }
            }
            ++counters.terminated; // this ray ends at its owned hit
        }
    }
}

// ---------------------------------------------------------------------------
// Ledger

DdmLedger::DdmLedger(int width, int height, int subdomain_count)
    : fb_(width, height), flushed_(subdomain_count, 0), terminated_(subdomain_count, 0) {}

void DdmLedger::merge_partial(int sub_id, const std::unordered_map<uint32_t, Spectrum>& partial) {
    for (const auto& [pixel, value] : partial) {
        fb_.pixels[pixel] += value;
        fb_.done[pixel] = 1;
    }
    flushed_[sub_id] = 1;
}

void DdmLedger::mark_terminated(int sub_id) { terminated_[sub_id] = 1; }

Framebuffer DdmLedger::finalize() const {
    for (size_t i = 0; i < terminated_.size(); ++i)
        if (terminated_[i] && !flushed_[i])
            throw IncompleteGatherError("sub-domain " + std::to_string(i) +
                                        " terminated without flushing its partials");
    return fb_;
}

// ---------------------------------------------------------------------------
// Scheduler

const char* ddm_event_kind_name(DdmEvent::Kind kind) {
    switch (kind) {
        case DdmEvent::Kind::Load: return "load";
        case DdmEvent::Kind::Unload: return "unload";
        case DdmEvent::Kind::Claim: return "claim";
        case DdmEvent::Kind::Flush: return "flush";
        case DdmEvent::Kind::Gather: return "gather";
        case DdmEvent::Kind::BoundaryEmit: return "boundary_emit";
        case DdmEvent::Kind::BoundaryConsume: return "boundary_consume";
    }
    return "?";
}

void write_event_log_csv(const std::string& path, const std::vector<DdmEvent>& events) {
    std::ofstream out(path);
    if (!out) throw InvalidData("cannot write event log: " + path);
    out << "event_ns,kind,subdomain_id,detail\n";
    for (const auto& e : events) {
        out << e.t_ns << "," << ddm_event_kind_name(e.kind) << "," << e.subdomain << ",";
        if (e.tag[0] != '\0') out << e.tag << ":";
        out << e.value << "\n";
    }
}

namespace {

constexpr size_t kBatchSize = 512;

class DdmEngine {
public:
    DdmEngine(const Scene& scene, const DdmOptions& opt)
        : scene_(scene),
          opt_(opt),
          part_(partition(scene, opt.subdomains)),
          ledger_(scene.camera.width, scene.camera.height, opt.subdomains),
          subs_(opt.subdomains) {
        if (opt.workers < 1) throw InvalidArgument("run_ddm: workers must be >= 1");
        if (opt.memory_budget < 1 || opt.memory_budget > opt.subdomains)
            throw InvalidArgument("run_ddm: memory budget must lie in [1, subdomains]");
        policy_.maps = opt.photon_maps;
    }

    Framebuffer run(DdmReport* report);

private:
    struct SubState {
        std::deque<BoundaryRay> queue;
        std::unordered_map<uint32_t, Spectrum> partials;
        Bvh tree;
        bool resident = false;
        bool busy = false;
        uint64_t initial_primaries = 0;
        SubTraceCounters counters;
    };

    struct GatherTask {
        int sub_id;
        std::unordered_map<uint32_t, Spectrum> partials;
    };

    void event(DdmEvent::Kind kind, int sub, const char* tag = "", uint64_t value = 0) {
        if (!opt_.collect_events) return;
        std::lock_guard<std::mutex> lock(event_mu_);
        events_.push_back({now_ns(), kind, sub, tag, value});
    }

    void boundary_event(DdmEvent::Kind kind, int sub, uint64_t seq) {
        if (!opt_.audit) return;
        event(kind, sub, "", seq);
    }

    // Callers hold mu_.
    void enqueue_locked(BoundaryRay&& ray) {
        ray.seq = next_seq_++;
        int dest = static_cast<int>(ray.destination);
        boundary_event(DdmEvent::Kind::BoundaryEmit, dest, ray.seq);
        subs_[dest].queue.push_back(std::move(ray));
        in_flight_.fetch_add(1, std::memory_order_acq_rel);
    }

    void seed_primaries();
    void load_sub(int sub_id);   // builds the tree; residency already reserved
    void worker_loop(int worker_id);
    void finish_remaining();     // final flush + gather, single-threaded

    const Scene& scene_;
    DdmOptions opt_;
    PartitionResult part_;
    DdmLedger ledger_;
    DdmShadePolicy policy_;

    std::vector<SubState> subs_;
    std::deque<GatherTask> gather_queue_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::mutex ledger_mu_;
    std::mutex event_mu_;

    std::atomic<int64_t> in_flight_{0};
    std::atomic<uint64_t> consumed_total_{0};
    uint64_t next_seq_ = 0;
    int resident_count_ = 0;
    int max_resident_ = 0;
    bool swap_in_progress_ = false;
    bool done_ = false;
    bool failed_ = false;
    std::string failure_;

    std::vector<DdmEvent> events_;
    std::vector<uint64_t> consumed_seqs_;
    std::mutex seq_mu_;
    uint64_t primaries_ = 0;
    std::atomic<uint64_t> loads_{0};
    uint64_t unloads_ = 0;
};

void DdmEngine::seed_primaries() {
    std::lock_guard<std::mutex> lock(mu_);
    for (int y = 0; y < scene_.camera.height; ++y) {
        for (int x = 0; x < scene_.camera.width; ++x) {
            Ray ray = generate_primary_ray(scene_.camera, x, y);
            int dest;
            if (scene_.bounds.contains(ray.origin)) {
                dest = part_.route(ray.origin, ray.dir);
            } else {
                double t0 = 0.0, t1 = kInfinity;
                if (!scene_.bounds.ray_range(ray.origin, ray.dir, t0, t1)) continue; // background
                dest = part_.route(ray.at(t0), ray.dir);
            }
            if (dest < 0) continue;

            // The original camera origin is preserved so a k=1 run performs
            // arithmetic identical to the serial renderer.
            BoundaryRay br;
            br.kind = RayKind::Radiance;
            br.destination = static_cast<uint32_t>(dest);
            br.pixel = ray.pixel;
            br.group = 0;
            br.bounce = 0;
            br.inside = false;
            br.origin = ray.origin;
            br.dir = ray.dir;
            br.throughput = Spectrum::ones();
            br.t_min = 0.0;
            enqueue_locked(std::move(br));
            ++subs_[dest].initial_primaries;
            ++primaries_;
        }
    }
}

void DdmEngine::load_sub(int sub_id) {
    subs_[sub_id].tree = Bvh::build(scene_.triangles, part_.subdomains[sub_id].triangles);
    event(DdmEvent::Kind::Load, sub_id, "",
          static_cast<uint64_t>(part_.subdomains[sub_id].triangles.size()));
    ++loads_;
}

void DdmEngine::worker_loop(int worker_id) {
    (void)worker_id;
    std::unique_lock<std::mutex> lock(mu_);
    uint64_t last_progress_check = consumed_total_.load();
    auto last_progress_time = std::chrono::steady_clock::now();

    while (!done_ && !failed_) {
        // 1) Gather flushed partials while someone else keeps processing (or
        //    when there is nothing else to do).
        bool any_busy = false;
        int claimable = -1;
        size_t claimable_pending = 0;
        for (int i = 0; i < opt_.subdomains; ++i) {
            if (subs_[i].busy) any_busy = true;
            if (subs_[i].resident && !subs_[i].busy && !subs_[i].queue.empty() &&
                subs_[i].queue.size() >= claimable_pending) {
                claimable = i;
                claimable_pending = subs_[i].queue.size();
            }
        }

        if (!gather_queue_.empty() && (any_busy || claimable < 0)) {
            GatherTask task = std::move(gather_queue_.front());
            gather_queue_.pop_front();
            lock.unlock();
            event(DdmEvent::Kind::Gather, task.sub_id, "start", task.partials.size());
            {
                std::lock_guard<std::mutex> ledger_lock(ledger_mu_);
                ledger_.merge_partial(task.sub_id, task.partials);
            }
            event(DdmEvent::Kind::Gather, task.sub_id, "end", task.partials.size());
            lock.lock();
            cv_.notify_all();
            continue;
        }

        // 2) Claim a batch from the fullest resident queue.
        if (claimable >= 0) {
            SubState& sub = subs_[claimable];
            sub.busy = true;
            size_t n = std::min(kBatchSize, sub.queue.size());
            std::vector<BoundaryRay> batch;
            batch.reserve(n);
            for (size_t i = 0; i < n; ++i) {
                batch.push_back(std::move(sub.queue.front()));
                sub.queue.pop_front();
            }
            lock.unlock();

            event(DdmEvent::Kind::Claim, claimable, "start", n);
            std::vector<BoundaryRay> outbound;
            SubTraceCounters local_counters;
            trace_subdomain(scene_, part_, claimable, sub.tree, batch, {}, policy_, sub.partials,
                            outbound, local_counters);
            event(DdmEvent::Kind::Claim, claimable, "end", n);

            if (opt_.audit) {
                std::lock_guard<std::mutex> sl(seq_mu_);
                for (const auto& ray : batch) consumed_seqs_.push_back(ray.seq);
            }
            for (const auto& ray : batch)
                boundary_event(DdmEvent::Kind::BoundaryConsume, claimable, ray.seq);

            lock.lock();
            for (auto& ray : outbound) enqueue_locked(std::move(ray));
            sub.counters += local_counters;
            sub.busy = false;
            in_flight_.fetch_sub(static_cast<int64_t>(n), std::memory_order_acq_rel);
            consumed_total_.fetch_add(n, std::memory_order_relaxed);
            cv_.notify_all();
            continue;
        }

        // 3) Swap: unload a drained resident sub-domain for a starving one.
        if (!swap_in_progress_) {
            int victim = -1, candidate = -1;
            size_t victim_pending = SIZE_MAX, candidate_pending = 0;
            bool all_resident_idle = true;
            for (int i = 0; i < opt_.subdomains; ++i) {
                const SubState& s = subs_[i];
                if (s.resident) {
                    if (s.busy || !s.queue.empty()) all_resident_idle = false;
                    double low = opt_.watermark_low * static_cast<double>(s.initial_primaries);
                    if (!s.busy && static_cast<double>(s.queue.size()) < std::max(1.0, low) &&
                        s.queue.size() < victim_pending) {
                        victim = i;
                        victim_pending = s.queue.size();
                    }
                } else {
                    double high = opt_.watermark_high * static_cast<double>(s.initial_primaries);
                    bool starving = static_cast<double>(s.queue.size()) > high && !s.queue.empty();
                    if (starving && s.queue.size() > candidate_pending) {
                        candidate = i;
                        candidate_pending = s.queue.size();
                    }
                }
            }
            // Forced swap: nothing runnable among residents but rays wait
            // elsewhere. Any non-empty non-resident queue qualifies.
            if (candidate < 0 && all_resident_idle) {
                for (int i = 0; i < opt_.subdomains; ++i)
                    if (!subs_[i].resident && subs_[i].queue.size() > candidate_pending) {
                        candidate = i;
                        candidate_pending = subs_[i].queue.size();
                    }
                if (candidate >= 0 && victim < 0) {
                    for (int i = 0; i < opt_.subdomains; ++i)
                        if (subs_[i].resident && !subs_[i].busy &&
                            subs_[i].queue.size() < victim_pending) {
                            victim = i;
                            victim_pending = subs_[i].queue.size();
                        }
                }
            }

            if (victim >= 0 && candidate >= 0) {
                swap_in_progress_ = true;
                SubState& out = subs_[victim];
                out.resident = false;
                --resident_count_;
                GatherTask flushed{victim, std::move(out.partials)};
                out.partials = {};
                out.tree = Bvh();
                event(DdmEvent::Kind::Flush, victim, "", flushed.partials.size());
                event(DdmEvent::Kind::Unload, victim, "", out.queue.size());
                ++unloads_;
                gather_queue_.push_back(std::move(flushed));

                lock.unlock();
                load_sub(candidate); // tree build happens outside the lock
                lock.lock();
                subs_[candidate].resident = true;
                ++resident_count_;
                max_resident_ = std::max(max_resident_, resident_count_);
                swap_in_progress_ = false;
                cv_.notify_all();
                continue;
            }
        }

        // 4) Termination.
        if (in_flight_.load(std::memory_order_acquire) == 0 && gather_queue_.empty() &&
            !swap_in_progress_ && !any_busy) {
            done_ = true;
            cv_.notify_all();
            break;
        }

        // 5) Nothing to do right now.
        cv_.wait_for(lock, std::chrono::milliseconds(2));

        uint64_t consumed_now = consumed_total_.load();
        auto now = std::chrono::steady_clock::now();
        bool busy_now = false;
        for (int i = 0; i < opt_.subdomains; ++i) busy_now |= subs_[i].busy;
        if (consumed_now != last_progress_check) {
            last_progress_check = consumed_now;
            last_progress_time = now;
        } else if (now - last_progress_time > std::chrono::seconds(10) &&
                   in_flight_.load() > 0 && !busy_now && !swap_in_progress_) {
            std::ostringstream dump;
            dump << "ddm scheduler stalled; queue states:";
            for (int i = 0; i < opt_.subdomains; ++i)
                dump << " sub" << i << (subs_[i].resident ? "[R]" : "[-]") << "="
                     << subs_[i].queue.size();
            dump << " in_flight=" << in_flight_.load();
            failed_ = true;
            failure_ = dump.str();
            cv_.notify_all();
            break;
        }
    }
}

void DdmEngine::finish_remaining() {
    for (int i = 0; i < opt_.subdomains; ++i) {
        SubState& sub = subs_[i];
        event(DdmEvent::Kind::Flush, i, "", sub.partials.size());
        event(DdmEvent::Kind::Gather, i, "start", sub.partials.size());
        ledger_.merge_partial(i, sub.partials);
        event(DdmEvent::Kind::Gather, i, "end", sub.partials.size());
        sub.partials.clear();
        if (sub.resident) {
            event(DdmEvent::Kind::Unload, i, "", 0);
            ++unloads_;
            sub.resident = false;
            --resident_count_;
        }
        ledger_.mark_terminated(i);
    }
    while (!gather_queue_.empty()) {
        GatherTask task = std::move(gather_queue_.front());
        gather_queue_.pop_front();
        event(DdmEvent::Kind::Gather, task.sub_id, "start", task.partials.size());
        ledger_.merge_partial(task.sub_id, task.partials);
        event(DdmEvent::Kind::Gather, task.sub_id, "end", task.partials.size());
    }
}

Framebuffer DdmEngine::run(DdmReport* report) {
    seed_primaries();

    {
        // Initial residency: the budget's worth of fullest queues.
        std::vector<int> order(opt_.subdomains);
        for (int i = 0; i < opt_.subdomains; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (subs_[a].queue.size() != subs_[b].queue.size())
                return subs_[a].queue.size() > subs_[b].queue.size();
            return a < b;
        });
        for (int i = 0; i < opt_.memory_budget; ++i) {
            int sub = order[i];
            load_sub(sub);
            subs_[sub].resident = true;
            ++resident_count_;
        }
        max_resident_ = resident_count_;
    }

    if (opt_.workers == 1) {
        worker_loop(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(opt_.workers);
        for (int w = 0; w < opt_.workers; ++w) threads.emplace_back(&DdmEngine::worker_loop, this, w);
        for (auto& t : threads) t.join();
    }
    if (failed_) throw DeadlockError(failure_);

    finish_remaining();

    if (report) {
        report->events = std::move(events_);
        report->primaries = primaries_;
        report->brays_emitted = next_seq_;
        report->brays_consumed = consumed_total_.load();
        report->consumed_seqs = std::move(consumed_seqs_);
        report->max_resident = max_resident_;
        report->loads = loads_.load();
        report->unloads = unloads_;
        for (const auto& sub : subs_) report->counters += sub.counters;
    }
    return ledger_.finalize();
}

} // namespace

Framebuffer run_ddm(const Scene& scene, const DdmOptions& options, DdmReport* report) {
    DdmEngine engine(scene, options);
    return engine.run(report);
}

} // namespace specray
