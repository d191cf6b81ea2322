// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "specray/render_global.hpp"
#include "specray/scene.hpp"

namespace specray {

// One geometry partition: axis-aligned bounds, the triangles intersecting it
// (straddlers appear in every sub-domain they overlap), and its interfaces.
struct SubDomain {
    int id = -1;
    Box3 bounds;
    std::vector<uint32_t> triangles; // indices into the scene's global list
    std::vector<int> interfaces;     // indices into PartitionResult::interfaces
};

// Shared face rectangle between two adjacent sub-domain boxes (degenerate in
// exactly one axis).
struct Interface {
    int left_id = -1;
    int right_id = -1;
    Box3 rect;
};

// Recursive median-bisection partition plus the BSP used for point location.
// locate() resolves hit ownership (ties to the lowest id); route() resolves
// where a ray crossing a boundary goes next.
struct PartitionResult {
    struct CutNode {
        int axis = 0;
        double cut = 0.0;
        int32_t left = -1;   // CutNode index
        int32_t right = -1;
        int32_t leaf_id = -1; // >= 0 for leaves
    };

    std::vector<SubDomain> subdomains;
    std::vector<Interface> interfaces;
    std::vector<CutNode> bsp;
    Box3 scene_bounds;
    double route_epsilon = 0.0; // 1e-6 * scene diagonal

    // Containment-checked point location: -1 outside the scene bounds.
    int locate(const Vec3& point) const;

    // Hit ownership: descends on the point clamped into the scene bounds, so
    // hits that land a rounding step outside a hull face still resolve to the
    // adjacent sub-domain. Ties on cut planes go to the lower id.
    int owner(const Vec3& point) const;

    // Sub-domain receiving a ray at `origin` heading along `dir`; -1 when the
    // advanced point leaves the scene bounds (background).
    int route(const Vec3& origin, const Vec3& dir) const;
};

// k must be a power of two; the scene must have triangles. Splits at the
// centroid median along the longest axis (ties x before y before z),
// log2(k) levels deep.
PartitionResult partition(const Scene& scene, int k);

enum class RayKind : uint8_t { Radiance = 0, Shadow = 1, Photon = 2 };

// Serialized ray-continuity state crossing an interface. Shadow segments keep
// their original endpoints so every sub-domain tests the same geometric line;
// `seg_progress` marks how far (meters from seg_a) the walk has advanced.
struct BoundaryRay {
    RayKind kind = RayKind::Radiance;
    uint32_t destination = 0;
    uint32_t pixel = 0;
    uint16_t group = 0;
    uint16_t bounce = 0;
    bool inside = false;
    Vec3 origin;
    Vec3 dir;
    Spectrum throughput; // radiance: path weight; shadow: the pending contribution

    double interior_dist = 0.0; // accumulated glass chord (radiance rays)
    double t_min = 0.0;         // ray-parameter clip for the next local trace
    uint32_t hops = 0;          // consecutive zero-progress forwards

    Vec3 seg_a, seg_b;          // shadow: original segment endpoints
    double seg_progress = 0.0;  // shadow: meters already walked from seg_a
    uint32_t light_id = 0;

    uint64_t seq = 0;           // audit sequence number
};

// Fixed little-endian wire record (for an out-of-process transport): kind u8,
// destination u32, pixel u32, group u16, bounce u16, inside u8, origin 3xf64,
// direction 3xf64, throughput band_count x f32, then for shadow kind segment
// end 3xf64 + light u32.
std::vector<uint8_t> encode_boundary_ray(const BoundaryRay& ray, BandRange bands);
BoundaryRay decode_boundary_ray(std::span<const uint8_t> bytes, BandRange bands);
size_t boundary_ray_wire_size(RayKind kind, int band_count);

struct DdmEvent {
    enum class Kind : uint8_t { Load, Unload, Claim, Flush, Gather, BoundaryEmit, BoundaryConsume };
    uint64_t t_ns = 0;
    Kind kind = Kind::Load;
    int subdomain = -1;
    const char* tag = "";   // "start"/"end" for claim/gather intervals
    uint64_t value = 0;     // batch size, seq number, ...
};

const char* ddm_event_kind_name(DdmEvent::Kind kind);
void write_event_log_csv(const std::string& path, const std::vector<DdmEvent>& events);

// Every local radiance ray ends in exactly one of {terminated, background,
// forwarded, anomaly}; every shadow walk in exactly one of {visible, occluded,
// forwarded, anomaly}. The audits check both balances.
struct SubTraceCounters {
    uint64_t consumed = 0;         // inbound boundary rays processed
    uint64_t shadow_consumed = 0;  // of which shadow segments
    uint64_t local_rays = 0;       // inbound radiance continuations + children
    uint64_t local_children = 0;
    uint64_t terminated = 0;       // rays ending at an owned hit
    uint64_t background = 0;       // rays leaving the scene bounds
    uint64_t forwarded = 0;        // boundary re-emissions (radiance)
    uint64_t shadow_started = 0;   // shadow tests born at owned hits
    uint64_t shadow_forwarded = 0;
    uint64_t verdict_visible = 0;
    uint64_t verdict_occluded = 0;
    uint64_t anomalies = 0;

    SubTraceCounters& operator+=(const SubTraceCounters& o);
};

// nullptr maps = scanline behavior; with maps, caustic + indirect estimates
// are added at owned primary (bounce 0) diffuse hits.
struct DdmShadePolicy {
    const PhotonMaps* maps = nullptr;
};

// Traces one batch of inbound rays against the sub-domain's local geometry
// only. Owned hits shade locally (direct terms become shadow walks; specular
// children continue on a local stack); everything else leaves bit-exact
// boundary rays in `outbound`. Pure apart from its explicit outputs.
void trace_subdomain(const Scene& scene, const PartitionResult& part, int sub_id,
                     const Bvh& local_tree, std::span<const BoundaryRay> inbound, BandRange bands,
                     const DdmShadePolicy& policy,
                     std::unordered_map<uint32_t, Spectrum>& partials,
                     std::vector<BoundaryRay>& outbound, SubTraceCounters& counters);

// Ledger of flushed per-pixel partial spectra. finalize() throws
// IncompleteGatherError if a sub-domain terminated without flushing.
class DdmLedger {
public:
    DdmLedger(int width, int height, int subdomain_count);

    void merge_partial(int sub_id, const std::unordered_map<uint32_t, Spectrum>& partial);
    void mark_terminated(int sub_id);
    Framebuffer finalize() const;

private:
    Framebuffer fb_;
    std::vector<uint8_t> flushed_;
    std::vector<uint8_t> terminated_;
};

struct DdmOptions {
    int subdomains = 1;       // power of two
    int workers = 1;
    int memory_budget = 1;    // max simultaneously resident sub-domains
    double watermark_low = 0.01;  // fraction of a sub-domain's initial primaries
    double watermark_high = 0.10;
    bool audit = false;           // collect per-ray sequence numbers + boundary events
    const PhotonMaps* photon_maps = nullptr;
    bool collect_events = true;
};

struct DdmReport {
    std::vector<DdmEvent> events;
    SubTraceCounters counters;
    uint64_t primaries = 0;
    uint64_t brays_emitted = 0;
    uint64_t brays_consumed = 0;
    std::vector<uint64_t> consumed_seqs; // audit mode only
    int max_resident = 0;
    uint64_t loads = 0, unloads = 0;
};

// The memory-budgeted sub-domain scheduler: primaries are enqueued to their
// origin sub-domains, workers drain resident queues (one worker per resident
// sub-domain at a time), watermark-driven unload/load swaps keep the resident
// set within the budget, and unloaded partials are gathered while processing
// continues. Throws DeadlockError (with a queue-state dump in the message) if
// an epoch passes without progress.
Framebuffer run_ddm(const Scene& scene, const DdmOptions& options, DdmReport* report = nullptr);

} // namespace specray
