// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/photon_map.hpp"

#include <algorithm>
#include <fstream>

#include "specray/errors.hpp"

namespace specray {

PhotonMap PhotonMap::build(std::vector<Photon> photons, uint64_t emitted_count) {
    PhotonMap map;
    map.photons_ = std::move(photons);
    map.emitted_ = emitted_count;
    if (map.photons_.empty()) return map;
    std::vector<uint32_t> order(map.photons_.size());
    for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    map.nodes_.reserve(order.size());
    map.root_ = map.build_node(order, 0, static_cast<int>(order.size()));
    return map;
}

int32_t PhotonMap::build_node(std::vector<uint32_t>& order, int begin, int end) {
    if (begin >= end) return -1;

    Box3 box;
    for (int i = begin; i < end; ++i) box.grow(photons_[order[i]].position);
    int axis = box.longest_axis();

    int mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](uint32_t a, uint32_t b) {
                         double pa = photons_[a].position[axis];
                         double pb = photons_[b].position[axis];
                         if (pa != pb) return pa < pb;
                         return a < b;
                     });

    int32_t index = static_cast<int32_t>(nodes_.size());
    nodes_.push_back({order[mid], static_cast<int8_t>(axis), -1, -1});
    int32_t left = build_node(order, begin, mid);
    int32_t right = build_node(order, mid + 1, end);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

namespace {

struct HeapEntry {
    double d2;
    uint32_t order;

    // max-heap on (d2, order): the lexicographically worst candidate on top
    bool operator<(const HeapEntry& o) const {
        if (d2 != o.d2) return d2 < o.d2;
        return order < o.order;
    }
};

} // namespace

void PhotonMap::knn_query(const Vec3& point, int k, double r_max,
                          std::vector<KnnResult>& out) const {
    out.clear();
    if (k < 1) throw InvalidArgument("knn_query: k must be >= 1");
    if (!(r_max > 0.0)) throw InvalidArgument("knn_query: r_max must be > 0");
    if (root_ < 0) return;

    double rmax2 = r_max * r_max;
    std::vector<HeapEntry> heap; // std::push_heap max-heap
    heap.reserve(static_cast<size_t>(k) + 1);

    auto worst_d2 = [&]() { return heap.front().d2; };

    // Recursive descent, near child first; a subtree is skipped only when the
    // splitting plane is strictly farther than the current worst candidate
    // (equal distances must still be explored: a lower insertion index could
    // hide there).
    auto visit = [&](auto&& self, int32_t node_index) -> void {
        if (node_index < 0) return;
        const Node& node = nodes_[node_index];
        const Photon& ph = photons_[node.photon];

        double d2 = length_squared(ph.position - point);
        if (d2 <= rmax2) {
            HeapEntry cand{d2, node.photon};
            if (static_cast<int>(heap.size()) < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }

        double plane_delta = point[node.axis] - ph.position[node.axis];
        int32_t near = plane_delta <= 0.0 ? node.left : node.right;
        int32_t far = plane_delta <= 0.0 ? node.right : node.left;
        self(self, near);
        double plane_d2 = plane_delta * plane_delta;
        bool full = static_cast<int>(heap.size()) >= k;
        double bound = full ? std::min(worst_d2(), rmax2) : rmax2;
        if (plane_d2 <= bound) self(self, far);
    };
    visit(visit, root_);

    std::sort(heap.begin(), heap.end());
    out.reserve(heap.size());
    for (const HeapEntry& e : heap)
        out.push_back({&photons_[e.order], std::sqrt(e.d2), e.order});
}

Spectrum radiance_estimate(const PhotonMap& map, const Vec3& point, const Vec3& /*wo*/,
                           const Spectrum& rho, int k, double r_max, BandRange bands) {
    std::vector<KnnResult> found;
    map.knn_query(point, k, r_max, found);
    Spectrum out;
    if (found.empty()) return out;
    double r2 = found.back().distance * found.back().distance;
    if (r2 <= 0.0) return out; // all photons exactly at the query point
    double inv_area = 1.0 / (kPi * r2);
    for (const KnnResult& res : found)
        for (int j = bands.begin; j < bands.end; ++j)
            out[j] += rho[j] * kInvPi * res.photon->power[j] * inv_area;
    return out;
}

void write_photon_dump(const std::string& path, const PhotonMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidData("cannot write photon dump: " + path);
    uint64_t header[2] = {map.size(), map.emitted()};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    for (const Photon& p : map.photons()) {
        double rec[6] = {p.position.x, p.position.y, p.position.z,
                         p.incident_dir.x, p.incident_dir.y, p.incident_dir.z};
        out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
        out.write(reinterpret_cast<const char*>(p.power.values().data()),
                  sizeof(double) * kBandCount);
        uint32_t flags = p.specular_path ? 1u : 0u;
        uint32_t pad = 0;
        out.write(reinterpret_cast<const char*>(&flags), sizeof(flags));
        out.write(reinterpret_cast<const char*>(&pad), sizeof(pad));
    }
}

PhotonMap read_photon_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidData("cannot open photon dump: " + path);
    uint64_t header[2];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    std::vector<Photon> photons(header[0]);
    for (Photon& p : photons) {
        double rec[6];
        in.read(reinterpret_cast<char*>(rec), sizeof(rec));
        p.position = {rec[0], rec[1], rec[2]};
        p.incident_dir = {rec[3], rec[4], rec[5]};
        std::array<double, kBandCount> bands;
        in.read(reinterpret_cast<char*>(bands.data()), sizeof(double) * kBandCount);
        for (int j = 0; j < kBandCount; ++j) p.power[j] = bands[j];
        uint32_t flags = 0, pad = 0;
        in.read(reinterpret_cast<char*>(&flags), sizeof(flags));
        in.read(reinterpret_cast<char*>(&pad), sizeof(pad));
        p.specular_path = (flags & 1u) != 0;
    }
    if (!in) throw InvalidData("truncated photon dump: " + path);
    return PhotonMap::build(std::move(photons), header[1]);
}

} // namespace specray
