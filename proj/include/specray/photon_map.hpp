// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specray/math.hpp"
#include "specray/spectrum.hpp"

namespace specray {

struct Photon {
    Vec3 position;
    Vec3 incident_dir;        // direction of travel at the hit
    Spectrum power;           // W nm^-1 carried by this photon
    bool specular_path = false; // at least one specular bounce before this store
};

struct KnnResult {
    const Photon* photon = nullptr;
    double distance = 0.0;
    uint32_t order = 0; // insertion index, the tie-breaker
};

// Balanced kd-tree over photon positions. Queries are exact: the k nearest
// photons within r_max under the total order (distance, insertion index), so
// results never depend on tree layout and match a linear scan bit for bit.
class PhotonMap {
public:
    PhotonMap() = default;

    static PhotonMap build(std::vector<Photon> photons, uint64_t emitted_count);

    size_t size() const { return photons_.size(); }
    uint64_t emitted() const { return emitted_; }
    const std::vector<Photon>& photons() const { return photons_; }

    void knn_query(const Vec3& point, int k, double r_max, std::vector<KnnResult>& out) const;

private:
    struct Node {
        uint32_t photon = 0;
        int8_t axis = 0;
        int32_t left = -1;
        int32_t right = -1;
    };

    int32_t build_node(std::vector<uint32_t>& order, int begin, int end);

    std::vector<Photon> photons_; // insertion order
    std::vector<Node> nodes_;
    int32_t root_ = -1;
    uint64_t emitted_ = 0;
};

// Jensen density estimate at a Lambertian surface: sum of rho/pi * power over
// the k nearest photons divided by pi r^2, r the distance to the farthest
// returned photon. Zero when the ball is empty.
Spectrum radiance_estimate(const PhotonMap& map, const Vec3& point, const Vec3& wo,
                           const Spectrum& rho, int k, double r_max, BandRange bands = {});

// Binary dump: header {u64 count, u64 emitted}, then fixed-width records
// {3 f64 position, 3 f64 direction, 81 f64 power, u32 flags, u32 pad},
// little-endian; used to compare photon populations across runs.
void write_photon_dump(const std::string& path, const PhotonMap& map);
PhotonMap read_photon_dump(const std::string& path);

} // namespace specray
