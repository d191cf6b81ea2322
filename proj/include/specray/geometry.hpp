// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specray/math.hpp"
#include "specray/spectrum.hpp"

namespace specray {

struct Ray {
    Vec3 origin;
    Vec3 dir; // unit
    double t_min = 0.0;
    double t_max = kInfinity;

    Spectrum throughput = Spectrum::ones();
    int bounce = 0;
    uint32_t pixel = 0;
    uint16_t group = 0;
    bool inside = false;          // refraction parity
    double interior_dist = 0.0;   // chord accumulated inside glass so far

    Vec3 at(double t) const { return origin + dir * t; }
};

struct Hit {
    double t = 0.0;
    Vec3 point;
    Vec3 normal; // geometric, oriented against the ray
    Vec2 uv;
    int material = -1;
    uint32_t triangle = 0; // global triangle index
    int subdomain = -1;
};

struct TriangleMesh {
    std::string name;
    std::vector<Vec3> positions;
    std::vector<Vec2> uvs;
    std::vector<std::array<int, 3>> faces;    // position indices
    std::vector<std::array<int, 3>> face_uvs; // uv indices, -1 when absent
    int material = -1;
};

// Flattened triangle as stored in the scene's global list. DDM sub-domains
// reference these by index, so duplicated straddlers share bit-identical data.
struct Triangle {
    Vec3 a, b, c;
    Vec2 ua, ub, uc;
    int material = -1;

    Box3 bounds() const {
        Box3 box;
        box.grow(a);
        box.grow(b);
        box.grow(c);
        return box;
    }
    Vec3 centroid() const { return (a + b + c) / 3.0; }
};

// Drops degenerate (zero-area) triangles.
std::vector<Triangle> flatten_meshes(const std::vector<TriangleMesh>& meshes);

// Exact triangle/axis-aligned-box overlap (separating axis test).
bool triangle_overlaps_box(const Triangle& tri, const Box3& box);

// Binary bounding-box hierarchy. Median split on the longest centroid-bounds
// axis (ties to the lowest axis index); wholly deterministic for identical
// input. The closest hit is the lexicographic (t, triangle index) minimum, so
// traversal order can never change the answer.
class Bvh {
public:
    Bvh() = default;

    static Bvh build(const std::vector<Triangle>& tris);
    static Bvh build(const std::vector<Triangle>& tris, std::vector<uint32_t> subset);

    std::optional<Hit> intersect(const Ray& ray) const;

    // Any triangle strictly inside the segment shrunk by epsilon at both ends?
    bool occluded(const Vec3& a, const Vec3& b, double epsilon) const;

    // Same test restricted to the parametric range [t0, t1] (meters along the
    // normalized a->b direction); used by the sub-domain shadow walk.
    bool occluded_range(const Vec3& a, const Vec3& b, double t0, double t1) const;

    const Box3& bounds() const { return bounds_; }
    bool empty() const { return nodes_.empty(); }
    size_t triangle_count() const { return prims_.size(); }

private:
    struct Node {
        Box3 box;
        int32_t left = -1;
        int32_t right = -1;
        uint32_t first = 0;
        uint32_t count = 0; // > 0 for leaves

        bool is_leaf() const { return count > 0; }
    };

    int32_t build_node(std::vector<uint32_t>& prims, int begin, int end);

    const std::vector<Triangle>* tris_ = nullptr;
    std::vector<uint32_t> prims_; // global triangle indices, leaf-ordered
    std::vector<Node> nodes_;
    Box3 bounds_;
};

// Ray/triangle test shared by the BVH and the brute-force oracles: Möller-
// Trumbore in double precision; near-parallel rays (|det| below 1e-7 of the
// scale-free bound) report no hit.
std::optional<double> intersect_triangle(const Triangle& tri, const Vec3& origin, const Vec3& dir);

// OBJ subset loader: v, vt, f (convex polygons fan-triangulated), o/g object
// names; vn is parsed and ignored. Throws InvalidData with a line number on
// malformed input.
std::vector<TriangleMesh> load_obj(const std::string& path);
void save_obj(const std::string& path, const std::vector<TriangleMesh>& meshes);

} // namespace specray
