// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "specray/errors.hpp"

namespace specray {

std::vector<Triangle> flatten_meshes(const std::vector<TriangleMesh>& meshes) {
    std::vector<Triangle> out;
    for (const auto& mesh : meshes) {
        for (size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto& face = mesh.faces[f];
            Triangle tri;
            tri.a = mesh.positions[face[0]];
            tri.b = mesh.positions[face[1]];
            tri.c = mesh.positions[face[2]];
            tri.material = mesh.material;
            if (f < mesh.face_uvs.size()) {
                const auto& tuv = mesh.face_uvs[f];
                if (tuv[0] >= 0) tri.ua = mesh.uvs[tuv[0]];
                if (tuv[1] >= 0) tri.ub = mesh.uvs[tuv[1]];
                if (tuv[2] >= 0) tri.uc = mesh.uvs[tuv[2]];
            }
            if (length_squared(cross(tri.b - tri.a, tri.c - tri.a)) == 0.0)
                continue; // degenerate
            out.push_back(tri);
        }
    }
    return out;
}

std::optional<double> intersect_triangle(const Triangle& tri, const Vec3& origin, const Vec3& dir) {
    Vec3 e1 = tri.b - tri.a;
    Vec3 e2 = tri.c - tri.a;
    Vec3 pvec = cross(dir, e2);
    double det = dot(e1, pvec);
    // Scale-free parallelism cutoff: |det| <= |e1||pvec| always.
    double limit = 1e-7 * length(e1) * length(pvec);
    if (std::abs(det) <= limit) return std::nullopt;
    double inv_det = 1.0 / det;
    Vec3 tvec = origin - tri.a;
    double u = dot(tvec, pvec) * inv_det;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    Vec3 qvec = cross(tvec, e1);
    double v = dot(dir, qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    return dot(e2, qvec) * inv_det;
}

namespace {

Hit make_hit(const std::vector<Triangle>& tris, uint32_t index, const Vec3& origin,
             const Vec3& dir, double t) {
    const Triangle& tri = tris[index];
    Vec3 e1 = tri.b - tri.a;
    Vec3 e2 = tri.c - tri.a;
    Vec3 n = normalized(cross(e1, e2));
    if (dot(n, dir) > 0.0) n = -n;

    // Barycentric uv for texture addressing.
    Vec3 p = origin + dir * t;
    Vec3 pvec = cross(dir, e2);
    double inv_det = 1.0 / dot(e1, pvec);
    Vec3 tvec = origin - tri.a;
    double u = dot(tvec, pvec) * inv_det;
    double v = dot(dir, cross(tvec, e1)) * inv_det;

    Hit hit;
    hit.t = t;
    hit.point = p;
    hit.normal = n;
    hit.uv = {tri.ua.x + u * (tri.ub.x - tri.ua.x) + v * (tri.uc.x - tri.ua.x),
              tri.ua.y + u * (tri.ub.y - tri.ua.y) + v * (tri.uc.y - tri.ua.y)};
    hit.material = tri.material;
    hit.triangle = index;
    return hit;
}

} // namespace

bool triangle_overlaps_box(const Triangle& tri, const Box3& box) {
    Vec3 c = box.center();
    Vec3 h = box.extent() * 0.5;
    Vec3 v0 = tri.a - c, v1 = tri.b - c, v2 = tri.c - c;
    Vec3 e0 = v1 - v0, e1 = v2 - v1, e2 = v0 - v2;

    auto axis_test = [&](const Vec3& axis) {
        double p0 = dot(v0, axis), p1 = dot(v1, axis), p2 = dot(v2, axis);
        double lo = std::min({p0, p1, p2});
        double hi = std::max({p0, p1, p2});
        double r = h.x * std::abs(axis.x) + h.y * std::abs(axis.y) + h.z * std::abs(axis.z);
        return !(lo > r || hi < -r);
    };

    // Box face normals.
    if (std::min({v0.x, v1.x, v2.x}) > h.x || std::max({v0.x, v1.x, v2.x}) < -h.x) return false;
    if (std::min({v0.y, v1.y, v2.y}) > h.y || std::max({v0.y, v1.y, v2.y}) < -h.y) return false;
    if (std::min({v0.z, v1.z, v2.z}) > h.z || std::max({v0.z, v1.z, v2.z}) < -h.z) return false;
    // Triangle normal.
    if (!axis_test(cross(e0, e1))) return false;
    // Nine edge cross products.
    const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const Vec3& a : axes)
        for (const Vec3& e : {e0, e1, e2})
            if (!axis_test(cross(a, e))) return false;
    return true;
}

Bvh Bvh::build(const std::vector<Triangle>& tris) {
    std::vector<uint32_t> all(tris.size());
    for (uint32_t i = 0; i < tris.size(); ++i) all[i] = i;
    return build(tris, std::move(all));
}

Bvh Bvh::build(const std::vector<Triangle>& tris, std::vector<uint32_t> subset) {
    Bvh bvh;
    bvh.tris_ = &tris;
    bvh.prims_ = std::move(subset);
    if (bvh.prims_.empty()) return bvh; // empty tree: every query misses
    bvh.nodes_.reserve(bvh.prims_.size() * 2);
    bvh.build_node(bvh.prims_, 0, static_cast<int>(bvh.prims_.size()));
    bvh.bounds_ = bvh.nodes_[0].box;
    return bvh;
}

int32_t Bvh::build_node(std::vector<uint32_t>& prims, int begin, int end) {
    constexpr int kLeafSize = 4;
    int32_t index = static_cast<int32_t>(nodes_.size());
    nodes_.emplace_back();

    Box3 box;
    Box3 centroid_box;
    for (int i = begin; i < end; ++i) {
        box.grow((*tris_)[prims[i]].bounds());
        centroid_box.grow((*tris_)[prims[i]].centroid());
    }
    nodes_[index].box = box;

    int count = end - begin;
    Vec3 spread = centroid_box.extent();
    bool splittable = spread.x > 0.0 || spread.y > 0.0 || spread.z > 0.0;
    if (count <= kLeafSize || !splittable) {
        nodes_[index].first = static_cast<uint32_t>(begin);
        nodes_[index].count = static_cast<uint32_t>(count);
        return index;
    }

    int axis = centroid_box.longest_axis();
    int mid = begin + count / 2;
    std::nth_element(prims.begin() + begin, prims.begin() + mid, prims.begin() + end,
                     [&](uint32_t lhs, uint32_t rhs) {
                         double cl = (*tris_)[lhs].centroid()[axis];
                         double cr = (*tris_)[rhs].centroid()[axis];
                         if (cl != cr) return cl < cr;
                         return lhs < rhs;
                     });

    int32_t left = build_node(prims, begin, mid);
    int32_t right = build_node(prims, mid, end);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

std::optional<Hit> Bvh::intersect(const Ray& ray) const {
    if (nodes_.empty()) return std::nullopt;

    double best_t = ray.t_max;
    uint32_t best_tri = 0;
    bool found = false;

    int32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        double t0 = ray.t_min, t1 = best_t;
        if (!node.box.ray_range(ray.origin, ray.dir, t0, t1)) continue;
        if (node.is_leaf()) {
            for (uint32_t i = 0; i < node.count; ++i) {
                uint32_t tri = prims_[node.first + i];
                auto t = intersect_triangle((*tris_)[tri], ray.origin, ray.dir);
                if (!t || *t < ray.t_min || *t > ray.t_max) continue;
                // Lexicographic (t, index) minimum keeps the answer independent
                // of traversal order.
                if (!found || *t < best_t || (*t == best_t && tri < best_tri)) {
                    best_t = *t;
                    best_tri = tri;
                    found = true;
                }
            }
        } else {
            stack[sp++] = node.left;
            stack[sp++] = node.right;
        }
    }

    if (!found) return std::nullopt;
    return make_hit(*tris_, best_tri, ray.origin, ray.dir, best_t);
}

bool Bvh::occluded(const Vec3& a, const Vec3& b, double epsilon) const {
    double len = length(b - a);
    return occluded_range(a, b, epsilon, len - epsilon);
}

bool Bvh::occluded_range(const Vec3& a, const Vec3& b, double t0, double t1) const {
    if (nodes_.empty() || t0 >= t1) return false;
    Vec3 dir = normalized(b - a);

    int32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        double n0 = t0, n1 = t1;
        if (!node.box.ray_range(a, dir, n0, n1)) continue;
        if (node.is_leaf()) {
            for (uint32_t i = 0; i < node.count; ++i) {
                auto t = intersect_triangle((*tris_)[prims_[node.first + i]], a, dir);
                if (t && *t >= t0 && *t <= t1) return true;
            }
        } else {
            stack[sp++] = node.left;
            stack[sp++] = node.right;
        }
    }
    return false;
}

} // namespace specray
