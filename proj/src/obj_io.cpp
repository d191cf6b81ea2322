// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "specray/errors.hpp"
#include "specray/geometry.hpp"

namespace specray {

namespace {

// "7", "7/2", "7//3", "7/2/3" -> (position index, uv index), 0-based.
// Negative OBJ indices reference from the end of the current list.
std::pair<int, int> parse_face_corner(const std::string& token, int nverts, int nuvs,
                                      const std::string& path, int lineno) {
    int vi = 0, ti = 0;
    bool has_uv = false;
    size_t slash = token.find('/');
    try {
        vi = std::stoi(token.substr(0, slash));
        if (slash != std::string::npos) {
            size_t slash2 = token.find('/', slash + 1);
            std::string uv = token.substr(slash + 1, slash2 == std::string::npos
                                                         ? std::string::npos
                                                         : slash2 - slash - 1);
            if (!uv.empty()) {
                ti = std::stoi(uv);
                has_uv = true;
            }
        }
    } catch (const std::exception&) {
        throw InvalidData(path + ":" + std::to_string(lineno) + ": bad face index '" + token + "'");
    }
    int v = vi > 0 ? vi - 1 : nverts + vi;
    int t = has_uv ? (ti > 0 ? ti - 1 : nuvs + ti) : -1;
    if (v < 0 || v >= nverts || (has_uv && (t < 0 || t >= nuvs)))
        throw InvalidData(path + ":" + std::to_string(lineno) + ": face index out of range");
    return {v, t};
}

} // namespace

std::vector<TriangleMesh> load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidData("cannot open mesh file: " + path);

    // Positions and uvs are file-global in OBJ; meshes are split on o/g names.
    std::vector<Vec3> positions;
    std::vector<Vec2> uvs;
    std::vector<TriangleMesh> meshes;

    auto current = [&]() -> TriangleMesh& {
        if (meshes.empty()) meshes.push_back({});
        return meshes.back();
    };

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x >> p.y >> p.z))
                throw InvalidData(path + ":" + std::to_string(lineno) + ": bad vertex");
            positions.push_back(p);
        } else if (tag == "vt") {
            Vec2 t;
            if (!(ls >> t.x >> t.y))
                throw InvalidData(path + ":" + std::to_string(lineno) + ": bad uv");
            uvs.push_back(t);
        } else if (tag == "vn") {
            // geometric normals only; skip
        } else if (tag == "o" || tag == "g") {
            std::string name;
            ls >> name;
            if (!meshes.empty() && meshes.back().faces.empty() && meshes.back().name.empty()) {
                meshes.back().name = name;
            } else {
                TriangleMesh mesh;
                mesh.name = name;
                meshes.push_back(std::move(mesh));
            }
        } else if (tag == "f") {
            std::vector<std::pair<int, int>> corners;
            std::string token;
            while (ls >> token)
                corners.push_back(parse_face_corner(token, static_cast<int>(positions.size()),
                                                    static_cast<int>(uvs.size()), path, lineno));
            if (corners.size() < 3)
                throw InvalidData(path + ":" + std::to_string(lineno) + ": face needs >= 3 vertices");
            // Fan triangulation of convex polygons.
            for (size_t i = 1; i + 1 < corners.size(); ++i) {
                current().faces.push_back({corners[0].first, corners[i].first, corners[i + 1].first});
                current().face_uvs.push_back({corners[0].second, corners[i].second, corners[i + 1].second});
            }
        }
        // Unknown tags (mtllib, usemtl, s, ...) are ignored; material binding
        // happens by object name in the scene file.
    }

    // All meshes share the file-global vertex pools.
    for (auto& mesh : meshes) {
        mesh.positions = positions;
        mesh.uvs = uvs;
    }
    // Drop name-only placeholder groups.
    std::erase_if(meshes, [](const TriangleMesh& m) { return m.faces.empty(); });
    return meshes;
}

void save_obj(const std::string& path, const std::vector<TriangleMesh>& meshes) {
    std::ofstream out(path);
    if (!out) throw InvalidData("cannot write mesh file: " + path);
    out.precision(17);
    int vbase = 0, tbase = 0;
    for (const auto& mesh : meshes) {
        out << "o " << (mesh.name.empty() ? "mesh" : mesh.name) << "\n";
        for (const auto& p : mesh.positions) out << "v " << p.x << " " << p.y << " " << p.z << "\n";
        for (const auto& t : mesh.uvs) out << "vt " << t.x << " " << t.y << "\n";
        for (size_t f = 0; f < mesh.faces.size(); ++f) {
            out << "f";
            for (int c = 0; c < 3; ++c) {
                int v = mesh.faces[f][c] + 1 + vbase;
                int t = f < mesh.face_uvs.size() ? mesh.face_uvs[f][c] : -1;
                if (t >= 0)
                    out << " " << v << "/" << t + 1 + tbase;
                else
                    out << " " << v;
            }
            out << "\n";
        }
        vbase += static_cast<int>(mesh.positions.size());
        tbase += static_cast<int>(mesh.uvs.size());
    }
}

} // namespace specray
