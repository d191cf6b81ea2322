// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/scene.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "specray/errors.hpp"
#include "specray/image_io.hpp"

namespace specray {

LightSample light_sample(const Light& light, const Vec3& shading_point) {
    if (const auto* point = std::get_if<PointLight>(&light)) {
        Vec3 delta = point->position - shading_point;
        double dist = length(delta);
        if (dist < 1e-9)
            throw GeometryError("light_sample: shading point coincides with a point light");
        LightSample s;
        s.to_light = delta / dist;
        s.factor = point->intensity * (1.0 / (dist * dist));
        s.distance = dist;
        return s;
    }
    const auto& dir = std::get<DirectionalLight>(light);
    LightSample s;
    s.to_light = -dir.direction;
    s.factor = dir.irradiance;
    s.distance = kInfinity;
    return s;
}

void finalize_scene(Scene& scene) {
    // Camera
    if (scene.camera.width <= 0 || scene.camera.height <= 0)
        throw ValidationError("camera: image resolution must be positive");
    if (const auto* pin = std::get_if<PinholeCamera>(&scene.camera.projection)) {
        if (!(pin->vfov_rad > 0.0 && pin->vfov_rad < kPi))
            throw ValidationError("camera: vertical fov must lie in (0, pi)");
    }

    // Materials
    for (auto& mat : scene.materials) {
        if (!(mat.diffuse || mat.specular_reflect || mat.specular_transmit))
            throw ValidationError("material '" + mat.name + "': at least one behavior flag required");
        if (!mat.diffuse_reflectance.all_in_unit_interval())
            throw ValidationError("material '" + mat.name + "': diffuse reflectance must lie in [0, 1]");
        if ((mat.specular_reflect || mat.specular_transmit) && !mat.ior)
            throw ValidationError("material '" + mat.name + "': specular behavior requires optical constants");
        if (mat.ior) {
            for (int j = 0; j < kBandCount; ++j) {
                if (!(mat.ior->n[j] > 0.0) || !std::isfinite(mat.ior->n[j]))
                    throw ValidationError("material '" + mat.name + "': n must be positive and finite");
                if (!(mat.ior->k[j] >= 0.0) || !std::isfinite(mat.ior->k[j]))
                    throw ValidationError("material '" + mat.name + "': k must be >= 0 and finite");
            }
        }
        if (!(mat.thickness_m >= 0.0) || !std::isfinite(mat.thickness_m))
            throw ValidationError("material '" + mat.name + "': thickness must be finite and >= 0");
        if (mat.map) {
            if (mat.map_palette.empty())
                throw ValidationError("material '" + mat.name + "': distribution map needs a palette");
            for (int id : mat.map_palette) {
                if (id < 0 || id >= static_cast<int>(scene.materials.size()))
                    throw ValidationError("material '" + mat.name + "': palette entry out of range");
                const Material& target = scene.materials[id];
                if (target.map)
                    throw ValidationError("material '" + mat.name +
                                          "': palette entries may not carry maps themselves");
            }
            for (const auto& texel : mat.map->texels) {
                if (texel.material_index < 0 ||
                    texel.material_index >= static_cast<int>(mat.map_palette.size()))
                    throw ValidationError("material '" + mat.name +
                                          "': map texel references a material index outside the palette");
                if (!(texel.thickness_m >= 0.0) || !std::isfinite(texel.thickness_m))
                    throw ValidationError("material '" + mat.name + "': map thickness must be >= 0");
            }
        }
    }

    // Lights
    if (scene.lights.empty() && scene.settings.photon_count > 0) {
        // permitted: scanline scenes may be lightless (black render)
    }
    for (auto& light : scene.lights) {
        if (auto* point = std::get_if<PointLight>(&light)) {
            if (!point->intensity.all_finite() || !point->intensity.all_nonnegative())
                throw ValidationError("point light: intensity must be finite and >= 0");
        } else {
            auto& dir = std::get<DirectionalLight>(light);
            if (!dir.irradiance.all_finite() || !dir.irradiance.all_nonnegative())
                throw ValidationError("directional light: irradiance must be finite and >= 0");
            double len = length(dir.direction);
            if (len < 1e-12)
                throw ValidationError("directional light: direction must be non-zero");
            dir.direction = dir.direction / len;
        }
    }

    // Settings
    const RenderSettings& s = scene.settings;
    if (s.max_bounces < 0) throw ValidationError("render.max_bounces must be >= 0");
    if (!(s.throughput_threshold > 0.0)) throw ValidationError("render.throughput_threshold must be > 0");
    if (s.spectral_group_size < 1 || s.spectral_group_size > kBandCount)
        throw ValidationError("render.spectral_group_size must lie in [1, 81]");
    if (s.photon_count < 0) throw ValidationError("render.photons must be >= 0");
    if (s.knn_k < 1) throw ValidationError("render.knn_k must be >= 1");
    if (!(s.knn_rmax_frac > 0.0)) throw ValidationError("render.knn_rmax_frac must be > 0");
    if (!(s.ray_offset_frac > 0.0)) throw ValidationError("render.ray_offset_frac must be > 0");

    // Geometry
    for (const auto& mesh : scene.meshes) {
        for (const auto& face : mesh.faces)
            for (int c : face)
                if (c < 0 || c >= static_cast<int>(mesh.positions.size()))
                    throw ValidationError("mesh '" + mesh.name + "': face index out of range");
        if (mesh.material < 0 || mesh.material >= static_cast<int>(scene.materials.size()))
            throw ValidationError("mesh '" + mesh.name + "': unresolved material binding");
    }

    scene.triangles = flatten_meshes(scene.meshes);
    scene.accel = Bvh::build(scene.triangles);
    scene.bounds = Box3{};
    for (const auto& tri : scene.triangles) scene.bounds.grow(tri.bounds());
    scene.diagonal = scene.bounds.diagonal();
}

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void rethrow_parse_error(const nlohmann::json::parse_error& e, const std::string& text) {
    // nlohmann reports a byte offset; convert to 1-based line/column.
    size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    int line = 1, col = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') { ++line; col = 1; }
        else ++col;
    }
    std::ostringstream msg;
    msg << "scene parse error at line " << line << ", column " << col << ": " << e.what();
    throw ParseError(msg.str(), line, col);
}

void require_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ValidationError(where + ": unknown key '" + key + "'");
}

Vec3 parse_vec3(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.size() != 3)
        throw ValidationError(where + ": expected an array of 3 numbers");
    return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
}

struct SceneLoader {
    fs::path base_dir;
    std::map<std::string, Spectrum> spectra;

    Spectrum spectrum_ref(const json& v, const std::string& where) const {
        if (v.is_number()) return Spectrum(v.get<double>());
        if (v.is_string()) {
            auto it = spectra.find(v.get<std::string>());
            if (it == spectra.end())
                throw ValidationError(where + ": reference to undeclared spectrum '" +
                                      v.get<std::string>() + "'");
            return it->second;
        }
        throw ValidationError(where + ": expected a spectrum name or a constant");
    }

    std::string resolve(const std::string& rel) const { return (base_dir / rel).string(); }
};

DistributionMap load_distribution_map(const SceneLoader& ld, const json& spec,
                                      const std::string& where, std::vector<std::string>& palette_names,
                                      double& thickness_scale) {
    require_keys(spec, where, {"material_index", "thickness", "thickness_scale_m", "palette"});
    if (!spec.contains("material_index") || !spec.contains("palette"))
        throw ValidationError(where + ": map needs 'material_index' and 'palette'");
    GrayImage index_img = read_png_gray(ld.resolve(spec["material_index"].get<std::string>()));
    GrayImage thickness_img;
    bool has_thickness = spec.contains("thickness");
    if (has_thickness) {
        thickness_img = read_png_gray(ld.resolve(spec["thickness"].get<std::string>()));
        if (thickness_img.width != index_img.width || thickness_img.height != index_img.height)
            throw ValidationError(where + ": thickness map size differs from the material-index map");
    }
    thickness_scale = spec.value("thickness_scale_m", 0.0);
    for (const auto& name : spec["palette"]) palette_names.push_back(name.get<std::string>());

    DistributionMap map;
    map.width = index_img.width;
    map.height = index_img.height;
    map.has_thickness = has_thickness;
    map.texels.resize(static_cast<size_t>(map.width) * map.height);
    for (size_t i = 0; i < map.texels.size(); ++i) {
        map.texels[i].material_index = index_img.pixels[i];
        map.texels[i].thickness_m = has_thickness ? thickness_img.pixels[i] * thickness_scale : 0.0;
    }
    return map;
}

} // namespace

Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidData("cannot open scene file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    json root;
    try {
        root = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        rethrow_parse_error(e, text);
    }

    SceneLoader ld;
    ld.base_dir = fs::path(path).parent_path();

    Scene scene;
    require_keys(root, "scene", {"camera", "lights", "materials", "spectra", "objects", "render"});

    // spectra {} : name -> file path or constant
    if (root.contains("spectra")) {
        for (const auto& [name, value] : root["spectra"].items()) {
            if (value.is_string())
                ld.spectra[name] = load_spectrum_file(ld.resolve(value.get<std::string>()));
            else if (value.is_number())
                ld.spectra[name] = Spectrum(value.get<double>());
            else
                throw ValidationError("spectra." + name + ": expected a file path or a constant");
        }
    }

    // materials {}
    struct PendingMap {
        int material;
        json spec;
    };
    std::vector<PendingMap> pending_maps;
    if (root.contains("materials")) {
        for (const auto& [name, m] : root["materials"].items()) {
            const std::string where = "materials." + name;
            require_keys(m, where,
                         {"diffuse", "n", "k", "specular_reflect", "specular_transmit", "thin",
                          "thickness_m", "map"});
            Material mat;
            mat.name = name;
            if (m.contains("diffuse")) {
                mat.diffuse = true;
                mat.diffuse_reflectance = ld.spectrum_ref(m["diffuse"], where + ".diffuse");
            }
            mat.specular_reflect = m.value("specular_reflect", false);
            mat.specular_transmit = m.value("specular_transmit", false);
            mat.thin = m.value("thin", false);
            mat.thickness_m = m.value("thickness_m", 0.0);
            if (m.contains("n") != m.contains("k"))
                throw ValidationError(where + ": optical constants need both 'n' and 'k'");
            if (m.contains("n")) {
                ComplexIor ior;
                ior.n = ld.spectrum_ref(m["n"], where + ".n");
                ior.k = ld.spectrum_ref(m["k"], where + ".k");
                mat.ior = ior;
            }
            if (m.contains("map"))
                pending_maps.push_back({static_cast<int>(scene.materials.size()), m["map"]});
            scene.material_ids[name] = static_cast<int>(scene.materials.size());
            scene.materials.push_back(std::move(mat));
        }
    }
    // Maps resolve after all materials exist so palettes may reference any of them.
    for (const auto& pending : pending_maps) {
        Material& mat = scene.materials[pending.material];
        const std::string where = "materials." + mat.name + ".map";
        std::vector<std::string> palette_names;
        double scale = 0.0;
        auto map = std::make_shared<DistributionMap>(
            load_distribution_map(ld, pending.spec, where, palette_names, scale));
        for (const auto& pname : palette_names) {
            auto it = scene.material_ids.find(pname);
            if (it == scene.material_ids.end())
                throw ValidationError(where + ": reference to undeclared material '" + pname + "'");
            mat.map_palette.push_back(it->second);
        }
        mat.map = std::move(map);
    }

    // lights []
    if (root.contains("lights")) {
        for (size_t i = 0; i < root["lights"].size(); ++i) {
            const json& l = root["lights"][i];
            const std::string where = "lights[" + std::to_string(i) + "]";
            std::string type = l.value("type", "");
            if (type == "point") {
                require_keys(l, where, {"type", "position", "intensity"});
                PointLight light;
                light.position = parse_vec3(l.at("position"), where + ".position");
                light.intensity = ld.spectrum_ref(l.at("intensity"), where + ".intensity");
                scene.lights.push_back(light);
            } else if (type == "directional") {
                require_keys(l, where, {"type", "direction", "irradiance"});
                DirectionalLight light;
                light.direction = parse_vec3(l.at("direction"), where + ".direction");
                light.irradiance = ld.spectrum_ref(l.at("irradiance"), where + ".irradiance");
                scene.lights.push_back(light);
            } else {
                throw ValidationError(where + ": light type must be 'point' or 'directional'");
            }
        }
    }

    // camera {}
    if (!root.contains("camera")) throw ValidationError("scene: missing 'camera'");
    {
        const json& c = root["camera"];
        std::string type = c.value("type", "");
        if (type == "orthographic") {
            require_keys(c, "camera",
                         {"type", "center", "view_dir", "up", "width_m", "height_m", "image"});
            OrthographicCamera cam;
            cam.center = parse_vec3(c.at("center"), "camera.center");
            cam.view_dir = normalized(parse_vec3(c.at("view_dir"), "camera.view_dir"));
            if (c.contains("up")) cam.up = parse_vec3(c["up"], "camera.up");
            cam.width_m = c.at("width_m").get<double>();
            cam.height_m = c.at("height_m").get<double>();
            scene.camera.projection = cam;
        } else if (type == "pinhole") {
            require_keys(c, "camera", {"type", "position", "look_at", "up", "vfov_deg", "image"});
            PinholeCamera cam;
            cam.position = parse_vec3(c.at("position"), "camera.position");
            cam.look_at = parse_vec3(c.at("look_at"), "camera.look_at");
            if (c.contains("up")) cam.up = parse_vec3(c["up"], "camera.up");
            cam.vfov_rad = c.at("vfov_deg").get<double>() * kPi / 180.0;
            scene.camera.projection = cam;
        } else {
            throw ValidationError("camera: type must be 'orthographic' or 'pinhole'");
        }
        const json& img = c.at("image");
        if (!img.is_array() || img.size() != 2)
            throw ValidationError("camera.image: expected [width, height]");
        scene.camera.width = img[0].get<int>();
        scene.camera.height = img[1].get<int>();
    }

    // objects []
    if (root.contains("objects")) {
        for (size_t i = 0; i < root["objects"].size(); ++i) {
            const json& o = root["objects"][i];
            const std::string where = "objects[" + std::to_string(i) + "]";
            require_keys(o, where, {"mesh", "material", "object"});
            auto mat_it = scene.material_ids.find(o.at("material").get<std::string>());
            if (mat_it == scene.material_ids.end())
                throw ValidationError(where + ": reference to undeclared material '" +
                                      o.at("material").get<std::string>() + "'");
            auto loaded = load_obj(ld.resolve(o.at("mesh").get<std::string>()));
            std::string filter = o.value("object", "");
            bool any = false;
            for (auto& mesh : loaded) {
                if (!filter.empty() && mesh.name != filter) continue;
                mesh.material = mat_it->second;
                scene.meshes.push_back(std::move(mesh));
                any = true;
            }
            if (!any)
                throw ValidationError(where + ": mesh file contains no object named '" + filter + "'");
        }
    }

    // render {}
    if (root.contains("render")) {
        const json& r = root["render"];
        require_keys(r, "render",
                     {"max_bounces", "throughput_threshold", "spectral_group_size", "photons",
                      "knn_k", "knn_rmax_frac", "seed", "ray_offset_frac"});
        RenderSettings& s = scene.settings;
        s.max_bounces = r.value("max_bounces", s.max_bounces);
        s.throughput_threshold = r.value("throughput_threshold", s.throughput_threshold);
        s.spectral_group_size = r.value("spectral_group_size", s.spectral_group_size);
        s.photon_count = r.value("photons", s.photon_count);
        s.knn_k = r.value("knn_k", s.knn_k);
        s.knn_rmax_frac = r.value("knn_rmax_frac", s.knn_rmax_frac);
        s.seed = r.value("seed", s.seed);
        s.ray_offset_frac = r.value("ray_offset_frac", s.ray_offset_frac);
    }

    finalize_scene(scene);
    return scene;
}

void save_scene_json(const std::string& path, const std::string& json_text) {
    std::ofstream out(path);
    if (!out) throw InvalidData("cannot write scene file: " + path);
    out << json_text;
}

} // namespace specray
