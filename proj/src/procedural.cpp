// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/procedural.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <map>

#include "specray/errors.hpp"
#include "specray/image_io.hpp"

namespace specray {

namespace {

// CIE D65 relative SPD, 380-780 nm at 10 nm (values / 100 give usable
// radiometric scale for the demo lights).
const double kD65[41] = {49.9755, 54.6482, 82.7549, 91.486,  93.4318, 86.6823, 104.865, 117.008,
                         117.812, 114.861, 115.923, 108.811, 109.354, 107.802, 104.79,  107.689,
                         104.405, 104.046, 100.0,   96.3342, 95.788,  88.6856, 90.0062, 89.5991,
                         87.6987, 83.2886, 83.6992, 80.0268, 80.1207, 82.2778, 78.2842, 69.7213,
                         71.6091, 74.349,  61.604,  69.8856, 75.087,  63.5927, 46.4182, 66.8054,
                         63.3828};

std::vector<std::pair<double, double>> d65_samples(double scale) {
    std::vector<std::pair<double, double>> samples;
    for (int i = 0; i < 41; ++i) samples.push_back({380.0 + 10.0 * i, kD65[i] * scale});
    return samples;
}

std::vector<std::pair<double, double>> grid_samples(const Spectrum& s) {
    std::vector<std::pair<double, double>> samples;
    for (int j = 0; j < kBandCount; ++j) samples.push_back({band_wavelength_nm(j), s[j]});
    return samples;
}

double smoothstep(double e0, double e1, double x) {
    double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Crown-glass-like Cauchy dispersion.
Spectrum cauchy_index(double a, double b_nm2) {
    Spectrum n;
    for (int j = 0; j < kBandCount; ++j) {
        double l = band_wavelength_nm(j);
        n[j] = a + b_nm2 / (l * l);
    }
    return n;
}

// Absorption curves shaping the glass tints (k rises where the tint absorbs).
Spectrum tint_absorption(int variant) {
    Spectrum k;
    for (int j = 0; j < kBandCount; ++j) {
        double l = band_wavelength_nm(j);
        switch (variant) {
            case 0: k[j] = 2e-6; break; // clear
            case 1: k[j] = 2e-6 + 2.6e-5 * smoothstep(480.0, 680.0, l); break;          // blue
            case 2: k[j] = 2e-6 + 2.2e-5 * (smoothstep(560.0, 700.0, l) +
                                            smoothstep(505.0, 420.0, l)); break;         // green
            case 3: k[j] = 2e-6 + 2.8e-5 * smoothstep(560.0, 430.0, l); break;           // amber
            default: k[j] = 2e-6; break;
        }
    }
    return k;
}

Spectrum band_ramp(double v380, double v780) {
    std::pair<double, double> ends[2] = {{380.0, v380}, {780.0, v780}};
    return resample_tabulated(ends);
}

constexpr double kSunScale = 2.2;
constexpr double kSkyScale = 1.3;

Spectrum gauss_band(double base, double peak, double center, double width) {
    Spectrum s;
    for (int j = 0; j < kBandCount; ++j) {
        double l = band_wavelength_nm(j);
        double g = std::exp(-0.5 * ((l - center) / width) * ((l - center) / width));
        s[j] = std::clamp(base + peak * g, 0.0, 1.0);
    }
    return s;
}

struct MeshBuilder {
    TriangleMesh mesh;

    int vertex(const Vec3& p) {
        mesh.positions.push_back(p);
        return static_cast<int>(mesh.positions.size()) - 1;
    }
    int uv(double u, double v) {
        mesh.uvs.push_back({u, v});
        return static_cast<int>(mesh.uvs.size()) - 1;
    }

    // Quad (a, b, c, d) counter-clockwise, optional uv rectangle.
    void quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, double u0 = 0,
              double v0 = 0, double u1 = 1, double v1 = 1) {
        int ia = vertex(a), ib = vertex(b), ic = vertex(c), id = vertex(d);
        int ta = uv(u0, v0), tb = uv(u1, v0), tc = uv(u1, v1), td = uv(u0, v1);
        mesh.faces.push_back({ia, ib, ic});
        mesh.face_uvs.push_back({ta, tb, tc});
        mesh.faces.push_back({ia, ic, id});
        mesh.face_uvs.push_back({ta, tc, td});
    }

    // Axis-aligned rectangle subdivided n x n, lying on the plane spanned by
    // (edge_u, edge_v) from `origin`.
    void grid(const Vec3& origin, const Vec3& edge_u, const Vec3& edge_v, int n) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s0 = static_cast<double>(i) / n, s1 = static_cast<double>(i + 1) / n;
                double t0 = static_cast<double>(j) / n, t1 = static_cast<double>(j + 1) / n;
                quad(origin + edge_u * s0 + edge_v * t0, origin + edge_u * s1 + edge_v * t0,
                     origin + edge_u * s1 + edge_v * t1, origin + edge_u * s0 + edge_v * t1);
            }
    }
};

} // namespace

// ---------------------------------------------------------------------------
// Nave

namespace {

struct NaveLayout {
    // Corridor: x in [0, len], y in [0, height], z in [-half_w, half_w].
    double len = 12.0, height = 4.0, half_w = 2.0;
    int windows_x = 6, windows_y = 2; // per side wall
    int wall_subdiv = 2;
    int map_w = 0, map_h = 0; // windows_x x (2 * windows_y), both walls share the map

    explicit NaveLayout(const NaveParams& params) {
        // Triangle budget: 4 full-face grids (floor, ceiling, end walls) plus
        // one grid per stone wall cell, 2n^2 triangles each, plus 2 per window.
        int target = std::max(params.target_triangles, 100);
        int windows = windows_x * windows_y * 2;
        int cells_per_side = (windows_x * 2 + 1) * (windows_y * 2 + 1);
        int grids = 4 + 2 * (cells_per_side - windows_x * windows_y);
        wall_subdiv = std::max(
            1, static_cast<int>(std::lround(std::sqrt((target - 2.0 * windows) / (2.0 * grids)))));
        map_w = windows_x;
        map_h = windows_y * 2;
    }
};

DistributionMap make_nave_map(const NaveLayout& lay, int variants) {
    DistributionMap map;
    map.width = lay.map_w;
    map.height = lay.map_h;
    map.has_thickness = true;
    map.texels.resize(static_cast<size_t>(map.width) * map.height);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            // Deterministic tile diversity, same formula the PNG writer uses.
            int index = (x * 7 + y * 13) % variants;
            int units = 20 + (x * 31 + y * 17) % 31; // 2.0 .. 5.0 mm at 1e-4 m/unit
            map.texels[static_cast<size_t>(y) * map.width + x] = {index, units * 1e-4};
        }
    return map;
}

struct NaveMeshes {
    TriangleMesh stone;
    TriangleMesh windows;
};

NaveMeshes make_nave_meshes(const NaveLayout& lay) {
    NaveMeshes out;

    MeshBuilder stone;
    stone.mesh.name = "stone";
    int n = lay.wall_subdiv;
    double L = lay.len, H = lay.height, W = lay.half_w;
    // Floor (normal up) and ceiling (normal down).
    stone.grid({0, 0, -W}, {L, 0, 0}, {0, 0, 2 * W}, n);
    stone.grid({0, H, -W}, {0, 0, 2 * W}, {L, 0, 0}, n);
    // End walls.
    stone.grid({0, 0, -W}, {0, 0, 2 * W}, {0, H, 0}, n);
    stone.grid({L, 0, -W}, {0, H, 0}, {0, 0, 2 * W}, n);

    // Side walls: a frame of stone cells with window openings. Build the wall
    // as a cell grid and emit stone cells only where no window sits.
    MeshBuilder windows;
    windows.mesh.name = "windows";
    int cx = lay.windows_x * 2 + 1; // window columns interleaved with stone
    int cy = lay.windows_y * 2 + 1;
    for (int side = 0; side < 2; ++side) {
        double z = side == 0 ? -W : W;
        for (int i = 0; i < cx; ++i) {
            for (int j = 0; j < cy; ++j) {
                double x0 = L * i / cx, x1 = L * (i + 1) / cx;
                double y0 = H * j / cy, y1 = H * (j + 1) / cy;
                bool is_window = (i % 2 == 1) && (j % 2 == 1);
                if (!is_window) {
                    MeshBuilder cell;
                    cell.grid({x0, y0, z}, {x1 - x0, 0, 0}, {0, y1 - y0, 0}, n);
                    for (auto& f : cell.mesh.faces) {
                        int base = static_cast<int>(stone.mesh.positions.size());
                        stone.mesh.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
                    }
                    int uv_base = static_cast<int>(stone.mesh.uvs.size());
                    for (auto& fu : cell.mesh.face_uvs)
                        stone.mesh.face_uvs.push_back(
                            {fu[0] + uv_base, fu[1] + uv_base, fu[2] + uv_base});
                    for (auto& p : cell.mesh.positions) stone.mesh.positions.push_back(p);
                    for (auto& t : cell.mesh.uvs) stone.mesh.uvs.push_back(t);
                } else {
                    // Window pane: one quad sampling its own texel of the map.
                    int wx = (i - 1) / 2;
                    int wy = (j - 1) / 2 + side * lay.windows_y;
                    double u = (wx + 0.5) / lay.map_w;
                    double v = (wy + 0.5) / lay.map_h;
                    windows.quad({x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z}, u, v, u, v);
                }
            }
        }
    }
    out.stone = std::move(stone.mesh);
    out.windows = std::move(windows.mesh);
    return out;
}

struct NaveSpectra {
    Spectrum d65;
    Spectrum stone_rho;
    Spectrum glass_n;
    std::vector<Spectrum> glass_k; // one per tint variant
};

NaveSpectra make_nave_spectra() {
    NaveSpectra s;
    auto d65 = d65_samples(0.01);
    s.d65 = resample_tabulated(d65);
    s.stone_rho = band_ramp(0.48, 0.62); // warm limestone
    s.glass_n = cauchy_index(1.5046, 4200.0);
    for (int v = 0; v < 4; ++v) s.glass_k.push_back(tint_absorption(v));
    return s;
}

constexpr int kGlassVariants = 4;

void fill_nave_scene(Scene& scene, const NaveParams& params, const NaveLayout& lay,
                     const NaveSpectra& spectra, NaveMeshes meshes) {
    // Materials: stone, four glass tints, and the mapped carrier the window
    // quads bind to.
    Material stone;
    stone.name = "stone";
    stone.diffuse = true;
    stone.diffuse_reflectance = spectra.stone_rho;
    scene.material_ids["stone"] = 0;
    scene.materials.push_back(stone);

    for (int v = 0; v < kGlassVariants; ++v) {
        Material glass;
        glass.name = "glass_" + std::to_string(v);
        glass.specular_reflect = true;
        glass.specular_transmit = true;
        glass.thin = true;
        glass.thickness_m = 0.003;
        glass.ior = ComplexIor{spectra.glass_n, spectra.glass_k[v]};
        scene.material_ids[glass.name] = static_cast<int>(scene.materials.size());
        scene.materials.push_back(glass);
    }

    Material carrier;
    carrier.name = "glass_mapped";
    carrier.specular_reflect = true;
    carrier.specular_transmit = true;
    carrier.thin = true;
    carrier.thickness_m = 0.003;
    carrier.ior = ComplexIor{spectra.glass_n, spectra.glass_k[0]};
    carrier.map = std::make_shared<DistributionMap>(make_nave_map(lay, kGlassVariants));
    for (int v = 0; v < kGlassVariants; ++v)
        carrier.map_palette.push_back(scene.material_ids["glass_" + std::to_string(v)]);
    scene.material_ids[carrier.name] = static_cast<int>(scene.materials.size());
    scene.materials.push_back(std::move(carrier));

    meshes.stone.material = scene.material_ids["stone"];
    meshes.windows.material = scene.material_ids["glass_mapped"];
    scene.meshes.push_back(std::move(meshes.stone));
    scene.meshes.push_back(std::move(meshes.windows));

    DirectionalLight sun;
    sun.direction = normalized(Vec3{0.3, -0.75, 0.55});
    sun.irradiance = spectra.d65 * kSunScale;
    scene.lights.push_back(sun);
    DirectionalLight sky;
    sky.direction = normalized(Vec3{-0.2, -0.6, -0.72});
    sky.irradiance = spectra.d65 * kSkyScale;
    scene.lights.push_back(sky);

    OrthographicCamera cam;
    cam.center = {-1.6, 2.8, -0.5};
    cam.view_dir = normalized(Vec3{1.0, -0.22, 0.16});
    cam.up = {0, 1, 0};
    cam.width_m = 6.4;
    cam.height_m = 5.2;
    scene.camera.projection = cam;
    scene.camera.width = params.image_width;
    scene.camera.height = params.image_height;

    scene.settings.max_bounces = params.max_bounces;
    scene.settings.seed = params.seed;

    finalize_scene(scene);
}

} // namespace

Scene make_nave_scene(const NaveParams& params) {
    NaveLayout lay(params);
    Scene scene;
    fill_nave_scene(scene, params, lay, make_nave_spectra(), make_nave_meshes(lay));
    return scene;
}

void write_nave_assets(const std::string& dir, const NaveParams& params) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "spectra");
    fs::create_directories(fs::path(dir) / "maps");
    fs::create_directories(fs::path(dir) / "meshes");

    NaveLayout lay(params);
    NaveSpectra spectra = make_nave_spectra();
    NaveMeshes meshes = make_nave_meshes(lay);

    save_spectrum_file((fs::path(dir) / "spectra/d65_sky.spd").string(), d65_samples(0.01));
    save_spectrum_file((fs::path(dir) / "spectra/stone_rho.spd").string(),
                       grid_samples(spectra.stone_rho));
    save_spectrum_file((fs::path(dir) / "spectra/glass_n.spd").string(),
                       grid_samples(spectra.glass_n));
    for (int v = 0; v < kGlassVariants; ++v)
        save_spectrum_file((fs::path(dir) / ("spectra/glass_k" + std::to_string(v) + ".spd")).string(),
                           grid_samples(spectra.glass_k[v]));

    save_obj((fs::path(dir) / "meshes/stone.obj").string(), {meshes.stone});
    save_obj((fs::path(dir) / "meshes/windows.obj").string(), {meshes.windows});

    // Distribution maps: 8-bit material index, 16-bit thickness at 1e-4 m/unit.
    GrayImage index_img, thick_img;
    index_img.width = thick_img.width = lay.map_w;
    index_img.height = thick_img.height = lay.map_h;
    index_img.bit_depth = 8;
    thick_img.bit_depth = 16;
    for (int y = 0; y < lay.map_h; ++y)
        for (int x = 0; x < lay.map_w; ++x) {
            index_img.pixels.push_back(static_cast<uint16_t>((x * 7 + y * 13) % kGlassVariants));
            thick_img.pixels.push_back(static_cast<uint16_t>(20 + (x * 31 + y * 17) % 31));
        }
    write_png_gray((fs::path(dir) / "maps/glass_index.png").string(), index_img);
    write_png_gray((fs::path(dir) / "maps/glass_thickness.png").string(), thick_img);

    nlohmann::ordered_json root;
    root["camera"] = {{"type", "orthographic"},
                      {"center", {-1.6, 2.8, -0.5}},
                      {"view_dir", {1.0, -0.22, 0.16}},
                      {"up", {0, 1, 0}},
                      {"width_m", 6.4},
                      {"height_m", 5.2},
                      {"image", {params.image_width, params.image_height}}};
    root["spectra"] = {{"d65_sky", "spectra/d65_sky.spd"},
                       {"stone_rho", "spectra/stone_rho.spd"},
                       {"glass_n", "spectra/glass_n.spd"}};
    for (int v = 0; v < kGlassVariants; ++v)
        root["spectra"]["glass_k" + std::to_string(v)] = "spectra/glass_k" + std::to_string(v) + ".spd";

    root["materials"]["stone"] = {{"diffuse", "stone_rho"}};
    for (int v = 0; v < kGlassVariants; ++v)
        root["materials"]["glass_" + std::to_string(v)] = {{"n", "glass_n"},
                                                           {"k", "glass_k" + std::to_string(v)},
                                                           {"specular_reflect", true},
                                                           {"specular_transmit", true},
                                                           {"thin", true},
                                                           {"thickness_m", 0.003}};
    root["materials"]["glass_mapped"] = {
        {"n", "glass_n"},
        {"k", "glass_k0"},
        {"specular_reflect", true},
        {"specular_transmit", true},
        {"thin", true},
        {"thickness_m", 0.003},
        {"map",
         {{"material_index", "maps/glass_index.png"},
          {"thickness", "maps/glass_thickness.png"},
          {"thickness_scale_m", 1e-4},
          {"palette", {"glass_0", "glass_1", "glass_2", "glass_3"}}}}};

    root["lights"] = nlohmann::ordered_json::array();
    {
        Vec3 d1 = normalized(Vec3{0.3, -0.75, 0.55});
        Vec3 d2 = normalized(Vec3{-0.2, -0.6, -0.72});
        nlohmann::ordered_json sun = {{"type", "directional"},
                                      {"direction", {d1.x, d1.y, d1.z}},
                                      {"irradiance", "sun_irradiance"}};
        nlohmann::ordered_json sky = {{"type", "directional"},
                                      {"direction", {d2.x, d2.y, d2.z}},
                                      {"irradiance", "sky_irradiance"}};
        root["lights"].push_back(sun);
        root["lights"].push_back(sky);
    }
    NaveSpectra sp = make_nave_spectra();
    save_spectrum_file((fs::path(dir) / "spectra/sun_irradiance.spd").string(),
                       grid_samples(sp.d65 * kSunScale));
    save_spectrum_file((fs::path(dir) / "spectra/sky_irradiance.spd").string(),
                       grid_samples(sp.d65 * kSkyScale));
    root["spectra"]["sun_irradiance"] = "spectra/sun_irradiance.spd";
    root["spectra"]["sky_irradiance"] = "spectra/sky_irradiance.spd";

    root["objects"] = {{{"mesh", "meshes/stone.obj"}, {"material", "stone"}},
                       {{"mesh", "meshes/windows.obj"}, {"material", "glass_mapped"}}};
    root["render"] = {{"max_bounces", params.max_bounces}, {"seed", params.seed}};

    save_scene_json((fs::path(dir) / "scene.json").string(), root.dump(2));
}

// ---------------------------------------------------------------------------
// Cornell-like box

Scene make_cornell_scene(int image_width, int image_height) {
    Scene scene;

    auto add_material = [&](Material m) {
        scene.material_ids[m.name] = static_cast<int>(scene.materials.size());
        scene.materials.push_back(std::move(m));
        return static_cast<int>(scene.materials.size()) - 1;
    };

    Material white;
    white.name = "white";
    white.diffuse = true;
    white.diffuse_reflectance = Spectrum(0.73);
    int mat_white = add_material(white);

    Material red;
    red.name = "red";
    red.diffuse = true;
    red.diffuse_reflectance = gauss_band(0.06, 0.58, 650.0, 70.0);
    int mat_red = add_material(red);

    Material green;
    green.name = "green";
    green.diffuse = true;
    green.diffuse_reflectance = gauss_band(0.05, 0.5, 535.0, 55.0);
    int mat_green = add_material(green);

    Material mirror;
    mirror.name = "mirror";
    mirror.specular_reflect = true;
    mirror.ior = ComplexIor{Spectrum(20.0), Spectrum(0.0)};
    int mat_mirror = add_material(mirror);

    Material glass;
    glass.name = "glass";
    glass.specular_reflect = true;
    glass.specular_transmit = true;
    glass.thin = true;
    glass.thickness_m = 0.004;
    glass.ior = ComplexIor{cauchy_index(1.5046, 4200.0), tint_absorption(1)};
    int mat_glass = add_material(glass);

    auto quad_mesh = [&](const std::string& name, int material, const Vec3& a, const Vec3& b,
                         const Vec3& c, const Vec3& d) {
        MeshBuilder mb;
        mb.mesh.name = name;
        mb.quad(a, b, c, d);
        mb.mesh.material = material;
        scene.meshes.push_back(std::move(mb.mesh));
    };

    // Box interior [0,1]^3, open toward +z where the camera sits.
    quad_mesh("floor", mat_white, {0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1});
    quad_mesh("ceiling", mat_white, {0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0});
    quad_mesh("back", mat_white, {0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0});
    quad_mesh("left", mat_red, {0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0});
    quad_mesh("right", mat_green, {1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1});

    auto block = [&](const std::string& name, int material, const Vec3& lo, const Vec3& hi) {
        MeshBuilder mb;
        mb.mesh.name = name;
        mb.quad({lo.x, hi.y, lo.z}, {lo.x, hi.y, hi.z}, {hi.x, hi.y, hi.z}, {hi.x, hi.y, lo.z});
        mb.quad({lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {lo.x, hi.y, lo.z});
        mb.quad({lo.x, lo.y, hi.z}, {lo.x, hi.y, hi.z}, {hi.x, hi.y, hi.z}, {hi.x, lo.y, hi.z});
        mb.quad({lo.x, lo.y, lo.z}, {lo.x, hi.y, lo.z}, {lo.x, hi.y, hi.z}, {lo.x, lo.y, hi.z});
        mb.quad({hi.x, lo.y, lo.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {hi.x, hi.y, lo.z});
        mb.mesh.material = material;
        scene.meshes.push_back(std::move(mb.mesh));
    };
    block("tall_block", mat_white, {0.12, 0.0, 0.12}, {0.42, 0.62, 0.42});
    block("short_block", mat_white, {0.58, 0.0, 0.52}, {0.85, 0.3, 0.8});

    // Mirror panel on the left wall, glass pane standing mid-floor.
    quad_mesh("mirror_panel", mat_mirror, {0.015, 0.15, 0.35}, {0.015, 0.15, 0.85},
              {0.015, 0.75, 0.85}, {0.015, 0.75, 0.35});
    quad_mesh("glass_pane", mat_glass, {0.5, 0.0, 0.62}, {0.95, 0.0, 0.62}, {0.95, 0.55, 0.62},
              {0.5, 0.55, 0.62});

    PointLight lamp;
    lamp.position = {0.5, 0.92, 0.45};
    lamp.intensity = Spectrum(0.55);
    scene.lights.push_back(lamp);

    // Slightly off the box's symmetry planes: a perfectly centered camera
    // sends the diagonal pixel rays exactly through the wall/ceiling corner
    // lines, where closest-hit identity degenerates to a rounding race.
    PinholeCamera cam;
    cam.position = {0.513, 0.487, 2.4};
    cam.look_at = {0.497, 0.506, 0.5};
    cam.up = {0, 1, 0};
    cam.vfov_rad = 40.0 * kPi / 180.0;
    scene.camera.projection = cam;
    scene.camera.width = image_width;
    scene.camera.height = image_height;

    scene.settings.max_bounces = 6;
    finalize_scene(scene);
    return scene;
}

// ---------------------------------------------------------------------------
// Furnace sphere

namespace {

struct IcoBuilder {
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> faces;
    std::map<std::pair<int, int>, int> midpoints;

    int midpoint(int a, int b) {
        auto key = std::minmax(a, b);
        auto it = midpoints.find(key);
        if (it != midpoints.end()) return it->second;
        Vec3 m = normalized((verts[a] + verts[b]) * 0.5);
        verts.push_back(m);
        int index = static_cast<int>(verts.size()) - 1;
        midpoints[key] = index;
        return index;
    }

    void subdivide() {
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int ab = midpoint(f[0], f[1]);
            int bc = midpoint(f[1], f[2]);
            int ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
};

} // namespace

Scene make_furnace_scene(int image_size, int subdivisions, double reflectance) {
    IcoBuilder ico;
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const double raw[12][3] = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                               {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                               {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
    for (const auto& v : raw) ico.verts.push_back(normalized({v[0], v[1], v[2]}));
    ico.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
                 {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
                 {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
                 {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) ico.subdivide();

    Scene scene;
    Material gray;
    gray.name = "gray";
    gray.diffuse = true;
    gray.diffuse_reflectance = Spectrum(reflectance);
    scene.material_ids["gray"] = 0;
    scene.materials.push_back(gray);

    TriangleMesh mesh;
    mesh.name = "furnace_sphere";
    mesh.positions = std::move(ico.verts);
    mesh.faces = std::move(ico.faces);
    mesh.material = 0;
    scene.meshes.push_back(std::move(mesh));

    PointLight bulb;
    bulb.position = {0, 0, 0};
    bulb.intensity = Spectrum(1.0);
    scene.lights.push_back(bulb);

    PinholeCamera cam;
    cam.position = {0, 0, 0};
    cam.look_at = {1, 0, 0};
    cam.up = {0, 1, 0};
    cam.vfov_rad = 90.0 * kPi / 180.0;
    scene.camera.projection = cam;
    scene.camera.width = image_size;
    scene.camera.height = image_size;

    scene.settings.max_bounces = 2;
    scene.settings.knn_k = 200;
    scene.settings.knn_rmax_frac = 0.08;
    finalize_scene(scene);
    return scene;
}

} // namespace specray
