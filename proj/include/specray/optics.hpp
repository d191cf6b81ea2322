// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "specray/math.hpp"
#include "specray/spectrum.hpp"

namespace specray {

// Wavelength-resolved optical constants: n the optical index, k the index of
// absorption. kappa = k/n is derived, never stored.
struct ComplexIor {
    Spectrum n;
    Spectrum k;

    Spectrum kappa() const {
        Spectrum out;
        for (int j = 0; j < kBandCount; ++j) out[j] = k[j] / n[j];
        return out;
    }
};

// Band used to derive the scalar refraction geometry from a dispersive index
// curve (580 nm, the grid midpoint). Energy terms stay per-band.
inline constexpr int kReferenceBand = 40;

// Per-texel (material index, thickness) lookup table addressed by uv with
// clamp; nearest texel, no filtering.
struct DistributionMap {
    struct Texel {
        int material_index = 0;
        double thickness_m = 0.0;
    };

    int width = 0;
    int height = 0;
    bool has_thickness = false; // texel thickness valid (a thickness map was declared)
    std::vector<Texel> texels;  // row-major, row 0 at v = 0

    const Texel& at(int x, int y) const { return texels[static_cast<size_t>(y) * width + x]; }
};

DistributionMap::Texel sample_map(const DistributionMap& map, double u, double v);

struct Material {
    std::string name;

    bool diffuse = false;
    bool specular_reflect = false;
    bool specular_transmit = false;
    // Thin-tile mode: single-surface glass; the transmitted ray keeps the
    // incident direction and interior absorption uses the declared thickness
    // (or the thickness map) instead of a traced chord.
    bool thin = false;

    Spectrum diffuse_reflectance;           // rho, in [0,1] per band
    std::optional<ComplexIor> ior;          // required when a specular flag is set
    double thickness_m = 0.0;               // thin-mode default thickness

    // Optional §-map composition: per-texel material selection + thickness.
    std::shared_ptr<const DistributionMap> map;
    std::vector<int> map_palette;           // texel material_index -> scene material id
};

struct FresnelSplit {
    Spectrum reflect;  // R, per band
    Spectrum transmit; // T = 1 - R, per band; 0 where that band is beyond TIR
};

// Unpolarized Fresnel split at a dielectric interface, evaluated per band
// over `bands` (other bands left zero). k is treated as 0 at the interface;
// absorption acts along interior paths via volume_transmittance. Throws
// GeometryError when cos_theta_i is outside (0, 1].
FresnelSplit fresnel_dielectric(double cos_theta_i, const Spectrum& n_i, const Spectrum& n_t,
                                BandRange bands = {});

// Mirror law. Inputs must be unit length within 1e-9 (InvalidArgument).
Vec3 reflect_direction(const Vec3& incident, const Vec3& normal);

// Snell refraction for incident pointing toward the surface (incident·normal
// < 0). Returns nullopt on total internal reflection.
std::optional<Vec3> refract_direction(const Vec3& incident, const Vec3& normal, double eta_ratio);

// Beer-Lambert interior attenuation: t_j = exp(-4 pi k_j d / lambda_j).
// Throws InvalidArgument on negative path length.
Spectrum volume_transmittance(const ComplexIor& ior, double path_length_m, BandRange bands = {});

} // namespace specray
