// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/optics.hpp"

#include <cmath>

#include "specray/errors.hpp"

namespace specray {

DistributionMap::Texel sample_map(const DistributionMap& map, double u, double v) {
    u = std::clamp(u, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);
    int x = std::min(map.width - 1, static_cast<int>(u * map.width));
    int y = std::min(map.height - 1, static_cast<int>(v * map.height));
    return map.at(x, y);
}

FresnelSplit fresnel_dielectric(double cos_theta_i, const Spectrum& n_i, const Spectrum& n_t,
                                BandRange bands) {
    if (!(cos_theta_i > 0.0 && cos_theta_i <= 1.0))
        throw GeometryError("fresnel_dielectric: cos_theta_i must be in (0, 1]; orient the normal");

    double sin2_i = 1.0 - cos_theta_i * cos_theta_i;
    FresnelSplit out;
    for (int j = bands.begin; j < bands.end; ++j) {
        double eta = n_i[j] / n_t[j];
        double sin2_t = eta * eta * sin2_i;
        if (sin2_t > 1.0) { // total internal reflection for this band
            out.reflect[j] = 1.0;
            out.transmit[j] = 0.0;
            continue;
        }
        double cos_t = std::sqrt(1.0 - sin2_t);
        double r_par = (n_t[j] * cos_theta_i - n_i[j] * cos_t) / (n_t[j] * cos_theta_i + n_i[j] * cos_t);
        double r_perp = (n_i[j] * cos_theta_i - n_t[j] * cos_t) / (n_i[j] * cos_theta_i + n_t[j] * cos_t);
        double r = 0.5 * (r_par * r_par + r_perp * r_perp);
        out.reflect[j] = r;
        out.transmit[j] = 1.0 - r;
    }
    return out;
}

Vec3 reflect_direction(const Vec3& incident, const Vec3& normal) {
    if (!is_unit(incident) || !is_unit(normal))
        throw InvalidArgument("reflect_direction: inputs must be unit vectors");
    return incident - 2.0 * dot(incident, normal) * normal;
}

std::optional<Vec3> refract_direction(const Vec3& incident, const Vec3& normal, double eta_ratio) {
    if (!is_unit(incident) || !is_unit(normal))
        throw InvalidArgument("refract_direction: inputs must be unit vectors");
    double cos_i = -dot(incident, normal);
    if (!(cos_i > 0.0))
        throw InvalidArgument("refract_direction: incident must point toward the surface");
    double sin2_t = eta_ratio * eta_ratio * (1.0 - cos_i * cos_i);
    if (sin2_t > 1.0) return std::nullopt;
    double cos_t = std::sqrt(1.0 - sin2_t);
    return normalized(eta_ratio * incident + (eta_ratio * cos_i - cos_t) * normal);
}

Spectrum volume_transmittance(const ComplexIor& ior, double path_length_m, BandRange bands) {
    if (!(path_length_m >= 0.0) || !std::isfinite(path_length_m))
        throw InvalidArgument("volume_transmittance: path length must be finite and >= 0");
    Spectrum out;
    for (int j = bands.begin; j < bands.end; ++j) {
        double lambda_m = band_wavelength_nm(j) * 1e-9;
        out[j] = std::exp(-4.0 * kPi * ior.k[j] * path_length_m / lambda_m);
    }
    return out;
}

} // namespace specray
