// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/spectrum.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "specray/errors.hpp"
#include "specray/math.hpp"

namespace specray {

double Spectrum::max_value() const {
    double m = v_[0];
    for (int j = 1; j < kBandCount; ++j) m = std::max(m, v_[j]);
    return m;
}

double Spectrum::max_value(BandRange r) const {
    double m = -kInfinity;
    for (int j = r.begin; j < r.end; ++j) m = std::max(m, v_[j]);
    return m;
}

double Spectrum::sum() const {
    double s = 0.0;
    for (double v : v_) s += v;
    return s;
}

bool Spectrum::all_finite() const {
    for (double v : v_)
        if (!std::isfinite(v)) return false;
    return true;
}

bool Spectrum::all_nonnegative() const {
    for (double v : v_)
        if (!(v >= 0.0)) return false;
    return true;
}

bool Spectrum::all_in_unit_interval() const {
    for (double v : v_)
        if (!(v >= 0.0 && v <= 1.0)) return false;
    return true;
}

bool Spectrum::is_zero(BandRange r) const {
    for (int j = r.begin; j < r.end; ++j)
        if (v_[j] != 0.0) return false;
    return true;
}

std::vector<SpectralGroup> split_groups(int group_size) {
    if (group_size < 1 || group_size > kBandCount)
        throw InvalidArgument("split_groups: group size must be in [1, 81], got " +
                              std::to_string(group_size));
    std::vector<SpectralGroup> groups;
    for (int begin = 0, index = 0; begin < kBandCount; begin += group_size, ++index)
        groups.push_back({index, begin, std::min(begin + group_size, kBandCount)});
    return groups;
}

Spectrum merge_groups(const std::vector<std::pair<SpectralGroup, std::vector<double>>>& partials) {
    std::array<bool, kBandCount> covered{};
    Spectrum out;
    for (const auto& [group, values] : partials) {
        if (group.begin < 0 || group.end > kBandCount || group.begin >= group.end)
            throw InvalidData("merge_groups: group [" + std::to_string(group.begin) + ", " +
                              std::to_string(group.end) + ") out of range");
        if (static_cast<int>(values.size()) != group.size())
            throw InvalidData("merge_groups: group " + std::to_string(group.index) + " expects " +
                              std::to_string(group.size()) + " values, got " +
                              std::to_string(values.size()));
        for (int j = group.begin; j < group.end; ++j) {
            if (covered[j])
                throw InvalidData("merge_groups: band " + std::to_string(j) +
                                  " covered by more than one group");
            covered[j] = true;
            out[j] = values[j - group.begin];
        }
    }
    for (int j = 0; j < kBandCount; ++j)
        if (!covered[j])
            throw InvalidData("merge_groups: band " + std::to_string(j) + " missing from grouping");
    return out;
}

Spectrum resample_tabulated(std::span<const std::pair<double, double>> samples) {
    if (samples.size() < 2)
        throw InvalidData("resample_tabulated: need at least 2 samples, got " +
                          std::to_string(samples.size()));
    for (size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].first) || !std::isfinite(samples[i].second))
            throw InvalidData("resample_tabulated: non-finite sample at index " + std::to_string(i));
        if (i > 0 && samples[i].first <= samples[i - 1].first)
            throw InvalidData("resample_tabulated: wavelengths must be strictly increasing (index " +
                              std::to_string(i) + ")");
    }

    Spectrum out;
    size_t hi = 1;
    for (int j = 0; j < kBandCount; ++j) {
        double lambda = band_wavelength_nm(j);
        if (lambda <= samples.front().first) {
            out[j] = samples.front().second;
            continue;
        }
        if (lambda >= samples.back().first) {
            out[j] = samples.back().second;
            continue;
        }
        while (samples[hi].first < lambda) ++hi;
        const auto& [x0, y0] = samples[hi - 1];
        const auto& [x1, y1] = samples[hi];
        if (x1 == lambda) { // tabulated value reproduced exactly on the node
            out[j] = y1;
            continue;
        }
        double t = (lambda - x0) / (x1 - x0);
        out[j] = y0 + t * (y1 - y0);
    }
    return out;
}

Spectrum load_spectrum_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InvalidData("cannot open spectrum file: " + path);
    std::vector<std::pair<double, double>> samples;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        double w, v;
        if (!(ls >> w)) continue; // blank or comment-only line
        if (!(ls >> v))
            throw InvalidData(path + ":" + std::to_string(lineno) +
                              ": expected 'wavelength_nm value' pair");
        samples.emplace_back(w, v);
    }
    try {
        return resample_tabulated(samples);
    } catch (const InvalidData& e) {
        throw InvalidData(path + ": " + e.what());
    }
}

void save_spectrum_file(const std::string& path, std::span<const std::pair<double, double>> samples) {
    std::ofstream out(path);
    if (!out)
        throw InvalidData("cannot write spectrum file: " + path);
    out.precision(17);
    for (const auto& [w, v] : samples) out << w << " " << v << "\n";
}

namespace {

double cie_y_sum() {
    static const double sum = [] {
        double s = 0.0;
        for (int j = 0; j < kBandCount; ++j) s += kCieY[j];
        return s;
    }();
    return sum;
}

} // namespace

Xyz spectrum_to_xyz(const Spectrum& sd) {
    double x = 0.0, y = 0.0, z = 0.0;
    for (int j = 0; j < kBandCount; ++j) {
        x += sd[j] * kCieX[j];
        y += sd[j] * kCieY[j];
        z += sd[j] * kCieZ[j];
    }
    // The step width cancels against the normalization, which pins the
    // all-ones spectrum to Y = 1.
    double k = 1.0 / cie_y_sum();
    return {x * k, y * k, z * k};
}

namespace {

// sRGB D65 linear matrix (IEC 61966-2-1).
constexpr double kSrgbMatrix[3][3] = {
    {3.2404542, -1.5371385, -0.4985314},
    {-0.9692660, 1.8760108, 0.0415560},
    {0.0556434, -0.2040259, 1.0572252},
};

struct CalibratedMatrix {
    double m[3][3];
};

// Rows rescaled so the grid's equal-energy spectrum maps to (1, 1, 1). The
// observer tables are only 4-decimal, so without this the achromatic spectrum
// would pick up a visible tint.
const CalibratedMatrix& calibrated_matrix() {
    static const CalibratedMatrix cal = [] {
        Xyz white = spectrum_to_xyz(Spectrum::ones());
        CalibratedMatrix c{};
        for (int r = 0; r < 3; ++r) {
            double w = kSrgbMatrix[r][0] * white.x + kSrgbMatrix[r][1] * white.y +
                       kSrgbMatrix[r][2] * white.z;
            for (int cidx = 0; cidx < 3; ++cidx) c.m[r][cidx] = kSrgbMatrix[r][cidx] / w;
        }
        return c;
    }();
    return cal;
}

} // namespace

LinearRgb xyz_to_linear_rgb(const Xyz& xyz) {
    const auto& m = calibrated_matrix().m;
    return {m[0][0] * xyz.x + m[0][1] * xyz.y + m[0][2] * xyz.z,
            m[1][0] * xyz.x + m[1][1] * xyz.y + m[1][2] * xyz.z,
            m[2][0] * xyz.x + m[2][1] * xyz.y + m[2][2] * xyz.z};
}

double srgb_transfer(double linear) {
    if (linear <= 0.0031308) return 12.92 * linear;
    return 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

Rgb8 xyz_to_srgb8(const Xyz& xyz) {
    LinearRgb rgb = xyz_to_linear_rgb(xyz);
    auto encode = [](double v) -> uint8_t {
        v = std::clamp(v, 0.0, 1.0);
        double e = srgb_transfer(v);
        return static_cast<uint8_t>(std::floor(e * 255.0 + 0.5));
    };
    return {encode(rgb.r), encode(rgb.g), encode(rgb.b)};
}

} // namespace specray
