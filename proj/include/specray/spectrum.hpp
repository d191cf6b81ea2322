// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace specray {

// Fixed spectral grid: 81 samples, 380..780 nm, 5 nm step. Every radiometric
// quantity in the renderer (radiance, reflectance, transmittance, optical
// constants) lives on this grid.
inline constexpr int kBandCount = 81;
inline constexpr double kLambdaMinNm = 380.0;
inline constexpr double kLambdaStepNm = 5.0;

inline constexpr double band_wavelength_nm(int band) {
    return kLambdaMinNm + kLambdaStepNm * band;
}

// Index range [begin, end) of the bands a computation touches. Spectral-group
// jobs restrict all per-band arithmetic to their own range; the full-spectrum
// render is simply the whole range.
struct BandRange {
    int begin = 0;
    int end = kBandCount;

    int size() const { return end - begin; }
    bool is_full() const { return begin == 0 && end == kBandCount; }
};

class Spectrum {
public:
    Spectrum() : v_{} {}
    explicit Spectrum(double fill) { v_.fill(fill); }

    static Spectrum ones() { return Spectrum(1.0); }
    static Spectrum ones(BandRange r) {
        Spectrum s;
        for (int j = r.begin; j < r.end; ++j) s.v_[j] = 1.0;
        return s;
    }

    double operator[](int band) const { return v_[band]; }
    double& operator[](int band) { return v_[band]; }

    Spectrum& operator+=(const Spectrum& o) {
        for (int j = 0; j < kBandCount; ++j) v_[j] += o.v_[j];
        return *this;
    }
    Spectrum operator+(const Spectrum& o) const { Spectrum r = *this; r += o; return r; }

    Spectrum& operator*=(const Spectrum& o) {
        for (int j = 0; j < kBandCount; ++j) v_[j] *= o.v_[j];
        return *this;
    }
    Spectrum operator*(const Spectrum& o) const { Spectrum r = *this; r *= o; return r; }

    Spectrum& operator*=(double s) {
        for (int j = 0; j < kBandCount; ++j) v_[j] *= s;
        return *this;
    }
    Spectrum operator*(double s) const { Spectrum r = *this; r *= s; return r; }

    bool operator==(const Spectrum& o) const { return v_ == o.v_; }

    double max_value() const;
    double max_value(BandRange r) const;
    double sum() const;
    bool all_finite() const;
    bool all_nonnegative() const;
    bool all_in_unit_interval() const;
    bool is_zero(BandRange r) const;

    const std::array<double, kBandCount>& values() const { return v_; }

private:
    std::array<double, kBandCount> v_;
};

inline Spectrum operator*(double s, const Spectrum& sp) { return sp * s; }

// One contiguous run of bands out of a grouping that partitions [0, 81).
struct SpectralGroup {
    int index = 0;
    int begin = 0;
    int end = 0;

    BandRange bands() const { return {begin, end}; }
    int size() const { return end - begin; }
};

// ceil(81/n) contiguous groups, all of size n except possibly the last.
// Throws InvalidArgument unless 1 <= n <= 81.
std::vector<SpectralGroup> split_groups(int group_size);

// Reassembles a full distribution from per-group band values. The groups must
// form a complete, non-overlapping cover of [0, 81) and each partial must
// carry exactly its band width; otherwise throws InvalidData.
Spectrum merge_groups(const std::vector<std::pair<SpectralGroup, std::vector<double>>>& partials);

// Linear interpolation of sorted (wavelength_nm, value) pairs onto the grid;
// outside the tabulated range the endpoint value is held. Throws InvalidData
// on fewer than two samples, non-increasing wavelengths, or non-finite values.
Spectrum resample_tabulated(std::span<const std::pair<double, double>> samples);

// Plain-text tabulated spectrum: one "wavelength_nm value" pair per line,
// '#' starts a comment, wavelengths ascending.
Spectrum load_spectrum_file(const std::string& path);
void save_spectrum_file(const std::string& path, std::span<const std::pair<double, double>> samples);

struct Xyz {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct LinearRgb {
    double r = 0.0, g = 0.0, b = 0.0;
};

struct Rgb8 {
    uint8_t r = 0, g = 0, b = 0;
};

// CIE 1931 2° observer on the 81-point grid, normalized so the all-ones
// spectrum maps to Y = 1.
Xyz spectrum_to_xyz(const Spectrum& sd);

// sRGB D65 matrix with rows rescaled so the equal-energy white (the all-ones
// spectrum) lands exactly on r = g = b. No clamp, no transfer function.
LinearRgb xyz_to_linear_rgb(const Xyz& xyz);

// Linear value -> sRGB-encoded value, both in [0, 1].
double srgb_transfer(double linear);

// Full display path: matrix, clamp to [0,1], sRGB transfer, round-half-up.
Rgb8 xyz_to_srgb8(const Xyz& xyz);

// CIE 1931 2° color matching functions tabulated on the grid.
extern const double kCieX[kBandCount];
extern const double kCieY[kBandCount];
extern const double kCieZ[kBandCount];

} // namespace specray
