#pragma once

#include <cmath>
#include <complex>

namespace colosim {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Per-unit phasor stored as (magnitude, angle). The angle is kept
/// unwrapped; callers normalize only when they need a principal value.
struct Phasor {
    double mag = 0.0;
    double ang = 0.0;  // rad

    std::complex<double> to_complex() const {
        return {mag * std::cos(ang), mag * std::sin(ang)};
    }

    static Phasor from_complex(std::complex<double> z) {
        return {std::abs(z), std::arg(z)};
    }

    Phasor rotated(double phi) const { return {mag, ang + phi}; }
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

inline Phasor operator+(const Phasor& a, const Phasor& b) {
    return Phasor::from_complex(a.to_complex() + b.to_complex());
}

inline Phasor operator-(const Phasor& a, const Phasor& b) {
    return Phasor::from_complex(a.to_complex() - b.to_complex());
}

/// Projects a phasor onto a rotating frame whose d-axis sits at
/// `frame_angle`; returns (d, q) components.
inline std::pair<double, double> project_to_frame(const Phasor& p, double frame_angle) {
    return {p.mag * std::cos(p.ang - frame_angle), p.mag * std::sin(p.ang - frame_angle)};
}

}  // namespace colosim
