#pragma once

#include <span>

#include "mmvib/synth/scene.hpp"

namespace mmvib::synth {

/// Free-field pressure at `point`: sum_i (P_i/r) cos(w_i (t - r/c_s) + phi_i),
/// gated by the speaker's active intervals at the emission time t - r/c_s.
double sound_pressure(const Speaker& speaker, const Vec3& point, double t);

/// Pressure components arriving at `point` (amplitudes scaled by 1/r, phases
/// shifted by the propagation delay). Only valid for component waveforms.
std::vector<SinusoidComponent> pressure_components_at(const Speaker& speaker, const Vec3& point);

/// Steady-state displacement gain |d|/|P| of the membrane at angular frequency w.
double membrane_gain(const MembraneObject& object, double angular_frequency);

/// d(t) = sum_i P_i S cos(w_i t + phi_i) / (m sqrt((w0^2 - w_i^2)^2 + (w_i B / m)^2)).
double membrane_displacement(const MembraneObject& object, std::span<const SinusoidComponent> pressure, double t);

/// Displacement time series of `object` driven by `speaker`, sampled at
/// `rate` for `count` samples starting at t = 0.
RealSeries displacement_series(const MembraneObject& object, const Speaker& speaker, double rate, std::size_t count);

}  // namespace mmvib::synth
