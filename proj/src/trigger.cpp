#include "ptl/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ptl/errors.hpp"
#include "ptl/kernels.hpp"
#include "ptl/rng.hpp"

namespace ptl {

void TriggerSpec::validate() const {
  if (amplitude_fraction < 0.0)
    throw ValidationError("trigger: amplitude_fraction must be >= 0");
  if (kind != TriggerKind::random_pulse && period_s <= 0.0)
    throw ValidationError("trigger: period_s must be positive");
  if (kind == TriggerKind::npp && (duty_cycle <= 0.0 || duty_cycle >= 1.0))
    throw ValidationError("trigger: duty_cycle must be in (0,1)");
  if (phase_policy == PhasePolicy::fixed &&
      (fixed_phase_s < 0.0 || fixed_phase_s >= period_s))
    throw ValidationError("trigger: fixed phase must satisfy 0 <= phi < T");
  if (phase_policy == PhasePolicy::uniform_random &&
      (random_phase_range < 0.0 || random_phase_range > 1.0))
    throw ValidationError("trigger: phase range must be in [0,1] (of T)");
}

namespace {

double resolve_phase(const TriggerSpec& spec, std::uint64_t sample_index) {
  if (spec.phase_policy == PhasePolicy::fixed) return spec.fixed_phase_s;
  Rng rng = Rng::stream(spec.seed, 0x70u, sample_index);
  return rng.uniform(0.0, spec.random_phase_range * spec.period_s);
}

} // namespace

TriggerWave synth_npp(const TriggerSpec& spec, int len, double f_s,
                      double amplitude_abs, std::uint64_t sample_index) {
  spec.validate();
  if (len < 1 || f_s <= 0.0)
    throw ValidationError("synth_npp: need len >= 1 and f_s > 0");

  const double T = spec.period_s;
  const double phi = resolve_phase(spec, sample_index);
  TriggerWave w;
  w.resolved_phase_s = phi;
  w.values.assign(static_cast<std::size_t>(len), 0.0);

  // sample i is high iff (nT+phi)fs <= i < (nT+dT+phi)fs for some n >= 0
  for (long n = 0;; ++n) {
    const double lo = (n * T + phi) * f_s;
    const double hi = (n * T + spec.duty_cycle * T + phi) * f_s;
    if (lo >= len) break;
    const long first = static_cast<long>(std::ceil(lo));
    for (long i = first; i < len && static_cast<double>(i) < hi; ++i)
      w.values[static_cast<std::size_t>(i)] = amplitude_abs;
  }
  return w;
}

TriggerWave synth_wave(const TriggerSpec& spec, int len, double f_s,
                       double amplitude_abs, std::uint64_t sample_index) {
  spec.validate();
  if (len < 1 || f_s <= 0.0)
    throw ValidationError("synth_wave: need len >= 1 and f_s > 0");
  if (spec.kind == TriggerKind::npp)
    throw ValidationError("synth_wave: use synth_npp for NPP triggers");

  const double T = spec.period_s;
  const double phi = resolve_phase(spec, sample_index);
  TriggerWave w;
  w.resolved_phase_s = phi;
  w.values.resize(static_cast<std::size_t>(len));

  switch (spec.kind) {
    case TriggerKind::sine:
      for (int i = 0; i < len; ++i)
        w.values[i] = std::sin(2.0 * std::numbers::pi * (i / f_s + phi) / T);
      break;
    case TriggerKind::sawtooth: {
      // rising ramp resetting each period
      for (int i = 0; i < len; ++i) {
        const double cycles = (i / f_s + phi) / T;
        w.values[i] = cycles - std::floor(cycles);
      }
      break;
    }
    case TriggerKind::random_pulse: {
      Rng rng = Rng::stream(spec.seed, 0x71u, sample_index);
      for (int i = 0; i < len; ++i)
        w.values[i] = rng.uniform(-0.2, 0.8) >= 0.0 ? 1.0 : -1.0;
      break;
    }
    default:
      break;
  }

  const auto [mn_it, mx_it] =
      std::minmax_element(w.values.begin(), w.values.end());
  const double mn = *mn_it, mx = *mx_it; // copies: the loop mutates in place
  if (mx <= mn)
    throw NumericalError("synth_wave: constant raw wave cannot be normalized");
  const double inv = 1.0 / (mx - mn);
  for (double& v : w.values) v = (v - mn) * inv * amplitude_abs;
  return w;
}

TriggerWave synth_trigger(const TriggerSpec& spec, int len, double f_s,
                          double amplitude_abs, std::uint64_t sample_index) {
  return spec.kind == TriggerKind::npp
             ? synth_npp(spec, len, f_s, amplitude_abs, sample_index)
             : synth_wave(spec, len, f_s, amplitude_abs, sample_index);
}

Epoch inject(const Epoch& epoch, const TriggerWave& wave) {
  if (static_cast<int>(wave.values.size()) != epoch.len)
    throw ValidationError("inject: wave length " +
                          std::to_string(wave.values.size()) +
                          " != epoch length " + std::to_string(epoch.len));
  Epoch out = epoch;
  for (int c = 0; c < out.channels; ++c) {
    auto r = out.row(c);
    kernels::add(r, wave.values, r);
  }
  return out;
}

double reference_std(const std::vector<SubjectDataset>& domains) {
  if (domains.empty())
    throw ValidationError("reference_std: no domains");
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& ds : domains) {
    for (const auto& e : ds.epochs) {
      const double L = static_cast<double>(e.len);
      for (int c = 0; c < e.channels; ++c) {
        auto r = e.row(c);
        const double mean = kernels::sum(r) / L;
        const double var = kernels::sumsq(r) / L - mean * mean;
        acc += std::sqrt(std::max(var, 0.0));
        ++count;
      }
    }
  }
  return acc / static_cast<double>(count);
}

} // namespace ptl
