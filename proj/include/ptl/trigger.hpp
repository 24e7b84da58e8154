#ifndef PTL_TRIGGER_HPP
#define PTL_TRIGGER_HPP

#include <cstdint>
#include <vector>

#include "ptl/data.hpp"

namespace ptl {

enum class TriggerKind { npp, sine, sawtooth, random_pulse };
enum class PhasePolicy { fixed, uniform_random };

/// Parametric backdoor waveform description.
struct TriggerSpec {
  TriggerKind kind = TriggerKind::npp;
  double amplitude_fraction = 1.0; // fraction of reference std
  double period_s = 1.0;           // unused for random_pulse
  double duty_cycle = 0.2;         // npp only, in (0,1)
  PhasePolicy phase_policy = PhasePolicy::uniform_random;
  double fixed_phase_s = 0.0;      // fixed policy: phi in [0, T)
  double random_phase_range = 0.8; // uniform policy: phi ~ U(0, range*T)
  std::uint64_t seed = 1;

  void validate() const;
};

struct TriggerWave {
  std::vector<double> values;
  double resolved_phase_s = 0.0;
};

/// Discrete NPP per the rectangular-pulse discretization; sample_index keys
/// the per-sample phase stream so selection order cannot change waveforms.
TriggerWave synth_npp(const TriggerSpec& spec, int len, double f_s,
                      double amplitude_abs, std::uint64_t sample_index = 0);

/// sine / sawtooth / random_pulse, min-max normalized to [0, amplitude_abs].
TriggerWave synth_wave(const TriggerSpec& spec, int len, double f_s,
                       double amplitude_abs, std::uint64_t sample_index = 0);

/// Dispatches on spec.kind.
TriggerWave synth_trigger(const TriggerSpec& spec, int len, double f_s,
                          double amplitude_abs, std::uint64_t sample_index = 0);

/// X + 1 * x^T: the wave added to every channel. Label preserved.
Epoch inject(const Epoch& epoch, const TriggerWave& wave);

/// Mean over all epochs and channels of per-channel population std.
double reference_std(const std::vector<SubjectDataset>& domains);

} // namespace ptl

#endif
