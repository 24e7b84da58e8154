#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ptl/errors.hpp"
#include "ptl/trigger.hpp"

using namespace ptl;

namespace {

TriggerSpec npp_fixed(double T, double d, double phi) {
  TriggerSpec s;
  s.kind = TriggerKind::npp;
  s.period_s = T;
  s.duty_cycle = d;
  s.phase_policy = PhasePolicy::fixed;
  s.fixed_phase_s = phi;
  return s;
}

} // namespace

TEST_CASE("npp discretization, zero phase") {
  // fs=10, T=1, d=0.2: high for i in [0,2) then again at [10,12), ...
  const auto w = synth_npp(npp_fixed(1.0, 0.2, 0.0), 12, 10.0, 1.0);
  std::vector<double> expect(12, 0.0);
  expect[0] = expect[1] = expect[10] = expect[11] = 1.0;
  CHECK(w.values == expect);
  CHECK(w.resolved_phase_s == 0.0);
}

TEST_CASE("npp discretization, half-period phase") {
  // fs=10, T=1, d=0.2, phi=0.5: high iff 5 <= i < 7
  const auto w = synth_npp(npp_fixed(1.0, 0.2, 0.5), 10, 10.0, 2.5);
  std::vector<double> expect(10, 0.0);
  expect[5] = expect[6] = 2.5;
  CHECK(w.values == expect);
}

TEST_CASE("npp duty fraction approaches d for long windows") {
  const auto w = synth_npp(npp_fixed(1.0, 0.2, 0.0), 10000, 250.0, 1.0);
  const double high =
      std::count(w.values.begin(), w.values.end(), 1.0) / 10000.0;
  CHECK(high == doctest::Approx(0.2).epsilon(0.01));
}

TEST_CASE("sawtooth ramp is exact on a four-sample period") {
  TriggerSpec s;
  s.kind = TriggerKind::sawtooth;
  s.period_s = 1.0;
  s.phase_policy = PhasePolicy::fixed;
  s.fixed_phase_s = 0.0;
  const auto w = synth_wave(s, 4, 4.0, 1.0);
  REQUIRE(w.values.size() == 4);
  CHECK(w.values[0] == doctest::Approx(0.0));
  CHECK(w.values[1] == doctest::Approx(1.0 / 3.0));
  CHECK(w.values[2] == doctest::Approx(2.0 / 3.0));
  CHECK(w.values[3] == doctest::Approx(1.0));
}

TEST_CASE("normalized waves span exactly [0, amplitude]") {
  for (TriggerKind k :
       {TriggerKind::sine, TriggerKind::sawtooth, TriggerKind::random_pulse}) {
    TriggerSpec s;
    s.kind = k;
    s.period_s = 0.5;
    s.seed = 7;
    const auto w = synth_wave(s, 64, 64.0, 3.0);
    const auto [mn, mx] = std::minmax_element(w.values.begin(), w.values.end());
    CAPTURE(static_cast<int>(k));
    CHECK(*mn == doctest::Approx(0.0));
    CHECK(*mx == doctest::Approx(3.0));
  }
}

TEST_CASE("random pulse takes only the two extreme levels") {
  TriggerSpec s;
  s.kind = TriggerKind::random_pulse;
  s.seed = 11;
  const auto w = synth_wave(s, 256, 64.0, 2.0);
  int high = 0;
  for (double v : w.values) {
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
    if (v > 1.0) ++high;
  }
  // sign(U(-0.2, 0.8)) is positive with probability 0.8
  CHECK(high > 256 * 0.65);
  CHECK(high < 256 * 0.95);
}

TEST_CASE("uniform random phase stays within [0, range*T]") {
  TriggerSpec s = npp_fixed(1.0, 0.2, 0.0);
  s.phase_policy = PhasePolicy::uniform_random;
  s.random_phase_range = 0.8;
  s.seed = 3;
  bool varied = false;
  double first = -1.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto w = synth_npp(s, 16, 16.0, 1.0, i);
    CHECK(w.resolved_phase_s >= 0.0);
    CHECK(w.resolved_phase_s < 0.8);
    if (i == 0)
      first = w.resolved_phase_s;
    else if (w.resolved_phase_s != first)
      varied = true;
  }
  CHECK(varied);
}

TEST_CASE("phase stream is keyed by sample index, not call order") {
  TriggerSpec s = npp_fixed(1.0, 0.2, 0.0);
  s.phase_policy = PhasePolicy::uniform_random;
  s.seed = 9;
  const auto a = synth_npp(s, 32, 32.0, 1.0, 5);
  synth_npp(s, 32, 32.0, 1.0, 1); // unrelated draw in between
  const auto b = synth_npp(s, 32, 32.0, 1.0, 5);
  CHECK(a.values == b.values);
  CHECK(a.resolved_phase_s == b.resolved_phase_s);
}

TEST_CASE("inject broadcasts the wave to every channel") {
  Epoch e(3, 4);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 4; ++t) e.at(c, t) = 10.0 * c + t;
  e.label = 1;
  TriggerWave w;
  w.values = {0.5, 0.0, -1.0, 2.0};
  const Epoch out = inject(e, w);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 4; ++t)
      CHECK(out.at(c, t) == e.at(c, t) + w.values[t]);
  CHECK(out.label == e.label);
  CHECK(e.at(0, 0) == 0.0); // input untouched
}

TEST_CASE("zero-amplitude injection is the identity") {
  Epoch e(2, 8);
  for (int t = 0; t < 8; ++t) e.at(0, t) = std::sin(0.3 * t);
  const auto w = synth_npp(npp_fixed(1.0, 0.2, 0.0), 8, 8.0, 0.0);
  CHECK(inject(e, w).samples == e.samples);
}

TEST_CASE("inject rejects mismatched lengths") {
  Epoch e(1, 4);
  TriggerWave w;
  w.values = {1.0, 2.0};
  CHECK_THROWS_AS(inject(e, w), ValidationError);
}

TEST_CASE("reference std matches a hand-computed mean of channel stds") {
  SubjectDataset ds;
  ds.subject_id = "s0";
  ds.sampling_rate_hz = 4.0;
  ds.class_names = {"a", "b"};
  Epoch e(2, 4);
  e.label = 0;
  // channel 0: {0,2,0,2} -> std 1; channel 1: {1,1,1,1} -> std 0
  e.at(0, 1) = 2.0;
  e.at(0, 3) = 2.0;
  for (int t = 0; t < 4; ++t) e.at(1, t) = 1.0;
  ds.epochs = {e};
  CHECK(reference_std({ds}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("spec validation rejects out-of-range parameters") {
  TriggerSpec s;
  s.amplitude_fraction = -0.1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = TriggerSpec{};
  s.duty_cycle = 1.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = TriggerSpec{};
  s.period_s = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = TriggerSpec{};
  s.phase_policy = PhasePolicy::fixed;
  s.fixed_phase_s = 1.0; // == period
  CHECK_THROWS_AS(s.validate(), ValidationError);
}
