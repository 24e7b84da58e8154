#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "ptl/config.hpp"
#include "ptl/data.hpp"
#include "ptl/errors.hpp"
#include "ptl/harness.hpp"
#include "ptl/model.hpp"
#include "ptl/trigger.hpp"

using namespace ptl;
namespace fs = std::filesystem;

namespace {

std::vector<SubjectDataset> tiny_domains(int subjects, int per_class,
                                         std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_subjects = subjects;
  spec.epochs_per_class = per_class;
  spec.channels = 3;
  spec.epoch_len = 16;
  spec.sampling_rate_hz = 16.0;
  spec.class_freqs_hz = {3.0, 6.0};
  spec.seed = seed;
  return generate_synthetic(spec);
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.train.max_epochs = 30;
  cfg.train.patience = 8;
  cfg.seed = 5;
  return cfg;
}

int dominant_bin(std::span<const double> x) {
  const int L = static_cast<int>(x.size());
  int best = 0;
  double best_mag = -1.0;
  for (int k = 0; k <= L / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (int t = 0; t < L; ++t) {
      const double a = 2.0 * std::numbers::pi * k * t / L;
      re += x[t] * std::cos(a);
      im -= x[t] * std::sin(a);
    }
    const double mag = re * re + im * im;
    if (k > 0 && mag > best_mag) { // skip DC
      best_mag = mag;
      best = k;
    }
  }
  return best;
}

} // namespace

// --------------------------------------------------------------------------
// metrics

TEST_CASE("bca hand-counted examples") {
  CHECK(bca({0, 1, 0, 1}, {0, 1, 0, 1}) == 1.0);
  CHECK(bca({0, 0, 0, 0}, {0, 0, 1, 1}) == 0.5);
  // 9/10 right in class 0, 1/2 right in class 1 -> (0.9 + 0.5)/2
  std::vector<int> labels(12, 0), preds(12, 0);
  labels[10] = labels[11] = 1;
  preds[9] = 1;  // one class-0 sample wrong
  preds[10] = 1; // one class-1 sample right
  preds[11] = 0; // one class-1 sample wrong
  CHECK(bca(preds, labels) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("bca rejects degenerate inputs") {
  CHECK_THROWS_AS(bca({0, 1}, {0, 2}), ValidationError); // class 1 empty
  CHECK_THROWS_AS(bca({0}, {0, 1}), ValidationError);
  CHECK_THROWS_AS(bca({}, {}), ValidationError);
}

TEST_CASE("asr is absent when the attackable set is empty") {
  const auto domains = tiny_domains(2, 8, 3);
  // bias-only model that always predicts the target class
  ProbabilisticModel m;
  m.kind = ModelKind::logreg;
  m.n_classes = 2;
  m.channels = 3;
  m.len = 16;
  m.params.assign(2 * (3 * 16 + 1), 0.0);
  m.params.back() = 100.0; // class-1 bias
  TriggerSpec trig;
  const auto res = asr(m, domains[0].epochs, nullptr, trig, 1.0, 1, 16.0);
  CHECK(!res.asr.has_value());
  CHECK(res.n_attackable == 0);
}

TEST_CASE("zero-amplitude trigger yields asr exactly zero") {
  const auto domains = tiny_domains(2, 10, 7);
  std::vector<Epoch> pool;
  for (const auto& ds : domains)
    pool.insert(pool.end(), ds.epochs.begin(), ds.epochs.end());
  TrainConfig tc;
  tc.seed = 2;
  tc.max_epochs = 30;
  const auto model = train(pool, tc, ModelKind::logreg);
  TriggerSpec trig;
  const auto res = asr(model, domains[0].epochs, nullptr, trig, 0.0, 1, 16.0);
  REQUIRE(res.asr.has_value());
  CHECK(res.n_attackable > 0);
  CHECK(*res.asr == 0.0);
}

TEST_CASE("asr equals an independent recount over the attackable set") {
  const auto domains = tiny_domains(3, 10, 9);
  std::vector<Epoch> pool;
  for (int s = 0; s < 2; ++s)
    pool.insert(pool.end(), domains[s].epochs.begin(),
                domains[s].epochs.end());
  TrainConfig tc;
  tc.seed = 4;
  tc.max_epochs = 30;
  const auto model = train(pool, tc, ModelKind::logreg);
  TriggerSpec trig;
  trig.seed = 11;
  const double amp = 2.0;
  const auto res = asr(model, domains[2].epochs, nullptr, trig, amp, 1, 16.0);

  int attackable = 0, success = 0;
  const auto& eval = domains[2].epochs;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    if (!eval[i].label || *eval[i].label == 1) continue;
    if (predict(model, eval[i]) != *eval[i].label) continue;
    ++attackable;
    const auto w =
        synth_trigger(trig, eval[i].len, 16.0, amp, 0xA500000000ULL + i);
    if (predict(model, inject(eval[i], w)) == 1) ++success;
  }
  CHECK(res.n_attackable == attackable);
  if (attackable > 0) {
    REQUIRE(res.asr.has_value());
    CHECK(*res.asr ==
          doctest::Approx(double(success) / attackable).epsilon(1e-12));
  }
}

// --------------------------------------------------------------------------
// augmentation

TEST_CASE("augment doubles the set; magnitude zero copies are identical") {
  const auto domains = tiny_domains(1, 6, 13);
  const auto& epochs = domains[0].epochs;
  for (AugmentKind k :
       {AugmentKind::noise, AugmentKind::multiplication,
        AugmentKind::frequency_shift, AugmentKind::channel_weaken}) {
    AugmentSpec spec;
    spec.kind = k;
    spec.magnitude = 0.0;
    spec.seed = 1;
    const auto out = augment(epochs, spec);
    REQUIRE(out.size() == 2 * epochs.size());
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      CHECK(out[i].samples == epochs[i].samples);
      CHECK(out[epochs.size() + i].samples == epochs[i].samples);
      CHECK(out[epochs.size() + i].label == epochs[i].label);
    }
  }
}

TEST_CASE("noise augmentation preserves the label multiset") {
  const auto domains = tiny_domains(1, 6, 17);
  AugmentSpec spec;
  spec.kind = AugmentKind::noise;
  spec.magnitude = 0.2;
  const auto out = augment(domains[0].epochs, spec);
  std::multiset<int> orig, doubled;
  for (const auto& e : domains[0].epochs) {
    orig.insert(*e.label);
    orig.insert(*e.label);
  }
  for (const auto& e : out) doubled.insert(*e.label);
  CHECK(orig == doubled);
  // copies actually perturbed
  CHECK(out[domains[0].epochs.size()].samples !=
        domains[0].epochs[0].samples);
}

TEST_CASE("frequency shift moves the dominant frequency proportionally") {
  // pure bin-8 sinusoid, 64 samples
  std::vector<Epoch> epochs;
  for (int i = 0; i < 30; ++i) {
    Epoch e(1, 64);
    e.label = 0;
    for (int t = 0; t < 64; ++t)
      e.at(0, t) = std::sin(2.0 * std::numbers::pi * 8.0 * t / 64.0);
    epochs.push_back(std::move(e));
  }
  AugmentSpec spec;
  spec.kind = AugmentKind::frequency_shift;
  spec.magnitude = 0.25; // stretch factor in [0.75, 1.25] -> bins 6..10
  spec.seed = 2;
  const auto out = augment(epochs, spec);
  std::set<int> bins;
  for (std::size_t i = epochs.size(); i < out.size(); ++i) {
    const int b = dominant_bin(out[i].row(0));
    CHECK(b >= 5);
    CHECK(b <= 11);
    bins.insert(b);
  }
  CHECK(bins.size() >= 3); // both directions explored
}

TEST_CASE("channel weaken halves a magnitude-fraction of channels") {
  std::vector<Epoch> epochs;
  Epoch e(4, 8);
  e.label = 0;
  for (double& v : e.samples) v = 2.0;
  epochs.push_back(e);
  AugmentSpec spec;
  spec.kind = AugmentKind::channel_weaken;
  spec.magnitude = 0.5; // 2 of 4 channels
  const auto out = augment(epochs, spec);
  int halved = 0;
  for (int c = 0; c < 4; ++c) {
    if (out[1].at(c, 0) == 1.0)
      ++halved;
    else
      CHECK(out[1].at(c, 0) == 2.0);
  }
  CHECK(halved == 2);
}

TEST_CASE("invalid augmentation magnitudes are rejected") {
  AugmentSpec spec;
  spec.magnitude = -0.1;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.magnitude = 1.0;
  spec.kind = AugmentKind::frequency_shift;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

// --------------------------------------------------------------------------
// folds and experiments

TEST_CASE("rate-0 attack equals baseline bitwise") {
  const auto domains = tiny_domains(3, 8, 19);
  ExperimentConfig base = tiny_config();
  base.scenario = Scenario::baseline;
  base.poisoning_rate = 0.0;
  ExperimentConfig atk = tiny_config();
  atk.scenario = Scenario::attack;
  atk.poisoning_rate = 0.0;
  const auto rb = run_experiment(domains, base);
  const auto ra = run_experiment(domains, atk);
  REQUIRE(rb.folds.size() == ra.folds.size());
  for (std::size_t i = 0; i < rb.folds.size(); ++i) {
    CHECK(rb.folds[i].bca == ra.folds[i].bca);
    CHECK(rb.folds[i].asr == ra.folds[i].asr);
    CHECK(rb.folds[i].n_attackable == ra.folds[i].n_attackable);
  }
}

TEST_CASE("run_experiment produces one fold per subject per repeat") {
  const auto domains = tiny_domains(3, 6, 23);
  ExperimentConfig cfg = tiny_config();
  cfg.scenario = Scenario::baseline;
  cfg.poisoning_rate = 0.0;
  cfg.repeats = 2;
  const auto res = run_experiment(domains, cfg);
  CHECK(res.folds.size() == 6);
  std::set<std::pair<int, std::string>> seen;
  for (const auto& f : res.folds) {
    CHECK(f.error.empty());
    seen.insert({f.repeat, f.target_subject});
  }
  CHECK(seen.size() == 6); // every subject once per repeat
}

TEST_CASE("experiment is reproducible modulo timing") {
  const auto domains = tiny_domains(3, 8, 29);
  ExperimentConfig cfg = tiny_config();
  cfg.poisoning_rate = 0.1;
  const auto a = run_experiment(domains, cfg);
  const auto b = run_experiment(domains, cfg);
  CHECK(experiment_to_json(a, false) == experiment_to_json(b, false));
}

TEST_CASE("a failing fold is recorded, not thrown") {
  const auto domains = tiny_domains(3, 6, 31); // 2 classes only
  ExperimentConfig cfg = tiny_config();
  cfg.scenario = Scenario::cross_task; // needs >= 3 classes
  const auto res = run_experiment(domains, cfg);
  for (const auto& f : res.folds) CHECK(!f.error.empty());
}

TEST_CASE("config validation bounds") {
  ExperimentConfig cfg = tiny_config();
  cfg.poisoning_rate = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = tiny_config();
  cfg.repeats = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

// --------------------------------------------------------------------------
// correlation and reporting

TEST_CASE("spearman oracles") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 25, 100}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {8, 6, 4, 2}) == doctest::Approx(-1.0));
  // tie-corrected hand computation: ranks {1, 2.5, 2.5, 4} vs {1,2,3,4}
  CHECK(spearman({1, 2, 2, 3}, {10, 20, 30, 40}) ==
        doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-12));
  CHECK(spearman({5, 5, 5}, {1, 2, 3}) == 0.0); // zero variance
  CHECK_THROWS_AS(spearman({1}, {1}), ValidationError);
}

TEST_CASE("report writes the four output files") {
  const auto domains = tiny_domains(2, 6, 37);
  ExperimentConfig cfg = tiny_config();
  cfg.poisoning_rate = 0.1;
  auto res = run_experiment(domains, cfg);
  res.config_hash = 42;

  const fs::path dir = fs::temp_directory_path() / "ptl_report";
  fs::remove_all(dir);
  report({res}, dir);

  std::ifstream is(dir / "results.json");
  REQUIRE(is.good());
  nlohmann::json j;
  is >> j;
  CHECK(j["schema_version"] == 1);
  REQUIRE(j["experiments"].size() == 1);
  CHECK(j["experiments"][0]["folds"].size() == res.folds.size());
  CHECK(j["experiments"][0]["folds"][0].contains("wall_clock_s"));

  std::ifstream csv(dir / "summary.csv");
  REQUIRE(csv.good());
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 2); // header + one repeat

  std::ifstream svg_in(dir / "curves.svg");
  REQUIRE(svg_in.good());
  std::string svg((std::istreambuf_iterator<char>(svg_in)),
                  std::istreambuf_iterator<char>());
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);

  CHECK(fs::exists(dir / "per_subject.csv"));
  fs::remove_all(dir);
}

// --------------------------------------------------------------------------
// config file interface

TEST_CASE("empty config object yields the documented defaults") {
  const auto cfg = parse_config("{}");
  CHECK(cfg.experiment.strategy == Strategy::random);
  CHECK(cfg.experiment.poisoning_rate == 0.05);
  CHECK(cfg.experiment.scenario == Scenario::attack);
  CHECK(cfg.experiment.alignment == AlignmentKind::ea);
  CHECK(cfg.experiment.trigger.kind == TriggerKind::npp);
  CHECK(cfg.experiment.trigger.period_s == 1.0);
  CHECK(cfg.experiment.trigger.duty_cycle == 0.2);
  CHECK(cfg.experiment.train.batch_size == 64);
  CHECK(cfg.synthetic.n_subjects == 8);
}

TEST_CASE("config round trips through its canonical serialization") {
  const char* text = R"({
    "strategy": "mmcs_mds",
    "poisoning_rate": 0.02,
    "scenario": "fine_tune",
    "model": "mlp1",
    "alignment": "none",
    "trigger": {"kind": "sawtooth", "period_s": 0.5},
    "train": {"optimizer": "sgd", "learning_rate": 0.01},
    "synthetic": {"n_subjects": 4}
  })";
  const auto cfg = parse_config(text);
  CHECK(cfg.experiment.strategy == Strategy::mmcs_mds);
  CHECK(cfg.experiment.trigger.kind == TriggerKind::sawtooth);
  CHECK(cfg.experiment.train.optimizer == Optimizer::sgd);
  const auto again = parse_config(config_to_json(cfg));
  CHECK(config_to_json(again) == config_to_json(cfg));
  CHECK(config_hash(again) == config_hash(cfg));

  auto other = cfg;
  other.experiment.seed += 1;
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config rejects unknown keys and bad enum values") {
  CHECK_THROWS_AS(parse_config(R"({"poisning_rate": 0.1})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"trigger": {"knd": "npp"}})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"strategy": "bogus"})"), ValidationError);
  CHECK_THROWS_AS(parse_config("not json"), ParseError);
}

TEST_CASE("enum names round-trip") {
  for (Scenario s : {Scenario::baseline, Scenario::attack, Scenario::fine_tune,
                     Scenario::augment, Scenario::cross_task})
    CHECK(scenario_from_name(scenario_name(s)) == s);
  for (AlignmentKind a :
       {AlignmentKind::none, AlignmentKind::ea, AlignmentKind::la})
    CHECK(alignment_from_name(alignment_name(a)) == a);
  for (AugmentKind k :
       {AugmentKind::noise, AugmentKind::multiplication,
        AugmentKind::frequency_shift, AugmentKind::channel_weaken})
    CHECK(augment_from_name(augment_name(k)) == k);
  for (ModelKind k :
       {ModelKind::logreg, ModelKind::mlp1, ModelKind::csp_logreg})
    CHECK(model_kind_from_name(model_kind_name(k)) == k);
  CHECK_THROWS_AS(scenario_from_name("x"), ValidationError);
}
