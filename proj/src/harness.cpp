#include "ptl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ptl/errors.hpp"
#include "ptl/kernels.hpp"
#include "ptl/rng.hpp"

namespace ptl {

// ---------------------------------------------------------------------------
// enum names

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::baseline: return "baseline";
    case Scenario::attack: return "attack";
    case Scenario::fine_tune: return "fine_tune";
    case Scenario::augment: return "augment";
    case Scenario::cross_task: return "cross_task";
  }
  return "?";
}

Scenario scenario_from_name(const std::string& name) {
  for (Scenario s : {Scenario::baseline, Scenario::attack, Scenario::fine_tune,
                     Scenario::augment, Scenario::cross_task})
    if (name == scenario_name(s)) return s;
  throw ValidationError("unknown scenario: " + name);
}

const char* alignment_name(AlignmentKind a) {
  switch (a) {
    case AlignmentKind::none: return "none";
    case AlignmentKind::ea: return "ea";
    case AlignmentKind::la: return "la";
  }
  return "?";
}

AlignmentKind alignment_from_name(const std::string& name) {
  for (AlignmentKind a :
       {AlignmentKind::none, AlignmentKind::ea, AlignmentKind::la})
    if (name == alignment_name(a)) return a;
  throw ValidationError("unknown alignment: " + name);
}

const char* augment_name(AugmentKind k) {
  switch (k) {
    case AugmentKind::noise: return "noise";
    case AugmentKind::multiplication: return "multiplication";
    case AugmentKind::frequency_shift: return "frequency_shift";
    case AugmentKind::channel_weaken: return "channel_weaken";
  }
  return "?";
}

AugmentKind augment_from_name(const std::string& name) {
  for (AugmentKind k :
       {AugmentKind::noise, AugmentKind::multiplication,
        AugmentKind::frequency_shift, AugmentKind::channel_weaken})
    if (name == augment_name(k)) return k;
  throw ValidationError("unknown augmentation: " + name);
}

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::mlp1: return "mlp1";
    case ModelKind::csp_logreg: return "csp_logreg";
  }
  return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
  for (ModelKind k :
       {ModelKind::logreg, ModelKind::mlp1, ModelKind::csp_logreg})
    if (name == model_kind_name(k)) return k;
  throw ValidationError("unknown model kind: " + name);
}

void AugmentSpec::validate() const {
  if (magnitude < 0.0) throw ValidationError("augment: magnitude must be >= 0");
  if (kind == AugmentKind::frequency_shift && magnitude >= 1.0)
    throw ValidationError("augment: frequency_shift magnitude must be < 1 "
                          "(stretch factor would reach 0)");
}

void ExperimentConfig::validate() const {
  if (poisoning_rate < 0.0 || poisoning_rate > 1.0)
    throw ValidationError("config: poisoning_rate must be in [0,1]");
  if (repeats < 1) throw ValidationError("config: repeats must be >= 1");
  if (target_class < 0) throw ValidationError("config: bad target_class");
  trigger.validate();
  train.validate();
  augment_spec.validate();
  if (scenario != Scenario::baseline && poisoning_rate > 0.0 &&
      trigger.amplitude_fraction <= 0.0)
    throw ValidationError("config: attack runs need amplitude_fraction > 0");
}

// ---------------------------------------------------------------------------
// metrics

double bca(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw ValidationError("bca: prediction/label length mismatch");
  if (labels.empty()) throw ValidationError("bca: empty input");
  std::map<int, std::pair<int, int>> per_class; // label -> (correct, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [correct, total] = per_class[labels[i]];
    ++total;
    if (preds[i] == labels[i]) ++correct;
  }
  const int max_label = per_class.rbegin()->first;
  for (int m = 0; m <= max_label; ++m)
    if (!per_class.count(m))
      throw ValidationError("bca: class " + std::to_string(m) +
                            " has no samples");
  double acc = 0.0;
  for (const auto& [label, ct] : per_class)
    acc += static_cast<double>(ct.first) / ct.second;
  return acc / static_cast<double>(per_class.size());
}

AsrResult asr(const ProbabilisticModel& model,
              const std::vector<Epoch>& pre_align_epochs,
              const Eigen::MatrixXd* align_transform,
              const TriggerSpec& trigger_spec, double amplitude_abs,
              int target_class, double f_s) {
  AsrResult res;
  int successes = 0;
  for (std::size_t i = 0; i < pre_align_epochs.size(); ++i) {
    const Epoch& raw = pre_align_epochs[i];
    if (!raw.label || *raw.label == target_class) continue;
    const Epoch clean =
        align_transform ? premultiply(*align_transform, raw) : raw;
    if (predict(model, clean) != *raw.label) continue; // not attackable
    ++res.n_attackable;
    const TriggerWave w = synth_trigger(trigger_spec, raw.len, f_s,
                                        amplitude_abs, 0xA500000000ULL + i);
    Epoch attacked = inject(raw, w);
    if (align_transform) attacked = premultiply(*align_transform, attacked);
    if (predict(model, attacked) == target_class) ++successes;
  }
  if (res.n_attackable > 0)
    res.asr = static_cast<double>(successes) / res.n_attackable;
  return res;
}

// ---------------------------------------------------------------------------
// augmentation

namespace {

double epochs_reference_std(const std::vector<Epoch>& epochs) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const Epoch& e : epochs) {
    const double L = static_cast<double>(e.len);
    for (int c = 0; c < e.channels; ++c) {
      auto r = e.row(c);
      const double mean = kernels::sum(r) / L;
      const double var = kernels::sumsq(r) / L - mean * mean;
      acc += std::sqrt(std::max(var, 0.0));
      ++count;
    }
  }
  return count ? acc / count : 0.0;
}

} // namespace

std::vector<Epoch> augment(const std::vector<Epoch>& epochs,
                           const AugmentSpec& spec) {
  spec.validate();
  std::vector<Epoch> out = epochs;
  out.reserve(epochs.size() * 2);
  const double ref_std = spec.kind == AugmentKind::noise
                             ? epochs_reference_std(epochs)
                             : 0.0;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    Rng rng = Rng::stream(spec.seed, 0xAAu, i);
    Epoch t = epochs[i];
    switch (spec.kind) {
      case AugmentKind::noise: {
        const double sigma = spec.magnitude * ref_std;
        if (sigma > 0.0)
          for (double& v : t.samples) v += sigma * rng.gaussian();
        break;
      }
      case AugmentKind::multiplication: {
        const double k =
            1.0 + rng.uniform(-spec.magnitude, spec.magnitude);
        kernels::scale(k, t.samples);
        break;
      }
      case AugmentKind::frequency_shift: {
        const double factor =
            1.0 + rng.uniform(-spec.magnitude, spec.magnitude);
        if (factor <= 0.0)
          throw ValidationError("augment: stretch factor <= 0");
        for (int c = 0; c < t.channels; ++c) {
          auto src = epochs[i].row(c);
          auto dst = t.row(c);
          for (int j = 0; j < t.len; ++j) {
            const double pos =
                std::min(static_cast<double>(j) * factor,
                         static_cast<double>(t.len - 1));
            const int lo = static_cast<int>(pos);
            const int hi = std::min(lo + 1, t.len - 1);
            const double frac = pos - lo;
            dst[j] = (1.0 - frac) * src[lo] + frac * src[hi];
          }
        }
        break;
      }
      case AugmentKind::channel_weaken: {
        const int n_weaken = static_cast<int>(
            std::llround(spec.magnitude * t.channels));
        std::vector<int> chans(t.channels);
        std::iota(chans.begin(), chans.end(), 0);
        rng.shuffle(chans);
        for (int c = 0; c < n_weaken; ++c) kernels::scale(0.5, t.row(chans[c]));
        break;
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// folds

namespace {

SubjectDataset undersample(const SubjectDataset& ds, std::uint64_t seed) {
  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < static_cast<int>(ds.epochs.size()); ++i)
    if (ds.epochs[i].label) by_class[*ds.epochs[i].label].push_back(i);
  std::size_t min_count = SIZE_MAX;
  for (const auto& [m, idx] : by_class)
    min_count = std::min(min_count, idx.size());
  std::vector<int> keep;
  Rng rng = Rng::stream(seed, 0x05u);
  for (auto& [m, idx] : by_class) {
    rng.shuffle(idx);
    idx.resize(min_count);
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  SubjectDataset out = ds;
  out.epochs.clear();
  for (int i : keep) out.epochs.push_back(ds.epochs[i]);
  return out;
}

TrainConfig with_seed(const TrainConfig& base, std::uint64_t seed) {
  TrainConfig cfg = base;
  cfg.seed = seed;
  return cfg;
}

std::vector<Epoch> pool_epochs(const std::vector<SubjectDataset>& domains) {
  std::vector<Epoch> out;
  for (const auto& ds : domains)
    out.insert(out.end(), ds.epochs.begin(), ds.epochs.end());
  return out;
}

// local relabeling for the cross-task split: keeps `classes` (in order),
// assigning local labels 0..M-1 and carrying the original class names
SubjectDataset take_classes(const SubjectDataset& ds,
                            const std::vector<int>& classes) {
  SubjectDataset out;
  out.subject_id = ds.subject_id;
  out.sampling_rate_hz = ds.sampling_rate_hz;
  for (int m : classes) out.class_names.push_back(ds.class_names[m]);
  for (const Epoch& e : ds.epochs) {
    if (!e.label) continue;
    auto it = std::find(classes.begin(), classes.end(), *e.label);
    if (it == classes.end()) continue;
    Epoch copy = e;
    copy.label = static_cast<int>(it - classes.begin());
    out.epochs.push_back(std::move(copy));
  }
  return out;
}

struct FoldCore {
  double bca_value = 0.0;
  AsrResult asr_result;
  std::vector<int> plan_counts;
};

FoldCore run_fold_standard(const std::vector<SubjectDataset>& all_domains,
                           int target_idx, const ExperimentConfig& cfg,
                           std::uint64_t fold_seed) {
  std::vector<SubjectDataset> sources;
  for (int s = 0; s < static_cast<int>(all_domains.size()); ++s)
    if (s != target_idx) sources.push_back(all_domains[s]);
  const SubjectDataset& target = all_domains[target_idx];

  if (cfg.undersample)
    for (std::size_t s = 0; s < sources.size(); ++s)
      sources[s] = undersample(sources[s], mix_seed(fold_seed, 0x10u, s));

  const double amp_abs =
      cfg.trigger.amplitude_fraction * reference_std(sources);

  TriggerSpec trig = cfg.trigger;
  trig.seed = mix_seed(fold_seed, 0x11u);

  FoldCore core;
  std::vector<SubjectDataset> poisoned = sources;
  if (cfg.scenario != Scenario::baseline && cfg.poisoning_rate > 0.0) {
    const ProbabilisticModel attacker =
        train(pool_epochs(sources),
              with_seed(cfg.train, mix_seed(fold_seed, 0x12u)),
              cfg.attacker_model_kind);
    const CandidatePool pool = build_pool(sources, attacker, cfg.target_class);
    const int P = static_cast<int>(
        std::llround(cfg.poisoning_rate * pool.entries.size()));
    const PoisonPlan plan =
        select(pool, cfg.strategy, P, mix_seed(fold_seed, 0x13u));
    core.plan_counts = plan.per_subject_counts;
    poisoned = apply_plan(sources, plan, trig, amp_abs, cfg.target_class);
  }

  // EA runs after poisoning; the target-side transform is what the user
  // applies to every incoming sample at test time
  std::vector<Epoch> train_epochs;
  Eigen::MatrixXd target_w;
  const Eigen::MatrixXd* align = nullptr;
  if (cfg.alignment == AlignmentKind::ea) {
    for (const auto& ds : poisoned) {
      const SubjectDataset aligned = ea_align(ds);
      train_epochs.insert(train_epochs.end(), aligned.epochs.begin(),
                          aligned.epochs.end());
    }
    target_w = inv_sqrt(mean_covariance(target));
    align = &target_w;
  } else {
    train_epochs = pool_epochs(poisoned);
  }

  if (cfg.scenario == Scenario::augment) {
    AugmentSpec aug = cfg.augment_spec;
    aug.seed = mix_seed(fold_seed, 0x14u);
    train_epochs = augment(train_epochs, aug);
  }

  ProbabilisticModel user =
      train(train_epochs, with_seed(cfg.train, mix_seed(fold_seed, 0x15u)),
            cfg.model_kind);

  // evaluation split (fine-tuning reveals a labeled fraction of the target)
  std::vector<Epoch> eval_epochs;
  if (cfg.scenario == Scenario::fine_tune) {
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < static_cast<int>(target.epochs.size()); ++i)
      if (target.epochs[i].label)
        by_class[*target.epochs[i].label].push_back(i);
    Rng rng = Rng::stream(mix_seed(fold_seed, 0x16u), 0x1u);
    std::vector<bool> revealed(target.epochs.size(), false);
    for (auto& [m, idx] : by_class) {
      rng.shuffle(idx);
      const std::size_t n_reveal = static_cast<std::size_t>(
          std::floor(cfg.finetune_label_fraction * idx.size()));
      for (std::size_t i = 0; i < n_reveal; ++i) revealed[idx[i]] = true;
    }
    std::vector<Epoch> ft_epochs;
    for (std::size_t i = 0; i < target.epochs.size(); ++i) {
      const Epoch& e = target.epochs[i];
      if (revealed[i])
        ft_epochs.push_back(align ? premultiply(*align, e) : e);
      else
        eval_epochs.push_back(e);
    }
    continue_training(user, ft_epochs,
                      with_seed(cfg.train, mix_seed(fold_seed, 0x17u)));
  } else {
    eval_epochs = target.epochs;
  }

  std::vector<int> preds, labels;
  for (const Epoch& e : eval_epochs) {
    if (!e.label) continue;
    preds.push_back(predict(user, align ? premultiply(*align, e) : e));
    labels.push_back(*e.label);
  }
  core.bca_value = bca(preds, labels);

  TriggerSpec eval_trig = cfg.trigger;
  eval_trig.seed = mix_seed(fold_seed, 0x18u);
  core.asr_result = asr(user, eval_epochs, align, eval_trig, amp_abs,
                        cfg.target_class, target.sampling_rate_hz);
  return core;
}

FoldCore run_fold_cross_task(const std::vector<SubjectDataset>& all_domains,
                             int target_idx, const ExperimentConfig& cfg,
                             std::uint64_t fold_seed) {
  // source subjects carry classes {0,1}; the target subject carries {2,1};
  // the shared class is the attack target
  if (all_domains[target_idx].n_classes() < 3)
    throw ValidationError("cross_task: needs at least 3 classes");

  std::vector<SubjectDataset> sources;
  for (int s = 0; s < static_cast<int>(all_domains.size()); ++s)
    if (s != target_idx)
      sources.push_back(take_classes(all_domains[s], {0, 1}));
  const SubjectDataset target = take_classes(all_domains[target_idx], {2, 1});
  const int src_target_class = 1; // local label of the shared class

  const double amp_abs =
      cfg.trigger.amplitude_fraction * reference_std(sources);
  TriggerSpec trig = cfg.trigger;
  trig.seed = mix_seed(fold_seed, 0x11u);

  FoldCore core;
  std::vector<SubjectDataset> poisoned = sources;
  if (cfg.poisoning_rate > 0.0) {
    const ProbabilisticModel attacker =
        train(pool_epochs(sources),
              with_seed(cfg.train, mix_seed(fold_seed, 0x12u)),
              cfg.attacker_model_kind);
    const CandidatePool pool = build_pool(sources, attacker, src_target_class);
    const int P = static_cast<int>(
        std::llround(cfg.poisoning_rate * pool.entries.size()));
    const PoisonPlan plan =
        select(pool, cfg.strategy, P, mix_seed(fold_seed, 0x13u));
    core.plan_counts = plan.per_subject_counts;
    poisoned = apply_plan(sources, plan, trig, amp_abs, src_target_class);
  }

  const auto matching = match_labels(sources.front().class_names,
                                     target.class_names,
                                     mix_seed(fold_seed, 0x19u));
  const auto target_covs = target_pseudo_covs(
      target, target.n_classes(), cfg.la_k_labeled, mix_seed(fold_seed, 0x1au));

  std::vector<Epoch> train_epochs;
  for (const auto& ds : poisoned) {
    const SubjectDataset la = la_transform(ds, target_covs, matching);
    train_epochs.insert(train_epochs.end(), la.epochs.begin(),
                        la.epochs.end());
  }

  const ProbabilisticModel user =
      train(train_epochs, with_seed(cfg.train, mix_seed(fold_seed, 0x15u)),
            cfg.model_kind);

  std::vector<int> preds, labels;
  for (const Epoch& e : target.epochs) {
    preds.push_back(predict(user, e));
    labels.push_back(*e.label);
  }
  core.bca_value = bca(preds, labels);

  TriggerSpec eval_trig = cfg.trigger;
  eval_trig.seed = mix_seed(fold_seed, 0x18u);
  core.asr_result = asr(user, target.epochs, nullptr, eval_trig, amp_abs,
                        matching.at(src_target_class),
                        target.sampling_rate_hz);
  return core;
}

} // namespace

FoldResult run_fold(const std::vector<SubjectDataset>& domains, int target_idx,
                    const ExperimentConfig& cfg, int repeat) {
  if (domains.size() < 2)
    throw ValidationError("run_fold: need at least 2 subjects");
  if (target_idx < 0 || target_idx >= static_cast<int>(domains.size()))
    throw ValidationError("run_fold: target index out of range");

  const std::uint64_t fold_seed = mix_seed(
      cfg.seed, static_cast<std::uint64_t>(repeat),
      static_cast<std::uint64_t>(target_idx));

  FoldResult fr;
  fr.target_subject = domains[target_idx].subject_id;
  fr.repeat = repeat;
  fr.fold = target_idx;
  fr.strategy = strategy_name(cfg.strategy);
  fr.poisoning_rate = cfg.poisoning_rate;
  fr.scenario = scenario_name(cfg.scenario);
  fr.seed = fold_seed;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const FoldCore core =
        cfg.scenario == Scenario::cross_task
            ? run_fold_cross_task(domains, target_idx, cfg, fold_seed)
            : run_fold_standard(domains, target_idx, cfg, fold_seed);
    fr.bca = core.bca_value;
    fr.asr = core.asr_result.asr;
    fr.n_attackable = core.asr_result.n_attackable;
    fr.plan_counts = core.plan_counts;
  } catch (const std::exception& ex) {
    fr.error = ex.what(); // a failed fold is recorded, not dropped
  }
  fr.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return fr;
}

ExperimentResult run_experiment(const std::vector<SubjectDataset>& domains,
                                const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  for (int rep = 0; rep < cfg.repeats; ++rep)
    for (int t = 0; t < static_cast<int>(domains.size()); ++t)
      res.folds.push_back(run_fold(domains, t, cfg, rep));

  double sum_b = 0.0, sumsq_b = 0.0;
  double sum_a = 0.0, sumsq_a = 0.0;
  int n_b = 0;
  for (const auto& f : res.folds) {
    if (!f.error.empty()) continue;
    sum_b += f.bca;
    sumsq_b += f.bca * f.bca;
    ++n_b;
    if (f.asr) {
      sum_a += *f.asr;
      sumsq_a += *f.asr * *f.asr;
      ++res.n_asr_folds;
    }
  }
  if (n_b > 0) {
    res.mean_bca = sum_b / n_b;
    res.std_bca = std::sqrt(std::max(0.0, sumsq_b / n_b - res.mean_bca * res.mean_bca));
  }
  if (res.n_asr_folds > 0) {
    res.mean_asr = sum_a / res.n_asr_folds;
    res.std_asr = std::sqrt(
        std::max(0.0, sumsq_a / res.n_asr_folds - res.mean_asr * res.mean_asr));
  }
  return res;
}

// ---------------------------------------------------------------------------
// reporting

std::string experiment_to_json(const ExperimentResult& r, bool with_timing) {
  nlohmann::json j;
  j["schema_version"] = 1;
  if (!r.config_json.empty())
    j["config"] = nlohmann::json::parse(r.config_json);
  j["config_hash"] = r.config_hash;
  j["mean_bca"] = r.mean_bca;
  j["std_bca"] = r.std_bca;
  j["mean_asr"] = r.mean_asr;
  j["std_asr"] = r.std_asr;
  j["n_asr_folds"] = r.n_asr_folds;
  auto& folds = j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) {
    nlohmann::json fj;
    fj["target_subject"] = f.target_subject;
    fj["repeat"] = f.repeat;
    fj["fold"] = f.fold;
    fj["bca"] = f.bca;
    if (f.asr)
      fj["asr"] = *f.asr;
    else
      fj["asr"] = nullptr;
    fj["n_attackable"] = f.n_attackable;
    fj["strategy"] = f.strategy;
    fj["poisoning_rate"] = f.poisoning_rate;
    fj["scenario"] = f.scenario;
    fj["seed"] = f.seed;
    fj["plan_counts"] = f.plan_counts;
    if (!f.error.empty()) fj["error"] = f.error;
    if (with_timing) fj["wall_clock_s"] = f.wall_clock_s;
    folds.push_back(std::move(fj));
  }
  return j.dump(2);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ValidationError("spearman: need equal-length inputs, n >= 2");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (i + j) + 1.0; // average rank for ties
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

void report(const std::vector<ExperimentResult>& results,
            const std::filesystem::path& out_dir) {
  if (results.empty()) throw ValidationError("report: no results");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  // full dump
  {
    nlohmann::json j;
    j["schema_version"] = 1;
    auto& arr = j["experiments"] = nlohmann::json::array();
    for (const auto& r : results)
      arr.push_back(nlohmann::json::parse(experiment_to_json(r, true)));
    std::ofstream os(out_dir / "results.json");
    if (!os) throw ValidationError("report: cannot write to " +
                                   out_dir.string());
    os << j.dump(2) << "\n";
  }

  // per-repeat summary rows
  {
    std::ofstream os(out_dir / "summary.csv");
    os << "strategy,poisoning_rate,scenario,repeat,bca_mean,asr_mean,"
          "n_asr_folds\n";
    for (const auto& r : results) {
      std::map<int, std::vector<const FoldResult*>> by_repeat;
      for (const auto& f : r.folds) by_repeat[f.repeat].push_back(&f);
      for (const auto& [rep, folds] : by_repeat) {
        double b = 0.0, a = 0.0;
        int nb = 0, na = 0;
        for (const auto* f : folds) {
          if (!f->error.empty()) continue;
          b += f->bca;
          ++nb;
          if (f->asr) {
            a += *f->asr;
            ++na;
          }
        }
        os << folds.front()->strategy << ',' << folds.front()->poisoning_rate
           << ',' << folds.front()->scenario << ',' << rep << ','
           << (nb ? b / nb : 0.0) << ',' << (na ? a / na : 0.0) << ',' << na
           << "\n";
      }
    }
  }

  // per-subject selection histograms (the data behind per-subject bars)
  {
    std::ofstream os(out_dir / "per_subject.csv");
    os << "strategy,poisoning_rate,repeat,fold,target_subject,source_index,"
          "selected_count\n";
    for (const auto& r : results)
      for (const auto& f : r.folds)
        for (std::size_t s = 0; s < f.plan_counts.size(); ++s)
          os << f.strategy << ',' << f.poisoning_rate << ',' << f.repeat << ','
             << f.fold << ',' << f.target_subject << ',' << s << ','
             << f.plan_counts[s] << "\n";
  }

  // BCA/ASR vs poisoning rate, one polyline pair per strategy
  {
    std::map<std::string, std::map<double, std::pair<double, double>>> series;
    for (const auto& r : results) {
      if (r.folds.empty()) continue;
      series[r.folds.front().strategy][r.folds.front().poisoning_rate] = {
          r.mean_bca, r.mean_asr};
    }
    const int w = 640, h = 400, margin = 50;
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
        << "\" height=\"" << h << "\">\n"
        << "<rect width=\"" << w << "\" height=\"" << h
        << "\" fill=\"white\"/>\n"
        << "<line x1=\"50\" y1=\"350\" x2=\"590\" y2=\"350\" "
           "stroke=\"black\"/>\n"
        << "<line x1=\"50\" y1=\"50\" x2=\"50\" y2=\"350\" "
           "stroke=\"black\"/>\n";
    double max_rate = 0.0;
    for (const auto& [name, pts] : series)
      for (const auto& [rate, v] : pts) max_rate = std::max(max_rate, rate);
    if (max_rate <= 0.0) max_rate = 1.0;
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                            "#9467bd", "#8c564b", "#e377c2"};
    int ci = 0;
    for (const auto& [name, pts] : series) {
      const char* color = colors[ci++ % 7];
      for (int metric = 0; metric < 2; ++metric) {
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-dasharray=\"" << (metric == 0 ? "" : "4 3")
            << "\" points=\"";
        for (const auto& [rate, v] : pts) {
          const double px = margin + (w - 2 * margin) * rate / max_rate;
          const double value = metric == 0 ? v.first : v.second;
          const double py = h - margin - (h - 2 * margin) * value;
          svg << px << ',' << py << ' ';
        }
        svg << "\"/>\n";
      }
      svg << "<text x=\"" << (w - margin + 2) << "\" y=\"" << (60 + 16 * ci)
          << "\" fill=\"" << color << "\" font-size=\"10\">" << name
          << "</text>\n";
    }
    svg << "<text x=\"260\" y=\"385\" font-size=\"12\">poisoning rate"
        << "</text>\n"
        << "<text x=\"10\" y=\"40\" font-size=\"12\">BCA (solid) / ASR "
           "(dashed)</text>\n</svg>\n";
    std::ofstream os(out_dir / "curves.svg");
    os << svg.str();
  }
}

} // namespace ptl
