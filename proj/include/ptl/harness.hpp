#ifndef PTL_HARNESS_HPP
#define PTL_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ptl/alignment.hpp"
#include "ptl/data.hpp"
#include "ptl/model.hpp"
#include "ptl/poisoning.hpp"
#include "ptl/trigger.hpp"

namespace ptl {

enum class Scenario { baseline, attack, fine_tune, augment, cross_task };
enum class AlignmentKind { none, ea, la };
enum class AugmentKind { noise, multiplication, frequency_shift, channel_weaken };

const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);
const char* alignment_name(AlignmentKind a);
AlignmentKind alignment_from_name(const std::string& name);
const char* augment_name(AugmentKind k);
AugmentKind augment_from_name(const std::string& name);
const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

struct AugmentSpec {
  AugmentKind kind = AugmentKind::noise;
  double magnitude = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ExperimentConfig {
  Strategy strategy = Strategy::random;
  double poisoning_rate = 0.05;
  int target_class = 1;
  TriggerSpec trigger;
  Scenario scenario = Scenario::attack;
  ModelKind model_kind = ModelKind::logreg;
  ModelKind attacker_model_kind = ModelKind::logreg;
  AlignmentKind alignment = AlignmentKind::ea;
  std::uint64_t seed = 1;
  int repeats = 1;
  bool undersample = false;
  double finetune_label_fraction = 0.2;
  AugmentSpec augment_spec;
  TrainConfig train;
  int la_k_labeled = 10;

  void validate() const;
};

struct FoldResult {
  std::string target_subject;
  int repeat = 0;
  int fold = 0;
  double bca = 0.0;
  std::optional<double> asr;   // absent when no sample was attackable
  int n_attackable = 0;
  std::string strategy;
  double poisoning_rate = 0.0;
  std::string scenario;
  double wall_clock_s = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> plan_counts; // per-subject selection histogram
  std::string error;           // nonempty when the fold failed
};

struct ExperimentResult {
  std::string config_json;
  std::uint64_t config_hash = 0;
  std::vector<FoldResult> folds;
  double mean_bca = 0.0, std_bca = 0.0;
  double mean_asr = 0.0, std_asr = 0.0; // over folds with defined ASR
  int n_asr_folds = 0;
};

/// Mean of per-class accuracies. Every true class must be nonempty.
double bca(const std::vector<int>& preds, const std::vector<int>& labels);

/// ASR over the attackable set (correctly classified non-target epochs).
/// `pre_align` epochs receive the trigger, then the optional alignment
/// transform, mirroring deployment where the trigger rides on the raw input.
struct AsrResult {
  std::optional<double> asr;
  int n_attackable = 0;
};
AsrResult asr(const ProbabilisticModel& model,
              const std::vector<Epoch>& pre_align_epochs,
              const Eigen::MatrixXd* align_transform,
              const TriggerSpec& trigger_spec, double amplitude_abs,
              int target_class, double f_s);

/// Appends one transformed copy of every epoch (set doubles). Labels kept.
std::vector<Epoch> augment(const std::vector<Epoch>& epochs,
                           const AugmentSpec& spec);

FoldResult run_fold(const std::vector<SubjectDataset>& domains, int target_idx,
                    const ExperimentConfig& cfg, int repeat = 0);

ExperimentResult run_experiment(const std::vector<SubjectDataset>& domains,
                                const ExperimentConfig& cfg);

void report(const std::vector<ExperimentResult>& results,
            const std::filesystem::path& out_dir);

/// Spearman rank correlation (tie-corrected, Pearson on ranks).
double spearman(const std::vector<double>& x, const std::vector<double>& y);

std::string experiment_to_json(const ExperimentResult& r, bool with_timing);

} // namespace ptl

#endif
