#ifndef PTL_POISONING_HPP
#define PTL_POISONING_HPP

#include <cstdint>
#include <vector>

#include "ptl/data.hpp"
#include "ptl/model.hpp"
#include "ptl/trigger.hpp"

namespace ptl {

enum class Strategy { random, mds, rds, mus, mmcs, mus_mds, mmcs_mds };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

/// Per-sample quantities for every non-target-class source epoch.
struct Candidate {
  int domain = 0;             // source subject index
  int epoch = 0;              // epoch index within that subject
  std::vector<double> features; // penultimate features of the attacker model
  std::vector<double> posterior;
  double uncertainty = 0.0;   // Shannon entropy, natural log
  double model_change = 0.0;  // last-layer gradient norm at the true label
};

struct CandidatePool {
  std::vector<Candidate> entries;
  int target_class = 0;
};

struct PoisonPlan {
  std::vector<std::pair<int, int>> selected; // (domain, epoch)
  Strategy strategy = Strategy::random;
  int P = 0;
  std::vector<int> per_subject_counts;
};

CandidatePool build_pool(const std::vector<SubjectDataset>& domains,
                         const ProbabilisticModel& attacker_model,
                         int target_class);

PoisonPlan select_random(const CandidatePool& pool, int P, std::uint64_t seed);
PoisonPlan select_mds(const CandidatePool& pool, int P);
PoisonPlan select_rds(const CandidatePool& pool, int P, std::uint64_t seed);
PoisonPlan select_mus(const CandidatePool& pool, int P);
PoisonPlan select_mmcs(const CandidatePool& pool, int P);
/// base must be mus or mmcs; the min-max-normalized diversity/score combo.
PoisonPlan select_combo(const CandidatePool& pool, int P, Strategy base);

PoisonPlan select(const CandidatePool& pool, Strategy strategy, int P,
                  std::uint64_t seed);

/// Injects the trigger (per-sample random phase) into each selected epoch
/// and relabels it to the target class. Inputs untouched.
std::vector<SubjectDataset> apply_plan(
    const std::vector<SubjectDataset>& domains, const PoisonPlan& plan,
    const TriggerSpec& trigger_spec, double amplitude_abs, int target_class);

void save_plan_json(const PoisonPlan& plan, const std::filesystem::path& path,
                    int n_subjects);

} // namespace ptl

#endif
