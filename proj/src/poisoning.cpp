#include "ptl/poisoning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ptl/errors.hpp"
#include "ptl/kernels.hpp"
#include "ptl/rng.hpp"

namespace ptl {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::mds: return "mds";
    case Strategy::rds: return "rds";
    case Strategy::mus: return "mus";
    case Strategy::mmcs: return "mmcs";
    case Strategy::mus_mds: return "mus_mds";
    case Strategy::mmcs_mds: return "mmcs_mds";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : {Strategy::random, Strategy::mds, Strategy::rds,
                     Strategy::mus, Strategy::mmcs, Strategy::mus_mds,
                     Strategy::mmcs_mds})
    if (name == strategy_name(s)) return s;
  throw ValidationError("unknown strategy: " + name);
}

CandidatePool build_pool(const std::vector<SubjectDataset>& domains,
                         const ProbabilisticModel& attacker_model,
                         int target_class) {
  CandidatePool pool;
  pool.target_class = target_class;
  for (int s = 0; s < static_cast<int>(domains.size()); ++s) {
    const auto& ds = domains[s];
    for (int n = 0; n < static_cast<int>(ds.epochs.size()); ++n) {
      const Epoch& e = ds.epochs[n];
      if (!e.label || *e.label == target_class) continue;
      Candidate c;
      c.domain = s;
      c.epoch = n;
      c.features = penultimate_features(attacker_model, e);
      c.posterior = posteriors(attacker_model, e);
      for (double p : c.posterior)
        if (p > 0.0) c.uncertainty -= p * std::log(p);
      c.model_change = last_layer_change(attacker_model, e, *e.label);
      pool.entries.push_back(std::move(c));
    }
  }
  if (pool.entries.empty())
    throw ValidationError("build_pool: no non-target epochs available");
  return pool;
}

namespace {

PoisonPlan make_plan(const CandidatePool& pool, Strategy strategy,
                     std::vector<int> chosen) {
  PoisonPlan plan;
  plan.strategy = strategy;
  plan.P = static_cast<int>(chosen.size());
  int max_domain = 0;
  for (const auto& c : pool.entries) max_domain = std::max(max_domain, c.domain);
  plan.per_subject_counts.assign(max_domain + 1, 0);
  for (int i : chosen) {
    const Candidate& c = pool.entries[i];
    plan.selected.push_back({c.domain, c.epoch});
    ++plan.per_subject_counts[c.domain];
  }
  return plan;
}

void check_p(const CandidatePool& pool, int P) {
  if (P < 0 || P > static_cast<int>(pool.entries.size()))
    throw ValidationError("selection: P=" + std::to_string(P) +
                          " exceeds pool size " +
                          std::to_string(pool.entries.size()));
}

// top-P indices by score; ties broken by ascending (domain, epoch)
std::vector<int> top_by_score(const CandidatePool& pool,
                              const std::vector<double>& score, int P,
                              bool descending) {
  std::vector<int> idx(pool.entries.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (score[a] != score[b])
      return descending ? score[a] > score[b] : score[a] < score[b];
    const Candidate &ca = pool.entries[a], &cb = pool.entries[b];
    return std::pair(ca.domain, ca.epoch) < std::pair(cb.domain, cb.epoch);
  });
  idx.resize(P);
  return idx;
}

std::vector<double> nearest_neighbor_distances(const CandidatePool& pool) {
  const std::size_t n = pool.entries.size();
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sq = kernels::sqdist(pool.entries[i].features,
                                        pool.entries[j].features);
      d[i] = std::min(d[i], sq);
      d[j] = std::min(d[j], sq);
    }
  }
  for (double& v : d) v = std::sqrt(v);
  return d;
}

// constant columns map to all-zeros
std::vector<double> minmax_normalize(const std::vector<double>& v) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  if (*mx > *mn) {
    const double inv = 1.0 / (*mx - *mn);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *mn) * inv;
  }
  return out;
}

// plain Euclidean k-means over candidate features, seeded and monotone
std::vector<int> feature_kmeans_medoids(const CandidatePool& pool, int k,
                                        std::uint64_t seed) {
  const int n = static_cast<int>(pool.entries.size());
  auto feat = [&](int i) -> const std::vector<double>& {
    return pool.entries[i].features;
  };
  Rng rng = Rng::stream(seed, 0x6au);

  std::vector<std::vector<double>> centers;
  centers.push_back(feat(static_cast<int>(rng.below(n))));
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = kernels::sqdist(feat(i), centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c)
        best = std::min(best, kernels::sqdist(feat(i), centers[c]));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(feat(static_cast<int>(rng.below(n))));
      continue;
    }
    double pick = rng.uniform() * total;
    int chosen = n - 1;
    for (int i = 0; i < n; ++i) {
      pick -= d2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(feat(chosen));
  }

  const std::size_t dim = feat(0).size();
  std::vector<int> assign(n, -1);
  double prev_cost = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      int best_c = 0;
      double best = kernels::sqdist(feat(i), centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = kernels::sqdist(feat(i), centers[c]);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      if (assign[i] != best_c) changed = true;
      assign[i] = best_c;
      cost += best;
    }
    if (cost > prev_cost + 1e-9)
      throw NumericalError("feature k-means: cost increased");
    prev_cost = cost;
    if (!changed && iter > 0) break;

    std::vector<int> counts(k, 0);
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    for (int i = 0; i < n; ++i) {
      kernels::add(sums[assign[i]], feat(i), sums[assign[i]]);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers[c] = sums[c];
        kernels::scale(1.0 / counts[c], centers[c]);
      } else {
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = kernels::sqdist(feat(i), centers[assign[i]]);
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centers[c] = feat(far_i);
        prev_cost = std::numeric_limits<double>::infinity();
      }
    }
  }

  // one nearest-to-center sample per cluster
  std::vector<int> medoid(k, -1);
  std::vector<double> medoid_d(k, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) {
    const double d = kernels::sqdist(feat(i), centers[assign[i]]);
    const int c = assign[i];
    if (d < medoid_d[c] ||
        (d == medoid_d[c] && medoid[c] >= 0 &&
         std::pair(pool.entries[i].domain, pool.entries[i].epoch) <
             std::pair(pool.entries[medoid[c]].domain,
                       pool.entries[medoid[c]].epoch))) {
      medoid_d[c] = d;
      medoid[c] = i;
    }
  }
  std::vector<int> chosen;
  for (int c = 0; c < k; ++c)
    if (medoid[c] >= 0) chosen.push_back(medoid[c]);
  return chosen;
}

} // namespace

PoisonPlan select_random(const CandidatePool& pool, int P,
                         std::uint64_t seed) {
  check_p(pool, P);
  std::vector<int> idx(pool.entries.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::stream(seed, 0x52u);
  rng.shuffle(idx);
  idx.resize(P);
  std::sort(idx.begin(), idx.end());
  return make_plan(pool, Strategy::random, idx);
}

PoisonPlan select_mds(const CandidatePool& pool, int P) {
  check_p(pool, P);
  if (pool.entries.size() < 2)
    throw ValidationError("select_mds: pool must have at least 2 entries");
  const auto d = nearest_neighbor_distances(pool);
  return make_plan(pool, Strategy::mds, top_by_score(pool, d, P, true));
}

PoisonPlan select_rds(const CandidatePool& pool, int P, std::uint64_t seed) {
  check_p(pool, P);
  if (P == 0) return make_plan(pool, Strategy::rds, {});
  auto chosen = feature_kmeans_medoids(pool, P, seed);
  std::sort(chosen.begin(), chosen.end());
  return make_plan(pool, Strategy::rds, chosen);
}

PoisonPlan select_mus(const CandidatePool& pool, int P) {
  check_p(pool, P);
  std::vector<double> u(pool.entries.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = pool.entries[i].uncertainty;
  return make_plan(pool, Strategy::mus, top_by_score(pool, u, P, false));
}

PoisonPlan select_mmcs(const CandidatePool& pool, int P) {
  check_p(pool, P);
  std::vector<double> c(pool.entries.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = pool.entries[i].model_change;
  return make_plan(pool, Strategy::mmcs, top_by_score(pool, c, P, false));
}

PoisonPlan select_combo(const CandidatePool& pool, int P, Strategy base) {
  check_p(pool, P);
  if (base != Strategy::mus && base != Strategy::mmcs)
    throw ValidationError("select_combo: base must be mus or mmcs");
  if (pool.entries.size() < 2)
    throw ValidationError("select_combo: pool must have at least 2 entries");

  const auto nd = minmax_normalize(nearest_neighbor_distances(pool));
  std::vector<double> second(pool.entries.size());
  for (std::size_t i = 0; i < second.size(); ++i)
    second[i] = base == Strategy::mus ? pool.entries[i].uncertainty
                                      : pool.entries[i].model_change;
  const auto ns = minmax_normalize(second);

  std::vector<double> score(pool.entries.size());
  for (std::size_t i = 0; i < score.size(); ++i) score[i] = nd[i] - ns[i];
  const Strategy s =
      base == Strategy::mus ? Strategy::mus_mds : Strategy::mmcs_mds;
  return make_plan(pool, s, top_by_score(pool, score, P, true));
}

PoisonPlan select(const CandidatePool& pool, Strategy strategy, int P,
                  std::uint64_t seed) {
  switch (strategy) {
    case Strategy::random: return select_random(pool, P, seed);
    case Strategy::mds: return select_mds(pool, P);
    case Strategy::rds: return select_rds(pool, P, seed);
    case Strategy::mus: return select_mus(pool, P);
    case Strategy::mmcs: return select_mmcs(pool, P);
    case Strategy::mus_mds: return select_combo(pool, P, Strategy::mus);
    case Strategy::mmcs_mds: return select_combo(pool, P, Strategy::mmcs);
  }
  throw ValidationError("unknown strategy");
}

std::vector<SubjectDataset> apply_plan(
    const std::vector<SubjectDataset>& domains, const PoisonPlan& plan,
    const TriggerSpec& trigger_spec, double amplitude_abs, int target_class) {
  std::vector<SubjectDataset> out = domains;
  for (const auto& [s, n] : plan.selected) {
    if (s < 0 || s >= static_cast<int>(out.size()) || n < 0 ||
        n >= static_cast<int>(out[s].epochs.size()))
      throw ValidationError("apply_plan: index out of range");
    Epoch& e = out[s].epochs[n];
    // phase stream keyed by the epoch's identity, not its selection order
    const std::uint64_t key =
        (static_cast<std::uint64_t>(s) << 32) | static_cast<std::uint64_t>(n);
    const TriggerWave w = synth_trigger(trigger_spec, e.len,
                                        out[s].sampling_rate_hz,
                                        amplitude_abs, key);
    e = inject(e, w);
    e.label = target_class;
  }
  return out;
}

void save_plan_json(const PoisonPlan& plan, const std::filesystem::path& path,
                    int n_subjects) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["strategy"] = strategy_name(plan.strategy);
  j["P"] = plan.P;
  std::vector<int> counts(static_cast<std::size_t>(n_subjects), 0);
  for (std::size_t i = 0;
       i < plan.per_subject_counts.size() && i < counts.size(); ++i)
    counts[i] = plan.per_subject_counts[i];
  j["per_subject_counts"] = counts;
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const auto& [s, n] : plan.selected)
    entries.push_back({{"subject", s}, {"epoch", n}});
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  os << j.dump(2) << "\n";
}

} // namespace ptl
