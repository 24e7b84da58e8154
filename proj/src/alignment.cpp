#include "ptl/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "ptl/errors.hpp"
#include "ptl/rng.hpp"

namespace ptl {

namespace {

constexpr double kRidgeEps = 1e-10;

void add_ridge(Eigen::MatrixXd& r) {
  const int c = static_cast<int>(r.rows());
  r += (kRidgeEps * r.trace() / c) * Eigen::MatrixXd::Identity(c, c);
}

Eigen::Map<const Eigen::MatrixXd> as_matrix(const Epoch& e) {
  // row-major C x L storage viewed as column-major L x C, hence transposes
  // below are arranged so X is C x L
  return {e.samples.data(), e.len, e.channels};
}

Eigen::MatrixXd epoch_matrix(const Epoch& e) {
  return as_matrix(e).transpose(); // C x L
}

void eig_spd(const SpdMatrix& r, Eigen::VectorXd& evals, Eigen::MatrixXd& evecs) {
  if ((r - r.transpose()).norm() > 1e-10 * std::max(1.0, r.norm()))
    throw NumericalError("matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition failed");
  evals = es.eigenvalues();
  evecs = es.eigenvectors();
  const double floor = 1e-14 * std::max(1.0, evals.cwiseAbs().maxCoeff());
  for (int i = 0; i < evals.size(); ++i)
    if (evals[i] <= floor)
      throw NumericalError("eigenvalue below floor: " +
                           std::to_string(evals[i]));
}

Eigen::MatrixXd spd_function(const SpdMatrix& r, double (*fn)(double)) {
  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  eig_spd(r, evals, evecs);
  Eigen::VectorXd mapped(evals.size());
  for (int i = 0; i < evals.size(); ++i) mapped[i] = fn(evals[i]);
  return evecs * mapped.asDiagonal() * evecs.transpose();
}

} // namespace

SpdMatrix epoch_covariance(const Epoch& e) {
  Eigen::MatrixXd x = epoch_matrix(e);
  Eigen::MatrixXd r = x * x.transpose();
  add_ridge(r);
  return r;
}

SpdMatrix mean_covariance(const SubjectDataset& ds) {
  if (ds.epochs.empty()) throw ValidationError("mean_covariance: no epochs");
  const int c = ds.channels();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(c, c);
  for (const Epoch& e : ds.epochs) {
    Eigen::MatrixXd x = epoch_matrix(e);
    acc += x * x.transpose();
  }
  acc /= static_cast<double>(ds.epochs.size());
  add_ridge(acc);
  return acc;
}

SpdMatrix class_mean_covariance(const SubjectDataset& ds, int label) {
  const int c = ds.channels();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(c, c);
  int n = 0;
  for (const Epoch& e : ds.epochs) {
    if (!e.label || *e.label != label) continue;
    Eigen::MatrixXd x = epoch_matrix(e);
    acc += x * x.transpose();
    ++n;
  }
  if (n == 0)
    throw ValidationError("class_mean_covariance: no epochs with label " +
                          std::to_string(label));
  acc /= static_cast<double>(n);
  add_ridge(acc);
  return acc;
}

Eigen::MatrixXd inv_sqrt(const SpdMatrix& r) {
  return spd_function(r, [](double v) { return 1.0 / std::sqrt(v); });
}

Eigen::MatrixXd sqrt_spd(const SpdMatrix& r) {
  return spd_function(r, [](double v) { return std::sqrt(v); });
}

Eigen::MatrixXd log_spd(const SpdMatrix& r) {
  return spd_function(r, [](double v) { return std::log(v); });
}

double riemannian_distance(const SpdMatrix& a, const SpdMatrix& b) {
  Eigen::MatrixXd w = inv_sqrt(a);
  Eigen::MatrixXd m = w * b * w;
  m = 0.5 * (m + m.transpose()); // symmetrize roundoff
  return log_spd(m).norm();
}

Epoch premultiply(const Eigen::MatrixXd& m, const Epoch& e) {
  Epoch out = e;
  Eigen::MatrixXd x = m * epoch_matrix(e); // C x L
  for (int c = 0; c < out.channels; ++c)
    for (int t = 0; t < out.len; ++t) out.at(c, t) = x(c, t);
  return out;
}

SubjectDataset ea_align(const SubjectDataset& ds) {
  const Eigen::MatrixXd w = inv_sqrt(mean_covariance(ds));
  SubjectDataset out = ds;
  for (auto& e : out.epochs) e = premultiply(w, e);
  return out;
}

// ---------------------------------------------------------------------------
// covariance k-means (log-Euclidean space, so Lloyd iterations are monotone)

namespace {

Eigen::VectorXd vec_log(const SpdMatrix& p) {
  Eigen::MatrixXd l = log_spd(p);
  return Eigen::Map<Eigen::VectorXd>(l.data(), l.size());
}

} // namespace

SpdKmeansResult spd_kmeans(const std::vector<SpdMatrix>& points, int k,
                           std::uint64_t seed, int max_iters) {
  const int n = static_cast<int>(points.size());
  if (k < 1 || k > n)
    throw ValidationError("spd_kmeans: need 1 <= k <= n_points");

  std::vector<Eigen::VectorXd> logs(n);
  for (int i = 0; i < n; ++i) logs[i] = vec_log(points[i]);

  Rng rng = Rng::stream(seed, 0x6bu);

  // k-means++ style seeding
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(logs[rng.below(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = (logs[i] - centers[0]).squaredNorm();
      for (std::size_t c = 1; c < centers.size(); ++c)
        best = std::min(best, (logs[i] - centers[c]).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(logs[rng.below(n)]);
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
    centers.push_back(logs[chosen]);
  }

  std::vector<int> assign(n, -1);
  double prev_cost = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      int best_c = 0;
      double best = (logs[i] - centers[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (logs[i] - centers[c]).squaredNorm();
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
      throw NumericalError("spd_kmeans: cost increased across iterations");
    prev_cost = cost;
    if (!changed && iter > 0) break;

    std::vector<int> counts(k, 0);
    std::vector<Eigen::VectorXd> sums(
        k, Eigen::VectorXd::Zero(logs[0].size()));
    for (int i = 0; i < n; ++i) {
      sums[assign[i]] += logs[i];
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers[c] = sums[c] / counts[c];
      } else {
        // re-seed from the point farthest from its center
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = (logs[i] - centers[assign[i]]).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centers[c] = logs[far_i];
        prev_cost = std::numeric_limits<double>::infinity();
      }
    }
  }

  SpdKmeansResult res;
  res.assignment = std::move(assign);
  res.cost = prev_cost;
  const int c_dim = static_cast<int>(points[0].rows());
  for (int c = 0; c < k; ++c) {
    Eigen::MatrixXd l =
        Eigen::Map<Eigen::MatrixXd>(centers[c].data(), c_dim, c_dim);
    l = 0.5 * (l + l.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) ev[i] = std::exp(ev[i]);
    res.centers.push_back(es.eigenvectors() * ev.asDiagonal() *
                          es.eigenvectors().transpose());
  }
  return res;
}

std::vector<SpdMatrix> target_pseudo_covs(const SubjectDataset& target, int M,
                                          int k_labeled, std::uint64_t seed) {
  const int n = static_cast<int>(target.epochs.size());
  if (n < M) throw ValidationError("target_pseudo_covs: fewer epochs than M");
  if (k_labeled < M)
    throw ValidationError("target_pseudo_covs: k_labeled must be >= M");
  k_labeled = std::min(k_labeled, n);

  std::vector<SpdMatrix> covs(n);
  for (int i = 0; i < n; ++i) covs[i] = epoch_covariance(target.epochs[i]);

  auto km = spd_kmeans(covs, M, seed);

  // rank epochs within each cluster by distance to its center, then reveal
  // round-robin across clusters until k_labeled epochs are labeled
  std::vector<std::vector<std::pair<double, int>>> ranked(M);
  for (int i = 0; i < n; ++i) {
    const double d = riemannian_distance(km.centers[km.assignment[i]], covs[i]);
    ranked[km.assignment[i]].push_back({d, i});
  }
  for (auto& r : ranked) std::sort(r.begin(), r.end());

  std::vector<int> revealed;
  for (std::size_t rank = 0; static_cast<int>(revealed.size()) < k_labeled;
       ++rank) {
    bool any = false;
    for (int c = 0; c < M && static_cast<int>(revealed.size()) < k_labeled;
         ++c) {
      if (rank < ranked[c].size()) {
        revealed.push_back(ranked[c][rank].second);
        any = true;
      }
    }
    if (!any) break;
  }

  const int c_dim = target.channels();
  std::vector<Eigen::MatrixXd> acc(M, Eigen::MatrixXd::Zero(c_dim, c_dim));
  std::vector<int> counts(M, 0);
  for (int i : revealed) {
    const auto& lbl = target.epochs[i].label;
    if (!lbl)
      throw ValidationError("target_pseudo_covs: revealed epoch is unlabeled");
    Eigen::MatrixXd x = epoch_matrix(target.epochs[i]);
    acc[*lbl] += x * x.transpose();
    ++counts[*lbl];
  }

  std::vector<SpdMatrix> out(M);
  for (int m = 0; m < M; ++m) {
    if (counts[m] == 0) {
      std::cerr << "warning: class " << m
                << " received no revealed target epochs; using global "
                   "target covariance\n";
      out[m] = mean_covariance(target);
    } else {
      out[m] = acc[m] / counts[m];
      add_ridge(out[m]);
    }
  }
  return out;
}

std::map<int, int> match_labels(const std::vector<std::string>& source_classes,
                                const std::vector<std::string>& target_classes,
                                std::uint64_t seed) {
  if (source_classes.size() != target_classes.size())
    throw ValidationError("match_labels: class counts differ");
  std::map<int, int> matching;
  std::vector<int> src_left, tgt_left;
  for (int m = 0; m < static_cast<int>(source_classes.size()); ++m) {
    auto it = std::find(target_classes.begin(), target_classes.end(),
                        source_classes[m]);
    if (it != target_classes.end())
      matching[m] = static_cast<int>(it - target_classes.begin());
    else
      src_left.push_back(m);
  }
  for (int t = 0; t < static_cast<int>(target_classes.size()); ++t) {
    bool taken = false;
    for (const auto& [s, tt] : matching) taken |= (tt == t);
    if (!taken) tgt_left.push_back(t);
  }
  Rng rng = Rng::stream(seed, 0x6cu);
  rng.shuffle(tgt_left);
  for (std::size_t i = 0; i < src_left.size(); ++i)
    matching[src_left[i]] = tgt_left[i];
  return matching;
}

SubjectDataset la_transform(const SubjectDataset& source,
                            const std::vector<SpdMatrix>& target_class_covs,
                            const std::map<int, int>& label_matching) {
  SubjectDataset out = source;
  std::map<int, std::pair<Eigen::MatrixXd, int>> transforms;
  std::vector<int> present;
  for (const auto& e : source.epochs)
    if (e.label &&
        std::find(present.begin(), present.end(), *e.label) == present.end())
      present.push_back(*e.label);

  for (int m : present) {
    auto it = label_matching.find(m);
    if (it == label_matching.end())
      throw ValidationError("la_transform: source class " +
                            std::to_string(m) + " has no label match");
    const int t = it->second;
    if (t < 0 || t >= static_cast<int>(target_class_covs.size()))
      throw ValidationError("la_transform: matched class out of range");

    SpdMatrix rs;
    try {
      rs = class_mean_covariance(source, m);
    } catch (const ValidationError&) {
      std::cerr << "warning: la_transform: class " << m
                << " has no epochs, skipped\n";
      continue;
    }
    transforms[m] = {sqrt_spd(target_class_covs[t]) * inv_sqrt(rs), t};
  }

  // single pass keyed on the original label, so relabeling cannot cascade
  for (std::size_t i = 0; i < source.epochs.size(); ++i) {
    const auto& lbl = source.epochs[i].label;
    if (!lbl) continue;
    auto it = transforms.find(*lbl);
    if (it == transforms.end()) continue;
    out.epochs[i] = premultiply(it->second.first, source.epochs[i]);
    out.epochs[i].label = it->second.second;
  }
  return out;
}

} // namespace ptl
