#ifndef PTL_ALIGNMENT_HPP
#define PTL_ALIGNMENT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptl/data.hpp"

namespace ptl {

using SpdMatrix = Eigen::MatrixXd;

/// (1/N) sum X X^T over epochs, plus trace-scaled ridge.
SpdMatrix mean_covariance(const SubjectDataset& ds);
/// Same, restricted to epochs carrying the given label.
SpdMatrix class_mean_covariance(const SubjectDataset& ds, int label);
/// Single-epoch Gram X X^T plus ridge (used by covariance k-means).
SpdMatrix epoch_covariance(const Epoch& e);

/// Symmetric M with M R M = I, via eigendecomposition.
Eigen::MatrixXd inv_sqrt(const SpdMatrix& r);
/// Symmetric M with M M = R.
Eigen::MatrixXd sqrt_spd(const SpdMatrix& r);
/// Principal matrix logarithm of an SPD matrix.
Eigen::MatrixXd log_spd(const SpdMatrix& r);

/// Affine-invariant distance: ||log(A^{-1/2} B A^{-1/2})||_F.
double riemannian_distance(const SpdMatrix& a, const SpdMatrix& b);

/// Euclidean Alignment: every epoch premultiplied by inv_sqrt(mean cov).
SubjectDataset ea_align(const SubjectDataset& ds);
/// Premultiply every epoch by a fixed matrix (the user-side EA transform
/// applied to incoming test samples).
Epoch premultiply(const Eigen::MatrixXd& m, const Epoch& e);

/// k-means over SPD matrices under riemannian_distance with log-Euclidean
/// centers. Returns assignment per point.
struct SpdKmeansResult {
  std::vector<int> assignment;
  std::vector<SpdMatrix> centers;
  double cost = 0.0;
};
SpdKmeansResult spd_kmeans(const std::vector<SpdMatrix>& points, int k,
                           std::uint64_t seed, int max_iters = 100);

/// Pseudo-labeled per-class target covariances via covariance k-means.
std::vector<SpdMatrix> target_pseudo_covs(const SubjectDataset& target, int M,
                                          int k_labeled, std::uint64_t seed);

/// Identical names matched to themselves, remainder by seeded permutation.
std::map<int, int> match_labels(const std::vector<std::string>& source_classes,
                                const std::vector<std::string>& target_classes,
                                std::uint64_t seed);

/// Label Alignment: per class m, epochs premultiplied by
/// A = target_cov^{1/2} source_cov^{-1/2}, then relabeled via label_matching.
SubjectDataset la_transform(const SubjectDataset& source,
                            const std::vector<SpdMatrix>& target_class_covs,
                            const std::map<int, int>& label_matching);

} // namespace ptl

#endif
