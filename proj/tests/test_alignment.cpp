#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ptl/alignment.hpp"
#include "ptl/data.hpp"
#include "ptl/errors.hpp"
#include "ptl/rng.hpp"

using namespace ptl;

namespace {

Eigen::MatrixXd random_spd(int n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = rng.gaussian();
  return scale * (b * b.transpose()) +
         Eigen::MatrixXd::Identity(n, n) * (0.5 * scale);
}

Eigen::MatrixXd random_invertible(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.gaussian();
  m += 3.0 * Eigen::MatrixXd::Identity(n, n);
  return m;
}

} // namespace

TEST_CASE("inv_sqrt multiplies back to the identity") {
  for (int n : {2, 5, 8}) {
    const auto r = random_spd(n, 10 + n);
    const auto m = inv_sqrt(r);
    CHECK((m - m.transpose()).norm() < 1e-10);
    CHECK((m * r * m - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-8);
  }
}

TEST_CASE("sqrt_spd squares back to the input") {
  const auto r = random_spd(6, 3);
  const auto s = sqrt_spd(r);
  CHECK((s * s - r).norm() < 1e-8);
  CHECK((s - s.transpose()).norm() < 1e-10);
}

TEST_CASE("log_spd of a diagonal matrix is the diagonal of logs") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  d.diagonal() << 1.0, std::exp(2.0), 0.5;
  const auto l = log_spd(d);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
  expect.diagonal() << 0.0, 2.0, std::log(0.5);
  CHECK((l - expect).norm() < 1e-10);
}

TEST_CASE("non-SPD inputs are rejected") {
  Eigen::MatrixXd neg = Eigen::MatrixXd::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK_THROWS_AS(inv_sqrt(neg), NumericalError);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(inv_sqrt(asym), NumericalError);
}

TEST_CASE("riemannian distance against the closed diagonal form") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  d.diagonal() << 2.0, 0.5, 1.0;
  const double expect = std::sqrt(std::log(2.0) * std::log(2.0) +
                                  std::log(0.5) * std::log(0.5));
  CHECK(riemannian_distance(Eigen::MatrixXd::Identity(3, 3), d) ==
        doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("riemannian distance: symmetry, identity, affine invariance") {
  const auto a = random_spd(4, 21);
  const auto b = random_spd(4, 22);
  CHECK(riemannian_distance(a, a) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(riemannian_distance(a, b) ==
        doctest::Approx(riemannian_distance(b, a)).epsilon(1e-9));
  const auto m = random_invertible(4, 23);
  const double before = riemannian_distance(a, b);
  const double after = riemannian_distance(m * a * m.transpose(),
                                           m * b * m.transpose());
  CHECK(after == doctest::Approx(before).epsilon(1e-7));
}

TEST_CASE("mean covariance matches the direct average of Gram matrices") {
  SyntheticSpec spec;
  spec.n_subjects = 1;
  spec.epochs_per_class = 4;
  spec.channels = 4;
  spec.epoch_len = 32;
  const auto ds = generate_synthetic(spec)[0];
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(4, 4);
  for (const auto& e : ds.epochs) {
    Eigen::MatrixXd x(4, 32);
    for (int c = 0; c < 4; ++c)
      for (int t = 0; t < 32; ++t) x(c, t) = e.at(c, t);
    acc += x * x.transpose();
  }
  acc /= static_cast<double>(ds.epochs.size());
  CHECK((mean_covariance(ds) - acc).norm() < 1e-6 * acc.norm());
}

TEST_CASE("EA drives every subject's mean covariance to the identity") {
  SyntheticSpec spec;
  spec.n_subjects = 3;
  spec.epochs_per_class = 10;
  const auto domains = generate_synthetic(spec);
  for (const auto& ds : domains) {
    const auto aligned = ea_align(ds);
    const auto r = mean_covariance(aligned);
    CHECK((r - Eigen::MatrixXd::Identity(r.rows(), r.cols())).norm() < 1e-6);
    // labels and shapes survive
    for (std::size_t n = 0; n < ds.epochs.size(); ++n)
      CHECK(aligned.epochs[n].label == ds.epochs[n].label);
  }
}

TEST_CASE("premultiply is the matrix action on each column") {
  Epoch e(2, 3);
  e.at(0, 0) = 1.0; e.at(0, 1) = 2.0; e.at(0, 2) = 3.0;
  e.at(1, 0) = 4.0; e.at(1, 1) = 5.0; e.at(1, 2) = 6.0;
  Eigen::MatrixXd m(2, 2);
  m << 0.0, 1.0, 2.0, 0.0;
  const Epoch out = premultiply(m, e);
  CHECK(out.at(0, 0) == 4.0);
  CHECK(out.at(0, 2) == 6.0);
  CHECK(out.at(1, 0) == 2.0);
  CHECK(out.at(1, 1) == 4.0);
}

TEST_CASE("spd k-means separates two well-split groups deterministically") {
  std::vector<SpdMatrix> pts;
  for (int i = 0; i < 6; ++i) pts.push_back(random_spd(3, 100 + i, 1.0));
  for (int i = 0; i < 6; ++i) pts.push_back(random_spd(3, 200 + i, 400.0));
  const auto res = spd_kmeans(pts, 2, 5);
  const auto res2 = spd_kmeans(pts, 2, 5);
  CHECK(res.assignment == res2.assignment);
  for (int i = 1; i < 6; ++i) {
    CHECK(res.assignment[i] == res.assignment[0]);
    CHECK(res.assignment[6 + i] == res.assignment[6]);
  }
  CHECK(res.assignment[0] != res.assignment[6]);
}

TEST_CASE("label matching maps identical names to themselves") {
  const auto m = match_labels({"left", "right"}, {"tongue", "right"}, 1);
  CHECK(m.at(1) == 1);          // "right" -> "right"
  CHECK(m.at(0) == 0);          // only slot left
  const auto m2 = match_labels({"a", "b"}, {"c", "d"}, 1);
  // no shared names: still a bijection onto {0,1}
  CHECK(m2.size() == 2);
  CHECK(m2.at(0) != m2.at(1));
}

TEST_CASE("LA transform reproduces the target class covariance") {
  SyntheticSpec spec;
  spec.n_subjects = 2;
  spec.epochs_per_class = 20;
  spec.channels = 4;
  const auto domains = generate_synthetic(spec);
  const SubjectDataset& src = domains[0];
  std::vector<SpdMatrix> target_covs = {
      class_mean_covariance(domains[1], 0),
      class_mean_covariance(domains[1], 1)};
  const std::map<int, int> matching = {{0, 0}, {1, 1}};
  const auto out = la_transform(src, target_covs, matching);
  for (int m = 0; m < 2; ++m) {
    const auto got = class_mean_covariance(out, m);
    CHECK((got - target_covs[m]).norm() < 1e-6);
  }
}

TEST_CASE("pseudo-label covariances: one SPD matrix per class") {
  SyntheticSpec spec;
  spec.n_subjects = 1;
  spec.epochs_per_class = 20;
  spec.channels = 4;
  const auto ds = generate_synthetic(spec)[0];
  const auto covs = target_pseudo_covs(ds, 2, 10, 3);
  REQUIRE(covs.size() == 2);
  for (const auto& c : covs) {
    CHECK(c.rows() == 4);
    CHECK((c - c.transpose()).norm() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}
