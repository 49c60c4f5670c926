#include "eki/heat_model.hpp"
#include "eki/reference.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/QR>

using namespace eki;

namespace {

AugmentedProblem bare(const Matrix& A_tilde, const Vector& y_tilde) {
  AugmentedProblem p;
  p.A_tilde = A_tilde;
  p.y_tilde = y_tilde;
  return p;
}

struct DeskSetup {
  std::shared_ptr<const SubsampledProblem> problem;
  Ensemble ens;
};

DeskSetup desk_setup(std::uint64_t seed) {
  HeatConfig cfg;
  cfg.h = 0.02;
  const Matrix A = assemble_forward(cfg);
  Rng rng(seed);
  KLFieldSpec spec;
  spec.grid = cfg.grid();
  const auto kl = kl_basis(spec);
  LinearProblem p;
  p.A = A;
  p.y = A * sample_kl_field(kl, rng) + 0.1 * oracle::random_vector(A.rows(), rng);
  p.gamma = 0.01 * Matrix::Identity(A.rows(), A.rows());
  const auto part = partition_by_timestep(A, cfg);
  auto sp = std::make_shared<const SubsampledProblem>(
      make_subsampled_problem(whiten(p, part), part, 10.0, Matrix::Identity(A.cols(), A.cols())));
  return {sp, draw_initial_ensemble(kl, 5, rng)};
}

}  // namespace

TEST_SUITE("reference") {

TEST_CASE("frame of a symmetric pair on an axis") {
  const auto f = build_frame(Ensemble{(Matrix(2, 2) << 1, -1, 0, 0).finished()});
  REQUIRE(f.dim() == 1);
  CHECK(std::abs(f.E(0, 0)) == doctest::Approx(1.0));
  CHECK(f.E(1, 0) == doctest::Approx(0.0));
  CHECK(f.theta0_perp.norm() <= 1e-15);
}

TEST_CASE("frame with an offset mean") {
  const auto f = build_frame(Ensemble{(Matrix(2, 2) << 1, 1, 1, -1).finished()});
  CHECK(f.E(0, 0) == doctest::Approx(0.0));
  CHECK(std::abs(f.E(1, 0)) == doctest::Approx(1.0));
  CHECK(f.theta0_perp(0) == doctest::Approx(1.0));
  CHECK(f.theta0_perp(1) == doctest::Approx(0.0));
}

TEST_CASE("frame of a random high-dimensional ensemble is orthonormal") {
  std::mt19937_64 rng(51);
  Ensemble e{oracle::random_matrix(99, 5, rng)};
  e.particles.colwise() += oracle::random_vector(99, rng);
  const auto f = build_frame(e);
  CHECK((f.E.transpose() * f.E - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((f.E.transpose() * f.theta0_perp).cwiseAbs().maxCoeff() <= 1e-12 * f.theta0_perp.norm());
  for (Eigen::Index j = 0; j < 5; ++j) {
    const Vector th = e.particles.col(j);
    CHECK((f.embed(f.coordinates(th)) - th).norm() <= 1e-12 * th.norm());
  }
}

TEST_CASE("rank-deficient ensembles have no frame") {
  Matrix P(3, 3);
  P << 1, 2, 3, 1, 2, 3, 0, 0, 0;
  CHECK_THROWS(build_frame(Ensemble{P}));
  CHECK_THROWS(build_frame(Ensemble{Matrix::Ones(2, 4)}));
}

TEST_CASE("a full frame gives the unconstrained minimiser") {
  std::mt19937_64 rng(53);
  const auto p = augment_full(oracle::random_matrix(8, 4, rng), oracle::random_vector(8, rng), 0.5,
                              Matrix::Identity(4, 4));
  SubspaceFrame f{Matrix::Identity(4, 4), Vector::Zero(4)};
  const auto sol = constrained_tikhonov(f, p);
  const Vector ref = tikhonov_minimiser(p);
  CHECK((sol.theta_star - ref).norm() <= 1e-10 * ref.norm());
}

TEST_CASE("one-dimensional projection") {
  const auto sol = constrained_tikhonov(SubspaceFrame{(Matrix(2, 1) << 1, 0).finished(), Vector::Zero(2)},
                                        bare(Matrix::Identity(2, 2), (Vector(2) << 1, 1).finished()));
  CHECK(sol.c_dagger(0) == doctest::Approx(1.0));
  CHECK(sol.theta_star(0) == doctest::Approx(1.0));
  CHECK(sol.theta_star(1) == doctest::Approx(0.0));
}

TEST_CASE("heat problem: agrees with an independent Gram-Schmidt solve") {
  const auto s = desk_setup(55);
  const auto frame = build_frame(s.ens);
  const auto& aug = s.problem->full;
  const auto sol = constrained_tikhonov(frame, aug);
  const Vector c_ref = oracle::mgs_lstsq(aug.A_tilde * frame.E, aug.y_tilde - aug.A_tilde * frame.theta0_perp);
  const Vector ref = frame.E * c_ref + frame.theta0_perp;
  CHECK((sol.theta_star - ref).norm() <= 1e-9 * ref.norm());

  SUBCASE("the residual is orthogonal to the frame") {
    const Vector r = aug.A_tilde * sol.theta_star - aug.y_tilde;
    CHECK((aug.A_tilde * frame.E).transpose().operator*(r).norm() <=
          1e-10 * (aug.A_tilde.transpose() * aug.y_tilde).norm());
  }
  SUBCASE("every in-frame perturbation raises the potential") {
    std::mt19937_64 rng(57);
    const double base = potential(aug, sol.theta_star);
    for (int k = 0; k < 20; ++k) {
      const Vector v = frame.E * oracle::random_vector(4, rng).normalized();
      CHECK(potential(aug, sol.theta_star + 1e-3 * v) > base);
    }
  }
  SUBCASE("rotating the basis does not move the solution") {
    std::mt19937_64 rng(59);
    const Matrix Q = oracle::random_matrix(4, 4, rng).householderQr().householderQ();
    const auto rotated = constrained_tikhonov(SubspaceFrame{frame.E * Q, frame.theta0_perp}, aug);
    CHECK((rotated.theta_star - sol.theta_star).norm() <= 1e-10 * sol.theta_star.norm());
  }
}

TEST_CASE("singular constrained systems are reported") {
  AugmentedProblem p = bare((Matrix(2, 2) << 1, 0, 0, 0).finished(), Vector::Ones(2));
  CHECK_THROWS(constrained_tikhonov(SubspaceFrame{(Matrix(2, 1) << 0, 1).finished(), Vector::Zero(2)}, p));
  CHECK_THROWS_AS(constrained_tikhonov(SubspaceFrame{Matrix::Identity(3, 1), Vector::Zero(3)}, p), DimensionError);
}

}
