#pragma once

#include "eki/regularization.hpp"
#include "oracles.hpp"

#include <memory>

namespace testing {

/// Random whitened problem split into equal blocks.
inline std::shared_ptr<const eki::SubsampledProblem> random_subsampled(Eigen::Index rows_per_block, int n_sub,
                                                                        Eigen::Index d, double alpha,
                                                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  eki::LinearProblem p;
  const Eigen::Index m = rows_per_block * n_sub;
  p.A = oracle::random_matrix(m, d, rng);
  p.y = oracle::random_vector(m, rng);
  p.gamma = eki::Matrix::Identity(m, m);
  return std::make_shared<const eki::SubsampledProblem>(eki::make_subsampled_problem(
      p, eki::DataPartition(std::vector<Eigen::Index>(static_cast<std::size_t>(n_sub), rows_per_block)), alpha,
      eki::Matrix::Identity(d, d)));
}

}  // namespace testing
