#include "bsbl/model.hpp"
#include "oracles/dense_oracle.hpp"

#include <gtest/gtest.h>

namespace {

using namespace bsbl;

Hyperparams to_hp(const oracle::Instance& in) {
  Hyperparams hp;
  hp.gamma = in.gamma;
  hp.B = in.B;
  hp.lambda = in.lambda;
  return hp;
}

Problem to_problem(const oracle::Instance& in) { return {in.y, in.phi}; }

TEST(Posterior, IdentityCase) {
  Problem p{Vector::Map(std::vector<double>{2, 4}.data(), 2), Matrix::Identity(2, 2)};
  const BlockPartition part({2});
  const Hyperparams hp = Hyperparams::initial(part, 1.0, 1.0);
  const PosteriorState s = compute_posterior(p, part, hp);
  EXPECT_NEAR(s.mu(0), 1.0, 1e-15);
  EXPECT_NEAR(s.mu(1), 2.0, 1e-15);
  EXPECT_NEAR((s.sigma_blocks[0] - 0.5 * Matrix::Identity(2, 2)).norm(), 0.0, 1e-15);
}

TEST(Posterior, AllPrunedGivesZeroMeanAndNoiseOnlyCost) {
  oracle::Rng rng(3);
  oracle::Instance in = oracle::random_instance(6, {2, 3, 1}, rng);
  in.gamma.setZero();
  const BlockPartition part({2, 3, 1});
  const PosteriorState s = compute_posterior(to_problem(in), part, to_hp(in));
  EXPECT_EQ(s.mu.norm(), 0.0);
  const double expected = 6 * std::log(in.lambda) + in.y.squaredNorm() / in.lambda;
  EXPECT_NEAR(s.cost, expected, 1e-12 * std::abs(expected));
}

TEST(Posterior, MatchesDenseOracle) {
  oracle::Rng rng(11);
  const oracle::Instance in = oracle::random_instance(8, {4, 4, 4, 4}, rng);
  const BlockPartition part({4, 4, 4, 4});
  const PosteriorState s = compute_posterior(to_problem(in), part, to_hp(in));
  const oracle::Posterior ref = oracle::posterior(in);
  EXPECT_LT(oracle::rel_err(s.mu, ref.mu), 1e-10);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_LT(oracle::rel_err(s.sigma_blocks[i], ref.sigma.block(4 * i, 4 * i, 4, 4)), 1e-10);
  }
  EXPECT_EQ(map_estimate(s), s.mu);
}

TEST(Posterior, PrunedBlockHasExactlyZeroMean) {
  oracle::Rng rng(5);
  const oracle::Instance in = oracle::random_instance(7, {3, 2, 4}, rng, true);
  const PosteriorState s = compute_posterior(to_problem(in), BlockPartition({3, 2, 4}), to_hp(in));
  EXPECT_EQ(s.mu.segment(0, 3).norm(), 0.0);
  EXPECT_EQ(s.sigma_blocks[0].norm(), 0.0);
  const oracle::Posterior ref = oracle::posterior(in);
  EXPECT_LT(oracle::rel_err(s.mu, ref.mu), 1e-10);
}

TEST(Cost, ZeroPriorUnitNoise) {
  oracle::Rng rng(2);
  oracle::Instance in = oracle::random_instance(5, {5}, rng);
  in.gamma.setZero();
  in.lambda = 1.0;
  EXPECT_NEAR(cost_function(to_problem(in), BlockPartition({5}), to_hp(in)), in.y.squaredNorm(),
              1e-13);
}

TEST(Cost, ScalarCase) {
  Problem p{Vector::Ones(1), Matrix::Identity(1, 1)};
  const BlockPartition part({1});
  EXPECT_NEAR(cost_function(p, part, Hyperparams::initial(part, 1.0, 1.0)), std::log(2.0) + 0.5,
              1e-15);
}

TEST(Cost, MatchesDenseOracle) {
  oracle::Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    const auto sizes = oracle::random_sizes(12, 4, rng);
    const oracle::Instance in = oracle::random_instance(7, sizes, rng, t % 2 == 0);
    const double c = cost_function(to_problem(in), BlockPartition(sizes), to_hp(in));
    EXPECT_LT(oracle::rel_err(c, oracle::cost(in)), 1e-10);
  }
}

TEST(Partition, UniformAndOffsets) {
  const BlockPartition p = BlockPartition::uniform(10, 4);
  ASSERT_EQ(p.num_blocks(), 3);
  EXPECT_EQ(p.size(2), 2);
  EXPECT_EQ(p.offset(2), 8);
  EXPECT_FALSE(p.equal_sizes());
  EXPECT_TRUE(BlockPartition::uniform(12, 4).equal_sizes());
}

TEST(Partition, RejectsZeroSize) {
  EXPECT_THROW(BlockPartition({2, 0, 1}), Error);
}

TEST(Problem, ValidateRejectsMismatch) {
  Problem p{Vector::Zero(3), Matrix::Zero(4, 5)};
  try {
    p.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Posterior, NonPsdBlockIsRejected) {
  oracle::Rng rng(9);
  oracle::Instance in = oracle::random_instance(5, {2, 2}, rng);
  in.B[1] << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(compute_posterior(to_problem(in), BlockPartition({2, 2}), to_hp(in)), Error);
}

TEST(Layout, SlidingMaterializeMatchesSelectors) {
  oracle::Rng rng(4);
  const Matrix phi = oracle::gaussian(5, 7, rng);
  const BlockLayout l = BlockLayout::sliding(7, 3);
  EXPECT_EQ(l.num_blocks(), 5);
  EXPECT_TRUE(l.overlapping());
  EXPECT_EQ(l.materialize(phi), oracle::expanded(phi, 3));
  const Vector z = oracle::gaussian(15, 1, rng);
  EXPECT_LT((l.apply(phi, z) - oracle::expanded(phi, 3) * z).norm(), 1e-12);
}

TEST(Layout, ContiguousPosteriorMatchesPartitionPosterior) {
  oracle::Rng rng(21);
  const oracle::Instance in = oracle::random_instance(6, {3, 3, 2}, rng);
  const BlockPartition part({3, 3, 2});
  const PosteriorState a = compute_posterior(to_problem(in), part, to_hp(in));
  const PosteriorDetail b =
      compute_posterior_detail(to_problem(in), BlockLayout::contiguous(part), to_hp(in));
  EXPECT_EQ(a.mu, b.state.mu);
  EXPECT_EQ(a.cost, b.state.cost);
}

TEST(Posterior, ParallelBlockLoopIsBitwiseSerial) {
  oracle::Rng rng(8);
  std::vector<Index> sizes(80, 2);
  const oracle::Instance in = oracle::random_instance(40, sizes, rng);
  const BlockLayout layout = BlockLayout::contiguous(BlockPartition(sizes));
  PosteriorOptions serial;
  serial.parallel = false;
  serial.all_grams = true;
  PosteriorOptions parallel = serial;
  parallel.parallel = true;
  const PosteriorDetail a = compute_posterior_detail(to_problem(in), layout, to_hp(in), serial);
  const PosteriorDetail b = compute_posterior_detail(to_problem(in), layout, to_hp(in), parallel);
  EXPECT_EQ(a.state.mu, b.state.mu);
  EXPECT_EQ(a.state.cost, b.state.cost);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    EXPECT_EQ(a.state.sigma_blocks[i], b.state.sigma_blocks[i]);
    EXPECT_EQ(a.gram[i], b.gram[i]);
  }
}

}  // namespace
