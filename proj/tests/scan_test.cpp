#include "fisum/scan.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fisum/error.hpp"
#include "oracle.hpp"

namespace fisum {
namespace {

ScalarField field(GridShape shape, SemiringTag tag, std::vector<double> v) {
  return ScalarField(std::move(shape), tag, v);
}

std::vector<double> as_vec(const ScalarField& f) { return {f.values().begin(), f.values().end()}; }

ScalarField random_field(SplitMix64& rng, const GridShape& shape, SemiringTag tag, bool integer) {
  ScalarField f(shape, tag);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (tag == SemiringTag::MaxPlus && rng.below(5) == 0) {
      f[i] = kNegInf;
    } else {
      f[i] = integer ? static_cast<double>(rng.range(-3, 3)) : rng.uniform(-1, 1);
    }
  }
  return f;
}

TEST(Cumsum, Examples) {
  const GridShape s2{2, 2};
  EXPECT_EQ(as_vec(cumsum_dir(SemiringTag::Real, Direction::parse("++"),
                              field(s2, SemiringTag::Real, {1, 2, 3, 4}))),
            (std::vector<double>{4, 0, 0, 0}));
  EXPECT_EQ(as_vec(cumsum_dir(SemiringTag::Real, Direction::parse("+"),
                              field(GridShape{3}, SemiringTag::Real, {1, 1, 1}))),
            (std::vector<double>{2, 1, 0}));
  EXPECT_EQ(as_vec(cumsum_dir(SemiringTag::MaxPlus, Direction::parse("++"),
                              field(s2, SemiringTag::MaxPlus, {1, 2, 3, 4}))),
            (std::vector<double>{4, kNegInf, kNegInf, kNegInf}));
}

TEST(Cumsum, Errors) {
  const ScalarField f(GridShape{2, 2}, SemiringTag::Real);
  EXPECT_THROW(cumsum_dir(SemiringTag::Real, Direction::parse("+"), f), ValidationError);
  EXPECT_THROW(cumsum_dir(SemiringTag::MaxPlus, Direction::parse("++"), f), ValidationError);
  const std::vector<std::size_t> bad{0, 0};
  EXPECT_THROW(cumsum_dir(SemiringTag::Real, Direction::parse("++"), f, bad), ValidationError);
  EXPECT_THROW(cumsum_dir_vjp(SemiringTag::MaxPlus, Direction::parse("++"),
                              ScalarField(GridShape{2, 2}, SemiringTag::MaxPlus)),
               ValidationError);
}

void check_all_directions(std::size_t order, std::size_t max_extent, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (SemiringTag tag : {SemiringTag::Real, SemiringTag::MaxPlus}) {
    for (const Direction& d : all_directions(order)) {
      for (int trial = 0; trial < 6; ++trial) {
        std::vector<std::size_t> ext(order);
        for (auto& e : ext) e = 1 + rng.below(max_extent);
        if (trial == 0) std::fill(ext.begin(), ext.end(), max_extent);
        const GridShape shape(ext);
        const ScalarField x = random_field(rng, shape, tag, true);
        const auto expected = oracle::cumsum_bruteforce(tag, d, shape, x.values());
        EXPECT_EQ(as_vec(cumsum_dir(tag, d, x)), expected) << d.to_string() << " " << to_string(tag);
      }
    }
  }
}

TEST(Cumsum, MatchesBruteForceAllOrder2Directions) { check_all_directions(2, 5, 1); }
TEST(Cumsum, MatchesBruteForceAllOrder3Directions) { check_all_directions(3, 4, 2); }
TEST(Cumsum, MatchesBruteForceOrder1) { check_all_directions(1, 9, 3); }

TEST(Cumsum, AxisOrderDoesNotMatter) {
  SplitMix64 rng(4);
  const GridShape shape{4, 3, 5};
  std::vector<std::size_t> perm{0, 1, 2};
  for (SemiringTag tag : {SemiringTag::Real, SemiringTag::MaxPlus}) {
    for (const Direction& d : all_directions(3)) {
      const ScalarField x = random_field(rng, shape, tag, false);
      const ScalarField fused = cumsum_dir(tag, d, x);
      std::sort(perm.begin(), perm.end());
      do {
        const ScalarField serial = cumsum_dir(tag, d, x, perm);
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (tag == SemiringTag::MaxPlus) {
            EXPECT_EQ(serial[i], fused[i]);
          } else {
            EXPECT_LE(std::abs(serial[i] - fused[i]), 1e-12 * std::max(1.0, std::abs(fused[i])));
          }
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
}

TEST(Cumsum, IsLinearOverTheReals) {
  SplitMix64 rng(5);
  const GridShape shape{6, 7};
  for (const Direction& d : all_directions(2)) {
    const ScalarField x = random_field(rng, shape, SemiringTag::Real, false);
    const ScalarField y = random_field(rng, shape, SemiringTag::Real, false);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    ScalarField combo(shape, SemiringTag::Real);
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * y[i];
    const ScalarField lhs = cumsum_dir(SemiringTag::Real, d, combo);
    const ScalarField cx = cumsum_dir(SemiringTag::Real, d, x);
    const ScalarField cy = cumsum_dir(SemiringTag::Real, d, y);
    for (std::size_t i = 0; i < combo.size(); ++i) {
      const double rhs = a * cx[i] + b * cy[i];
      EXPECT_LE(std::abs(lhs[i] - rhs), 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(CumsumVjp, AllOnesExample) {
  const ScalarField ones(GridShape{2, 2}, SemiringTag::Real, 1.0);
  EXPECT_EQ(as_vec(cumsum_dir_vjp(SemiringTag::Real, Direction::parse("++"), ones)),
            (std::vector<double>{0, 0, 0, 1}));
}

TEST(CumsumVjp, EqualsExplicitMatrixTranspose) {
  SplitMix64 rng(6);
  for (std::size_t order : {1u, 2u, 3u}) {
    std::vector<std::size_t> ext(order, 3);
    if (order == 2) ext = {3, 4};
    const GridShape shape(ext);
    for (const Direction& d : all_directions(order)) {
      const auto m = oracle::cumsum_matrix(d, shape);
      const ScalarField y = random_field(rng, shape, SemiringTag::Real, true);
      const ScalarField got = cumsum_dir_vjp(SemiringTag::Real, d, y);
      for (std::size_t r = 0; r < shape.size(); ++r) {
        double expected = 0.0;
        for (std::size_t t = 0; t < shape.size(); ++t) expected += m[t][r] * y[t];
        EXPECT_EQ(got[r], expected) << d.to_string();
      }
    }
  }
}

TEST(CumsumVjp, FlipRule) {
  SplitMix64 rng(7);
  const ScalarField y = random_field(rng, GridShape{4, 4}, SemiringTag::Real, false);
  EXPECT_TRUE(bit_equal(cumsum_dir_vjp(SemiringTag::Real, Direction::parse("=+"), y),
                        cumsum_dir(SemiringTag::Real, Direction::parse("=-"), y)));
}

TEST(CumsumVjp, InnerProductIdentity) {
  SplitMix64 rng(8);
  const GridShape shape{3, 3};
  for (const Direction& d : all_directions(2)) {
    for (int trial = 0; trial < 10; ++trial) {
      const ScalarField x = random_field(rng, shape, SemiringTag::Real, false);
      const ScalarField y = random_field(rng, shape, SemiringTag::Real, false);
      const ScalarField cx = cumsum_dir(SemiringTag::Real, d, x);
      const ScalarField vy = cumsum_dir_vjp(SemiringTag::Real, d, y);
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        lhs += cx[i] * y[i];
        rhs += x[i] * vy[i];
      }
      EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(MaxPlusVjp, RoutesToTheArgmax) {
  SplitMix64 rng(9);
  const GridShape shape{4, 5};
  for (const Direction& d : all_directions(2)) {
    // Distinct values so every max is attained at one point.
    std::vector<double> x(shape.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    for (std::size_t i = x.size(); i > 1; --i) std::swap(x[i - 1], x[rng.below(i)]);
    std::vector<double> cot(shape.size());
    for (auto& c : cot) c = rng.uniform(-1, 1);

    std::vector<double> expected(shape.size(), 0.0);
    for (std::size_t t = 0; t < shape.size(); ++t) {
      double best = kNegInf;
      std::size_t arg = shape.size();
      for (std::size_t r = 0; r < shape.size(); ++r) {
        if (oracle::stands_in(d, shape.point(t), shape.point(r)) && x[r] > best) {
          best = x[r];
          arg = r;
        }
      }
      if (arg < shape.size()) expected[arg] += cot[t];
    }
    const auto got = maxplus_cumsum_vjp(d, shape, x, cot);
    for (std::size_t r = 0; r < shape.size(); ++r) {
      EXPECT_NEAR(got[r], expected[r], 1e-12) << d.to_string();
    }
  }
}

TEST(MaxPlusVjp, TiesGoToTheFirstInScanOrder) {
  // 1-D "+" scans backward: out_0 = max(x_1, x_2) with a tie; the backward
  // scan meets x_2 first.
  const std::vector<double> x{0.0, 5.0, 5.0};
  const std::vector<double> cot{1.0, 0.0, 0.0};
  const auto got = maxplus_cumsum_vjp(Direction::parse("+"), GridShape{3}, x, cot);
  EXPECT_EQ(got, (std::vector<double>{0.0, 0.0, 1.0}));
}

}  // namespace
}  // namespace fisum
