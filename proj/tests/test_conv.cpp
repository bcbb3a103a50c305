#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "rsesf/conv.hpp"
#include "rsesf/data.hpp"
#include "rsesf/error.hpp"
#include "support.hpp"

using namespace rsesf;
using rsesf::testing::random_tensor;

namespace {

FilterTensor random_filters(std::size_t c_out, std::size_t c_in, std::size_t rotations,
                            std::size_t extent, std::uint64_t seed) {
  FilterTensor t;
  t.values = random_tensor({c_out, c_in, rotations, extent, extent}, seed);
  return t;
}

FilterTensor steered_filters(std::size_t c_out, std::size_t c_in, std::size_t rotations,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto bank = make_filter_bank(1, c_out, c_in, 2,
                                     make_scale_groups(std::vector<double>{0.8, 1.2}),
                                     RotationScheme{rotations}, rng);
  return materialize(bank, 0);
}

FeatureMap random_fmap(std::size_t c, std::size_t r, std::size_t h, std::size_t w,
                       std::uint64_t seed) {
  FeatureMap f;
  f.values = random_tensor({c, r, h, w}, seed);
  return f;
}

// Oracle for both selection rules: sums over the chosen axes, first maximum wins.
std::size_t brute_argmax(const std::vector<double>& sums) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < sums.size(); ++r) {
    if (sums[r] > sums[best]) best = r;
  }
  return best;
}

Tensor permute_rotations(const Tensor& v, const std::vector<std::size_t>& perm) {
  Tensor out(v.shape());
  for (std::size_t c = 0; c < v.dim(0); ++c) {
    for (std::size_t r = 0; r < v.dim(1); ++r) {
      const auto src = v.slab({c, perm[r]});
      std::copy(src.begin(), src.end(), out.slab({c, r}).begin());
    }
  }
  return out;
}

}  // namespace

TEST(Conv2dSame, DeltaReproducesKernel) {
  const auto kernel = steer(1, 1, 0.3, 1.0, 5);
  Tensor delta({9, 9});
  delta(4, 4) = 1.0;
  const Tensor out = conv2d_same(delta, kernel);
  // Cross-correlation: out[y, x] = k[4 - y + 2, 4 - x + 2], i.e. the flipped kernel.
  for (std::size_t y = 0; y < 5; ++y) {
    for (std::size_t x = 0; x < 5; ++x) {
      EXPECT_EQ(out(2 + y, 2 + x), kernel.at(4 - y, 4 - x));
    }
  }
  EXPECT_EQ(out(0, 0), 0.0);
}

TEST(Conv2dSame, IdentityKernel) {
  const Tensor in({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  KernelGrid k(3);
  k.at(1, 1) = 1.0;
  EXPECT_EQ(conv2d_same(in, k), in);
}

TEST(Conv2dSame, IsNotFlipped) {
  const Tensor in({1, 3}, {1, 2, 3});
  KernelGrid k(3);
  k.at(1, 2) = 1.0;  // picks the right neighbour
  const Tensor out = conv2d_same(in, k);
  EXPECT_EQ(out(0, 0), 2.0);
  EXPECT_EQ(out(0, 1), 3.0);
  EXPECT_EQ(out(0, 2), 0.0);
}

TEST(Conv2dSame, OddKernelsAnnihilateConstants) {
  const Tensor ones({20, 20}, 1.0);
  for (auto [i, j] : {std::pair{1, 0}, std::pair{0, 1}}) {
    const auto k = steer(i, j, 0.0, 1.2, 9);
    const Tensor out = conv2d_same(ones, k);
    for (std::size_t y = 4; y < 16; ++y) {
      for (std::size_t x = 4; x < 16; ++x) EXPECT_NEAR(out(y, x), 0.0, 1e-12);
    }
  }
}

TEST(Conv2dSame, RejectsBadShapes) {
  EXPECT_THROW(conv2d_same(Tensor({2, 2, 2}), KernelGrid(3)), ShapeError);
}

TEST(CorrelateAdjoint, MatchesInnerProductIdentity) {
  const std::size_t h = 7, w = 5, e = 3;
  const Tensor x = random_tensor({h, w}, 1);
  const Tensor y = random_tensor({h, w}, 2);
  const Tensor k = random_tensor({e, e}, 3);
  std::vector<double> ax(h * w, 0.0), aty(h * w, 0.0), dk(e * e, 0.0);
  correlate_accumulate(x.values(), h, w, k.values(), e, ax);
  correlate_adjoint_accumulate(y.values(), h, w, k.values(), e, aty);
  correlate_kernel_gradient(x.values(), y.values(), h, w, e, dk);
  const double lhs = std::inner_product(ax.begin(), ax.end(), y.values().begin(), 0.0);
  const double rhs = std::inner_product(aty.begin(), aty.end(), x.values().begin(), 0.0);
  const double kdot = std::inner_product(dk.begin(), dk.end(), k.values().begin(), 0.0);
  EXPECT_NEAR(lhs, rhs, 1e-12);
  EXPECT_NEAR(lhs, kdot, 1e-12);
}

TEST(FirstLayer, ZeroImageGivesZero) {
  const auto t = random_filters(3, 2, 4, 5, 1);
  const auto f = first_layer_forward(Tensor({2, 10, 10}), t);
  EXPECT_EQ(f.values.shape(), (std::vector<std::size_t>{3, 4, 10, 10}));
  EXPECT_EQ(f.values.max_abs(), 0.0);
}

TEST(FirstLayer, SingleRotationIsPlainMultiChannelConvolution) {
  const auto t = random_filters(2, 3, 1, 3, 4);
  const Tensor img = random_tensor({3, 6, 7}, 5);
  const auto f = first_layer_forward(img, t);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t y = 0; y < 6; ++y) {
      for (std::size_t x = 0; x < 7; ++x) {
        double s = 0.0;
        for (std::size_t d = 0; d < 3; ++d) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = static_cast<int>(y) + dy;
              const int xx = static_cast<int>(x) + dx;
              if (yy < 0 || yy >= 6 || xx < 0 || xx >= 7) continue;
              s += t.values(c, d, 0, dy + 1, dx + 1) * img(d, yy, xx);
            }
          }
        }
        EXPECT_NEAR(f.values(c, 0, y, x), s, 1e-13);
      }
    }
  }
}

TEST(FirstLayer, Linearity) {
  const auto t = random_filters(2, 1, 2, 5, 7);
  const Tensor a = random_tensor({1, 9, 9}, 8);
  const Tensor b = random_tensor({1, 9, 9}, 9);
  Tensor mix(a.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
  const auto fa = first_layer_forward(a, t);
  const auto fb = first_layer_forward(b, t);
  const auto fm = first_layer_forward(mix, t);
  for (std::size_t i = 0; i < fm.values.size(); ++i) {
    EXPECT_NEAR(fm.values[i], 2.0 * fa.values[i] - 0.5 * fb.values[i], 1e-12);
  }
}

TEST(FirstLayer, QuarterTurnRollsRotationChannels) {
  const auto t = steered_filters(3, 2, 4, 6);
  const Tensor img = random_tensor({2, 16, 16}, 2, 0.0, 1.0);
  const auto f = first_layer_forward(img, t);
  const auto g = first_layer_forward(rot90(img, 1), t);
  const Tensor expected = roll_rotations(rot90(f.values, 1), 1);
  EXPECT_LE(relative_l2(g.values, expected), 1e-10);
}

TEST(FirstLayer, ChannelMismatchThrows) {
  EXPECT_THROW(first_layer_forward(Tensor({3, 8, 8}), random_filters(2, 1, 1, 3, 1)),
               ShapeError);
}

TEST(HiddenLayer, ModesAgreeAtSingleRotation) {
  const auto t = random_filters(2, 3, 1, 3, 11);
  const auto f = random_fmap(3, 1, 8, 8, 12);
  const auto a = hidden_layer_forward(f, t, HiddenMode::steered_per_channel);
  const auto b = hidden_layer_forward(f, t, HiddenMode::summed_orientations);
  EXPECT_EQ(a.values, b.values);
}

TEST(HiddenLayer, SteeredModePermutesWithSlices) {
  const auto t = random_filters(2, 2, 4, 3, 13);
  const auto f = random_fmap(2, 4, 7, 7, 14);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  FilterTensor tp = t;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t d = 0; d < 2; ++d) {
      for (std::size_t r = 0; r < 4; ++r) {
        const auto src = t.values.slab({c, d, perm[r]});
        std::copy(src.begin(), src.end(), tp.values.slab({c, d, r}).begin());
      }
    }
  }
  FeatureMap fp = f;
  fp.values = permute_rotations(f.values, perm);
  const auto out = hidden_layer_forward(f, t);
  const auto out_p = hidden_layer_forward(fp, tp);
  EXPECT_EQ(out_p.values, permute_rotations(out.values, perm));
}

TEST(HiddenLayer, SteeredModeNeverMixesRotationChannels) {
  const auto t = random_filters(2, 2, 4, 3, 15);
  auto f = random_fmap(2, 4, 6, 6, 16);
  const auto before = hidden_layer_forward(f, t);
  for (std::size_t d = 0; d < 2; ++d) std::ranges::fill(f.values.slab({d, 2}), 0.0);
  const auto after = hidden_layer_forward(f, t);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t r = 0; r < 4; ++r) {
      const auto a = before.values.slab({c, r});
      const auto b = after.values.slab({c, r});
      if (r == 2) {
        EXPECT_TRUE(std::ranges::all_of(b, [](double v) { return v == 0.0; }));
      } else {
        EXPECT_TRUE(std::ranges::equal(a, b));
      }
    }
  }
}

TEST(HiddenLayer, SummedModeCancelsFirstOrderFilters) {
  std::mt19937_64 rng(3);
  auto bank = make_filter_bank(2, 1, 1, 2, make_scale_groups(std::vector<double>{0.8, 1.2}),
                               RotationScheme{4}, rng);
  bank.alpha.fill(0.0);
  bank.alpha(0, 0, 1) = 1.0;
  const auto t = materialize(bank, 0);
  EXPECT_LE(sum_over_rotations(t.values).max_abs(), 1e-12);
  const auto out = hidden_layer_forward(random_fmap(1, 4, 10, 10, 4), t,
                                        HiddenMode::summed_orientations);
  EXPECT_LE(out.values.max_abs(), 1e-12);
}

TEST(HiddenLayer, ShapeMismatchThrows) {
  EXPECT_THROW(hidden_layer_forward(random_fmap(3, 4, 5, 5, 1), random_filters(2, 2, 4, 3, 1)),
               ShapeError);
  EXPECT_THROW(hidden_layer_forward(random_fmap(2, 2, 5, 5, 1), random_filters(2, 2, 4, 3, 1)),
               ShapeError);
  EXPECT_NO_THROW(hidden_layer_forward(random_fmap(2, 2, 5, 5, 1), random_filters(2, 2, 4, 3, 1),
                                       HiddenMode::summed_orientations));
}

TEST(Relu, Basics) {
  FeatureMap zero;
  zero.values = Tensor({1, 1, 2, 2});
  EXPECT_EQ(relu(zero).values, zero.values);
  FeatureMap neg;
  neg.values = Tensor({1, 1, 2, 2}, -3.0);
  EXPECT_EQ(relu(neg).values.max_abs(), 0.0);
  const auto f = random_fmap(2, 3, 4, 4, 2);
  const auto once = relu(f);
  EXPECT_EQ(relu(once).values, once.values);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    EXPECT_EQ(once.values[i], f.values[i] > 0 ? f.values[i] : 0.0);
  }
}

TEST(RotpoolMax, Basics) {
  const auto single = random_fmap(2, 1, 3, 3, 1);
  EXPECT_EQ(rotpool_max(single).values, single.values);
  FeatureMap f;
  f.values = Tensor({1, 3, 1, 1}, std::vector<double>{-1.0, 3.0, 0.0});
  EXPECT_EQ(rotpool_max(f).values(0, 0, 0, 0), 3.0);
  const auto r = random_fmap(2, 4, 3, 3, 8);
  auto p = r;
  p.values = permute_rotations(r.values, {3, 1, 0, 2});
  EXPECT_EQ(rotpool_max(p).values, rotpool_max(r).values);
  EXPECT_EQ(rotpool_max(r).rotations(), 1u);
}

TEST(RotselectUnified, SingleSliceAndDominance) {
  const auto single = random_fmap(2, 1, 3, 3, 1);
  const auto s = rotselect_unified(single);
  EXPECT_EQ(s.index, 0u);
  EXPECT_EQ(s.map.values, single.values);

  auto f = random_fmap(2, 4, 3, 3, 2);
  for (std::size_t c = 0; c < 2; ++c) {
    for (auto& v : f.values.slab({c, 2})) v += 10.0;
  }
  const auto pick = rotselect_unified(f);
  EXPECT_EQ(pick.index, 2u);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_TRUE(std::ranges::equal(pick.map.values.slab({c, 0}), f.values.slab({c, 2})));
  }
  EXPECT_EQ(rotselect_per_channel(f).values, pick.map.values);
}

TEST(RotselectUnified, MatchesBruteForceIncludingTies) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto f = random_fmap(2, 3, 2, 2, seed);
    if (seed % 5 == 0) {
      // Duplicate slice 1 into slice 2 and make both dominant: tie goes to 1.
      for (std::size_t c = 0; c < 2; ++c) {
        for (auto& v : f.values.slab({c, 1})) v = std::abs(v) + 5.0;
        const auto src = f.values.slab({c, 1});
        std::copy(src.begin(), src.end(), f.values.slab({c, 2}).begin());
      }
    }
    std::vector<double> sums(3, 0.0);
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t r = 0; r < 3; ++r) {
        for (double v : f.values.slab({c, r})) sums[r] += v;
      }
    }
    const std::size_t expected = brute_argmax(sums);
    EXPECT_EQ(rotselect_unified(f).index, expected) << "seed " << seed;
    if (seed % 5 == 0) EXPECT_EQ(expected, 1u);
  }
}

TEST(RotselectPerChannel, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto f = random_fmap(3, 4, 2, 3, 100 + seed);
    const auto out = rotselect_per_channel(f);
    ASSERT_EQ(out.rotations(), 1u);
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> sums(4, 0.0);
      for (std::size_t r = 0; r < 4; ++r) {
        for (double v : f.values.slab({c, r})) sums[r] += v;
      }
      EXPECT_TRUE(std::ranges::equal(out.values.slab({c, 0}),
                                     f.values.slab({c, brute_argmax(sums)})));
    }
  }
}

TEST(Reductions, InvariantUnderRotationPermutation) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto f = random_fmap(2, 5, 3, 3, 300 + t);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto p = f;
    p.values = permute_rotations(f.values, perm);
    for (auto red : {RotationReduction::max, RotationReduction::unified,
                     RotationReduction::per_channel}) {
      EXPECT_EQ(reduce_rotations(p, red).values, reduce_rotations(f, red).values);
    }
  }
}

TEST(RollRotations, ShiftsCyclically) {
  const auto f = random_fmap(1, 4, 2, 2, 5);
  const Tensor rolled = roll_rotations(f.values, 1);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_TRUE(std::ranges::equal(rolled.slab({0, r}), f.values.slab({0, (r + 3) % 4})));
  }
  EXPECT_EQ(roll_rotations(f.values, -1), roll_rotations(f.values, 3));
  EXPECT_EQ(roll_rotations(f.values, 4), f.values);
}
