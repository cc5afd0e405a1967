#include <gtest/gtest.h>

#include <cstring>
#include <vector>

#include "concord/core/error.hpp"
#include "concord/core/rng.hpp"
#include "concord/kernels/kernels.hpp"

namespace concord::kernels {
namespace {

std::vector<int32_t> random_matrix(Rng& rng, size_t n, int32_t max_value) {
  std::vector<int32_t> m(n * n);
  for (auto& v : m) v = static_cast<int32_t>(rng.below(static_cast<uint64_t>(max_value) + 1));
  for (size_t i = 0; i < n; ++i) m[i * n + i] = 0;
  return m;
}

TEST(KernelsTest, ScalarIsAlwaysAvailable) {
  auto isas = available_isas();
  ASSERT_FALSE(isas.empty());
  EXPECT_EQ(isas.front(), Isa::scalar);
}

TEST(KernelsTest, SelectIsaRejectsUnknownNames) {
  EXPECT_THROW(select_isa("sse9"), ValidationError);
  select_isa("scalar");
  EXPECT_EQ(active().isa, Isa::scalar);
  select_isa("auto");
}

// Widest path on 3 nodes checked by hand: 0->1 (5), 1->2 (3) gives 0->2 = 3.
TEST(KernelsTest, WidestPathSmallExample) {
  for (Isa isa : available_isas()) {
    std::vector<int32_t> m = {0, 5, 0,
                              0, 0, 3,
                              0, 0, 0};
    table_for(isa).widest_path(m.data(), 3);
    EXPECT_EQ(m[0 * 3 + 2], 3) << to_string(isa);
    EXPECT_EQ(m[2 * 3 + 0], 0) << to_string(isa);
  }
}

class KernelEquivalence : public ::testing::TestWithParam<Isa> {};

TEST_P(KernelEquivalence, WidestPathMatchesScalar) {
  const KernelTable& simd = table_for(GetParam());
  Rng rng(7);
  for (size_t n : {1u, 2u, 3u, 5u, 7u, 8u, 9u, 16u, 17u, 33u, 40u}) {
    for (int rep = 0; rep < 20; ++rep) {
      auto a = random_matrix(rng, n, 50);
      auto b = a;
      detail::kScalarTable.widest_path(a.data(), n);
      simd.widest_path(b.data(), n);
      ASSERT_EQ(a, b) << "n=" << n;
    }
  }
}

TEST_P(KernelEquivalence, AccumulatePairwiseMatchesScalar) {
  const KernelTable& simd = table_for(GetParam());
  Rng rng(11);
  for (size_t n : {1u, 3u, 8u, 9u, 15u, 32u, 37u}) {
    std::vector<int32_t> a(n * n, 0);
    auto b = a;
    for (int voter = 0; voter < 25; ++voter) {
      std::vector<int32_t> pos(n);
      for (auto& p : pos) p = static_cast<int32_t>(rng.below(n));
      detail::kScalarTable.accumulate_pairwise(pos.data(), a.data(), n);
      simd.accumulate_pairwise(pos.data(), b.data(), n);
    }
    ASSERT_EQ(a, b) << "n=" << n;
  }
}

TEST_P(KernelEquivalence, FloatingReductionsAreBitIdentical) {
  const KernelTable& simd = table_for(GetParam());
  Rng rng(13);
  for (size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 13u, 64u, 257u}) {
    std::vector<double> x(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = rng.normal() * 1e3;
      y[i] = rng.normal() * 1e-2;
    }
    double d0 = detail::kScalarTable.dot(x.data(), y.data(), n);
    double d1 = simd.dot(x.data(), y.data(), n);
    double s0 = detail::kScalarTable.squared_distance(x.data(), y.data(), n);
    double s1 = simd.squared_distance(x.data(), y.data(), n);
    EXPECT_EQ(std::memcmp(&d0, &d1, sizeof d0), 0) << "n=" << n;
    EXPECT_EQ(std::memcmp(&s0, &s1, sizeof s0), 0) << "n=" << n;
  }
}

INSTANTIATE_TEST_SUITE_P(AllIsas, KernelEquivalence, ::testing::ValuesIn(available_isas()),
                         [](const auto& info) { return std::string(to_string(info.param)); });

}  // namespace
}  // namespace concord::kernels
