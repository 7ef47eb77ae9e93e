#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "vreid/core/random.hpp"
#include "vreid/core/tensor.hpp"

using namespace vreid;

TEST_CASE("tensor shapes and indexing") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.dim(0) == 2);
  t(1, 2, 3) = 7.0;
  CHECK(t.data()[23] == 7.0);

  Tensor r = t.reshaped({6, 4});
  CHECK(r(5, 3) == 7.0);
  CHECK_THROWS_AS(t.reshaped({5, 5}), ValidationError);
  CHECK_THROWS_AS(t.dim(3), ValidationError);
}

TEST_CASE("tensor arithmetic helpers") {
  Tensor a = Tensor::full({2, 2}, 2.0);
  Tensor b = Tensor::full({2, 2}, 3.0);
  a.add_(b);
  CHECK(a(1, 1) == 5.0);
  a.scale_(0.5);
  CHECK(a(0, 0) == 2.5);
  CHECK(a.all_finite());
  a(0, 0) = std::numeric_limits<Scalar>::infinity();
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("random source determinism and serialization") {
  RandomSource a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

  const std::string state = a.serialize();
  const double expected = a.uniform();
  RandomSource c(0);
  c.deserialize(state);
  CHECK(c.uniform() == expected);
}

TEST_CASE("uniform_int stays in range and covers values") {
  RandomSource rng(7);
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) {
    const int v = rng.uniform_int(5);
    CHECK(v >= 0);
    CHECK(v < 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
  CHECK_THROWS_AS(rng.uniform_int(0), ValidationError);
}

TEST_CASE("sample_indices with and without replacement") {
  RandomSource rng(3);
  auto no_repl = rng.sample_indices(100, 4);
  std::set<int> unique(no_repl.begin(), no_repl.end());
  CHECK(unique.size() == 4);

  auto repl = rng.sample_indices(2, 6);
  CHECK(repl.size() == 6);
  for (int v : repl) CHECK((v == 0 || v == 1));
}

TEST_CASE("shuffle is a permutation") {
  RandomSource rng(11);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  rng.shuffle(v);
  std::set<int> s(v.begin(), v.end());
  CHECK(s.size() == 50);
}

TEST_CASE("derived seeds differ by path") {
  const auto a = derive_seed(1, {2, 3});
  const auto b = derive_seed(1, {3, 2});
  const auto c = derive_seed(2, {2, 3});
  CHECK(a != b);
  CHECK(a != c);
  CHECK(a == derive_seed(1, {2, 3}));
}

TEST_CASE("normal moments are sane") {
  RandomSource rng(5);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}
