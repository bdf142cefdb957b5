#include <cmath>

#include "doctest.h"

#include "cwmi/graph.hpp"
#include "cwmi/rng.hpp"

using namespace cwmi;

namespace {

void fill_leaf(Graph& g, int id, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  double* p = g.leaf_data(id);
  const std::int64_t n = g.value(id).size();
  for (std::int64_t i = 0; i < n; ++i) p[i] = scale * rng.normal();
}

double checked(Graph& g, int loss) {
  const GradCheckResult r = grad_check(g, loss, 1e-5, 17, 0);
  REQUIRE(r.coords_checked > 0);
  return r.max_rel_err;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("matmul forward matches a hand computation") {
  Graph g;
  const int a = g.leaf({2, 3}, true, "a");
  const int b = g.leaf({3, 2}, true, "b");
  const int c = g.matmul(a, b);
  double av[] = {1, 2, 3, 4, 5, 6};
  double bv[] = {7, 8, 9, 10, 11, 12};
  std::copy(av, av + 6, g.leaf_data(a));
  std::copy(bv, bv + 6, g.leaf_data(b));
  g.forward();
  CHECK(g.value(c).at(0, 0) == 58.0);
  CHECK(g.value(c).at(0, 1) == 64.0);
  CHECK(g.value(c).at(1, 0) == 139.0);
  CHECK(g.value(c).at(1, 1) == 154.0);
}

TEST_CASE("matmul gradients agree with central differences") {
  SUBCASE("plain") {
    Graph g;
    const int a = g.leaf({3, 4}, true, "a");
    const int b = g.leaf({4, 2}, true, "b");
    const int t = g.leaf({3, 2}, false, "t");
    const int loss = g.mse(g.matmul(a, b), t);
    fill_leaf(g, a, 1);
    fill_leaf(g, b, 2);
    fill_leaf(g, t, 3);
    CHECK(checked(g, loss) < 1e-6);
  }
  SUBCASE("transposed rhs") {
    Graph g;
    const int a = g.leaf({3, 4}, true, "a");
    const int b = g.leaf({2, 4}, true, "b");
    const int t = g.leaf({3, 2}, false, "t");
    const int loss = g.mse(g.matmul(a, b, true), t);
    fill_leaf(g, a, 4);
    fill_leaf(g, b, 5);
    fill_leaf(g, t, 6);
    CHECK(checked(g, loss) < 1e-6);
  }
  SUBCASE("batched") {
    Graph g;
    const int a = g.leaf({2, 3, 4}, true, "a");
    const int b = g.leaf({2, 4, 5}, true, "b");
    const int t = g.leaf({2, 3, 5}, false, "t");
    const int loss = g.mse(g.matmul(a, b), t);
    fill_leaf(g, a, 7);
    fill_leaf(g, b, 8);
    fill_leaf(g, t, 9);
    CHECK(checked(g, loss) < 1e-6);
  }
  SUBCASE("batched transposed rhs") {
    Graph g;
    const int a = g.leaf({2, 3, 4}, true, "a");
    const int b = g.leaf({2, 5, 4}, true, "b");
    const int t = g.leaf({2, 3, 5}, false, "t");
    const int loss = g.mse(g.matmul(a, b, true), t);
    fill_leaf(g, a, 10);
    fill_leaf(g, b, 11);
    fill_leaf(g, t, 12);
    CHECK(checked(g, loss) < 1e-6);
  }
}

TEST_CASE("add broadcasting works for every accepted pattern") {
  auto run = [](std::vector<int> sa, std::vector<int> sb) {
    Graph g;
    const int a = g.leaf(sa, true, "a");
    const int b = g.leaf(sb, true, "b");
    const int sum = g.add(a, b);
    const int t = g.leaf(sa, false, "t");
    const int loss = g.mse(sum, t);
    fill_leaf(g, a, 21);
    fill_leaf(g, b, 22);
    fill_leaf(g, t, 23);
    const GradCheckResult r = grad_check(g, loss, 1e-5, 5, 0);
    CHECK(r.max_rel_err < 1e-6);
    return g.value(sum);
  };
  SUBCASE("same shape") { run({3, 4}, {3, 4}); }
  SUBCASE("row vector onto matrix") {
    const Tensor v = run({3, 4}, {4});
    CHECK(v.rank() == 2);
  }
  SUBCASE("(1,n) onto matrix") { run({3, 4}, {1, 4}); }
  SUBCASE("matrix onto batch") { run({2, 3, 4}, {3, 4}); }
  SUBCASE("(g,1,n) onto batch") { run({2, 3, 4}, {2, 1, 4}); }
  SUBCASE("incompatible shapes are rejected") {
    Graph g;
    const int a = g.leaf({3, 4}, true, "a");
    const int b = g.leaf({3}, true, "b");
    CHECK_THROWS_AS(g.add(a, b), DimensionError);
  }
}

TEST_CASE("broadcast add accumulates gradients over the broadcast axis") {
  Graph g;
  const int a = g.leaf({3, 2}, false, "a");
  const int b = g.leaf({2}, true, "b");
  const int t = g.leaf({3, 2}, false, "t");
  const int loss = g.mse(g.add(a, b), t);
  g.leaf_data(a)[0] = 1;  // rest zero
  fill_leaf(g, t, 31);
  g.forward();
  g.backward(loss);
  // d(loss)/db_j = sum_i 2 (a_ij + b_j - t_ij) / 6
  const Tensor& tv = g.value(t);
  double expect0 = 0.0, expect1 = 0.0;
  const Tensor& av = g.value(a);
  for (int i = 0; i < 3; ++i) {
    expect0 += 2.0 * (av.at(i, 0) - tv.at(i, 0)) / 6.0;
    expect1 += 2.0 * (av.at(i, 1) - tv.at(i, 1)) / 6.0;
  }
  CHECK(g.grad(b).at(0) == doctest::Approx(expect0).epsilon(1e-12));
  CHECK(g.grad(b).at(1) == doctest::Approx(expect1).epsilon(1e-12));
}

TEST_CASE("layer norm standardizes rows") {
  Graph g;
  const int x = g.leaf({4, 8}, true, "x");
  const int gamma = g.leaf({8}, true, "g");
  const int beta = g.leaf({8}, true, "b");
  const int y = g.layer_norm(x, gamma, beta);
  fill_leaf(g, x, 41, 3.0);
  for (int j = 0; j < 8; ++j) {
    g.leaf_data(gamma)[j] = 1.0;
    g.leaf_data(beta)[j] = 0.0;
  }
  g.forward();
  for (int i = 0; i < 4; ++i) {
    double mean = 0, var = 0;
    for (int j = 0; j < 8; ++j) mean += g.value(y).at(i, j);
    mean /= 8;
    for (int j = 0; j < 8; ++j) {
      const double d = g.value(y).at(i, j) - mean;
      var += d * d;
    }
    var /= 8;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // epsilon in the denominator
  }
}

TEST_CASE("layer norm gradients pass central differences") {
  Graph g;
  const int x = g.leaf({3, 6}, true, "x");
  const int gamma = g.leaf({6}, true, "g");
  const int beta = g.leaf({6}, true, "b");
  const int t = g.leaf({3, 6}, false, "t");
  const int loss = g.mse(g.layer_norm(x, gamma, beta), t);
  fill_leaf(g, x, 51, 2.0);
  fill_leaf(g, gamma, 52);
  fill_leaf(g, beta, 53);
  fill_leaf(g, t, 54);
  CHECK(checked(g, loss) < 1e-5);
}

TEST_CASE("softmax rows sum to one and mask zeroes exactly") {
  Graph g;
  const int x = g.leaf({2, 5}, true, "x");
  const int y = g.softmax(x);
  fill_leaf(g, x, 61, 2.0);
  g.leaf_data(x)[3] = -1e30;  // masked column of row 0
  g.forward();
  for (int i = 0; i < 2; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 5; ++j) sum += g.value(y).at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(g.value(y).at(0, 3) == 0.0);
}

TEST_CASE("softmax gradient") {
  Graph g;
  const int x = g.leaf({3, 4}, true, "x");
  const int t = g.leaf({3, 4}, false, "t");
  const int loss = g.mse(g.softmax(x), t);
  fill_leaf(g, x, 71);
  fill_leaf(g, t, 72);
  CHECK(checked(g, loss) < 1e-5);
}

TEST_CASE("gelu values and gradient") {
  Graph g;
  const int x = g.leaf({1, 5}, true, "x");
  const int y = g.gelu(x);
  double* p = g.leaf_data(x);
  p[0] = 0.0;
  p[1] = 10.0;
  p[2] = -10.0;
  p[3] = 1.0;
  p[4] = -1.0;
  g.forward();
  CHECK(g.value(y).at(0, 0) == 0.0);
  CHECK(g.value(y).at(0, 1) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(std::abs(g.value(y).at(0, 2)) < 1e-6);
  CHECK(g.value(y).at(0, 3) == doctest::Approx(0.8411919906).epsilon(1e-6));

  Graph g2;
  const int x2 = g2.leaf({2, 6}, true, "x");
  const int t2 = g2.leaf({2, 6}, false, "t");
  const int loss = g2.mse(g2.gelu(x2), t2);
  fill_leaf(g2, x2, 81, 1.5);
  fill_leaf(g2, t2, 82);
  CHECK(checked(g2, loss) < 1e-6);
}

TEST_CASE("mse value and gradient") {
  Graph g;
  const int a = g.leaf({2, 2}, true, "a");
  const int b = g.leaf({2, 2}, false, "b");
  const int loss = g.mse(a, b);
  double av[] = {1, 2, 3, 4};
  double bv[] = {0, 0, 0, 0};
  std::copy(av, av + 4, g.leaf_data(a));
  std::copy(bv, bv + 4, g.leaf_data(b));
  g.forward();
  CHECK(g.value(loss).item() == doctest::Approx((1 + 4 + 9 + 16) / 4.0).epsilon(1e-15));
  g.backward(loss);
  CHECK(g.grad(a).at(0, 0) == doctest::Approx(2.0 * 1 / 4).epsilon(1e-15));
  CHECK(g.grad(a).at(1, 1) == doctest::Approx(2.0 * 4 / 4).epsilon(1e-15));
}

TEST_CASE("slice, concat, transpose and reshape round-trip") {
  Graph g;
  const int a = g.leaf({3, 6}, true, "a");
  const int left = g.slice(a, 0, 3, 0, 2);
  const int right = g.slice(a, 0, 3, 2, 4);
  const int back = g.concat_cols({left, right});
  const int tr = g.transpose(g.transpose(back));
  const int re = g.reshape(tr, {6, 3});
  const int t = g.leaf({6, 3}, false, "t");
  const int loss = g.mse(re, t);
  fill_leaf(g, a, 91);
  fill_leaf(g, t, 92);
  g.forward();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 6; ++j) {
      CHECK(g.value(tr).at(i, j) == g.value(a).at(i, j));
    }
  }
  CHECK(checked(g, loss) < 1e-6);
}

TEST_CASE("row slices compose with scale into exact gradients") {
  Graph g;
  const int a = g.leaf({4, 3}, true, "a");
  const int top = g.slice(a, 0, 2, 0, 3);
  const int bottom = g.slice(a, 2, 2, 0, 3);
  const int diff = g.add(bottom, g.scale(top, -1.0));
  const int t = g.leaf({2, 3}, false, "t");
  const int loss = g.mse(diff, t);
  fill_leaf(g, a, 101);
  fill_leaf(g, t, 102);
  CHECK(checked(g, loss) < 1e-6);
}

TEST_CASE("frozen leaves get no gradient storage") {
  Graph g;
  const int w = g.leaf({3, 3}, true, "w");
  const int frozen = g.leaf({3, 3}, false, "frozen");
  const int t = g.leaf({3, 3}, false, "t");
  const int prod = g.matmul(frozen, w);
  const int loss = g.mse(prod, t);
  fill_leaf(g, w, 111);
  fill_leaf(g, frozen, 112);
  fill_leaf(g, t, 113);
  g.forward();
  g.backward(loss);
  CHECK(g.has_grad(w));
  CHECK_FALSE(g.has_grad(frozen));
  CHECK_FALSE(g.has_grad(t));
}

TEST_CASE("a frozen-only branch is skipped entirely") {
  Graph g;
  const int w = g.leaf({2, 2}, true, "w");
  const int f1 = g.leaf({2, 2}, false, "f1");
  const int f2 = g.leaf({2, 2}, false, "f2");
  const int dead = g.matmul(f1, f2);  // no trainable ancestor
  const int live = g.matmul(f1, w);
  const int both = g.add(live, dead);
  const int t = g.leaf({2, 2}, false, "t");
  const int loss = g.mse(both, t);
  fill_leaf(g, w, 121);
  fill_leaf(g, f1, 122);
  fill_leaf(g, f2, 123);
  fill_leaf(g, t, 124);
  g.forward();
  g.backward(loss);
  CHECK_FALSE(g.has_grad(dead));
  CHECK(g.has_grad(live));
}

TEST_CASE("backward demands a scalar loss") {
  Graph g;
  const int a = g.leaf({2, 2}, true, "a");
  const int b = g.leaf({2, 2}, true, "b");
  const int s = g.add(a, b);
  g.forward();
  CHECK_THROWS_AS(g.backward(s), ContractError);
}

TEST_CASE("grad_check validates its step size") {
  Graph g;
  const int a = g.leaf({2, 2}, true, "a");
  const int t = g.leaf({2, 2}, false, "t");
  const int loss = g.mse(a, t);
  fill_leaf(g, a, 131);
  CHECK_THROWS_AS(grad_check(g, loss, 1.0, 1, 0), ContractError);
  CHECK_THROWS_AS(grad_check(g, loss, 1e-12, 1, 0), ContractError);
}

TEST_CASE("grad_check leaves leaf values untouched") {
  Graph g;
  const int a = g.leaf({2, 3}, true, "a");
  const int t = g.leaf({2, 3}, false, "t");
  const int loss = g.mse(a, t);
  fill_leaf(g, a, 141);
  fill_leaf(g, t, 142);
  g.forward();
  const double before = g.value(a).at(1, 2);
  const double loss_before = g.value(loss).item();
  grad_check(g, loss, 1e-5, 7, 2);
  CHECK(g.value(a).at(1, 2) == before);
  CHECK(g.value(loss).item() == loss_before);
}

TEST_CASE("coordinate sampling bounds the work") {
  Graph g;
  const int a = g.leaf({20, 20}, true, "a");
  const int t = g.leaf({20, 20}, false, "t");
  const int loss = g.mse(a, t);
  fill_leaf(g, a, 151);
  fill_leaf(g, t, 152);
  const GradCheckResult r = grad_check(g, loss, 1e-5, 3, 10);
  CHECK(r.coords_checked == 10);
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("scale by zero kills the gradient path value") {
  Graph g;
  const int a = g.leaf({2, 2}, true, "a");
  const int t = g.leaf({2, 2}, false, "t");
  const int loss = g.mse(g.scale(a, 0.0), t);
  fill_leaf(g, a, 161);
  fill_leaf(g, t, 162);
  g.forward();
  g.backward(loss);
  CHECK(g.grad(a).at(0, 0) == 0.0);
}

}  // TEST_SUITE
