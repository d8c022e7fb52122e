#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "hicl/errors.hpp"
#include "hicl/grad_check.hpp"
#include "hicl/graph.hpp"
#include "hicl/rng.hpp"
#include "hicl/tensor.hpp"

using namespace hicl;

namespace {

Tensor random_tensor(const RngStream& s, std::uint64_t& cursor,
                     std::vector<std::size_t> shape, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.data()[i] = s.uniform_at(cursor++, lo, hi);
  }
  return t;
}

}  // namespace

TEST_CASE("tensor shape and payload basics") {
  Tensor m = Tensor::from_matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6.0);
  CHECK_THROWS_AS(Tensor::from_matrix(2, 2, {1, 2, 3}), NumericsError);

  Tensor v = Tensor::from_vector({1, 2});
  CHECK(v.rank() == 1);
  CHECK(v.size() == 2);

  Tensor c = m.clone();
  c.data()[0] = 99;
  CHECK(m.at(0) == 1.0);  // clone owns fresh storage
}

TEST_CASE("rng streams are reproducible and purpose-separated") {
  RngStream a(42, RngPurpose::kDropoutA);
  RngStream a2(42, RngPurpose::kDropoutA);
  RngStream b(42, RngPurpose::kDropoutB);

  for (std::uint64_t i = 0; i < 100; ++i) {
    CHECK(a.bits_at(i) == a2.bits_at(i));
    const double u = a.uniform_at(i);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::size_t disagreements = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    if (a.bits_at(i) != b.bits_at(i)) ++disagreements;
  }
  CHECK(disagreements == 100);

  RngStream d1 = a.derived(7);
  RngStream d2 = a.derived(8);
  CHECK(d1.bits_at(0) != d2.bits_at(0));
  CHECK(d1.bits_at(0) == a.derived(7).bits_at(0));
}

TEST_CASE("value_and_grad worked examples") {
  SUBCASE("square") {
    auto f = [](Graph& g, const std::vector<Var>& xs) {
      return g.mul(xs[0], xs[0]);
    };
    auto vg = value_and_grad(f, {Tensor::scalar(3.0)});
    CHECK(vg.value == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(vg.grads[0].at(0) == doctest::Approx(6.0).epsilon(1e-14));
  }
  SUBCASE("sum") {
    auto f = [](Graph& g, const std::vector<Var>& xs) {
      return g.sum_all(xs[0]);
    };
    auto vg = value_and_grad(f, {Tensor::from_vector({1, 2, 3})});
    CHECK(vg.value == doctest::Approx(6.0));
    for (std::size_t i = 0; i < 3; ++i) CHECK(vg.grads[0].at(i) == 1.0);
  }
  SUBCASE("log-sum-exp") {
    auto f = [](Graph& g, const std::vector<Var>& xs) {
      return g.log(g.sum_all(g.exp(xs[0])));
    };
    auto vg = value_and_grad(f, {Tensor::from_vector({0, 0})});
    CHECK(vg.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(vg.grads[0].at(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(vg.grads[0].at(1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("non-scalar output is rejected") {
    auto f = [](Graph& g, const std::vector<Var>& xs) {
      return g.add(xs[0], xs[0]);
    };
    CHECK_THROWS_AS(value_and_grad(f, {Tensor::from_vector({1, 2})}),
                    NumericsError);
  }
}

TEST_CASE("gradient accumulates across shared subexpressions") {
  auto f = [](Graph& g, const std::vector<Var>& xs) {
    Var y = g.add(xs[0], xs[0]);
    return g.mul(y, y);  // (2x)^2, derivative 8x
  };
  auto vg = value_and_grad(f, {Tensor::scalar(1.5)});
  CHECK(vg.value == doctest::Approx(9.0));
  CHECK(vg.grads[0].at(0) == doctest::Approx(12.0).epsilon(1e-14));
}

TEST_CASE("nan policy identifies the producing op") {
  Graph g;
  Var x = g.leaf(Tensor::scalar(-1.0), true);
  CHECK_THROWS_WITH_AS(g.log(x), doctest::Contains("log"), NumericsError);
}

TEST_CASE("cosine similarity") {
  auto cos_value = [](std::vector<double> u, std::vector<double> v) {
    Graph g;
    Var a = g.leaf(Tensor::from_vector(std::move(u)), false);
    Var b = g.leaf(Tensor::from_vector(std::move(v)), false);
    return g.value(g.cosine_sim(a, b)).at(0);
  };

  CHECK(cos_value({1, 0}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cos_value({1, 0}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(cos_value({1, 1}, {1, 0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

  SUBCASE("zero norm is an error") {
    Graph g;
    Var a = g.leaf(Tensor::from_vector({0, 0}), false);
    Var b = g.leaf(Tensor::from_vector({1, 0}), false);
    CHECK_THROWS_AS(g.cosine_sim(a, b), NumericsError);
  }

  SUBCASE("scale invariance and self-similarity over 100 seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      RngStream s(seed, RngPurpose::kData);
      std::uint64_t cur = 0;
      Tensor u = random_tensor(s, cur, {5});
      Tensor v = random_tensor(s, cur, {5});
      const double c = s.uniform_at(cur++, 0.001, 1000.0);
      const double d = s.uniform_at(cur++, 0.001, 1000.0);

      Tensor cu = u.clone(), dv = v.clone();
      for (std::size_t i = 0; i < 5; ++i) {
        cu.data()[i] *= c;
        dv.data()[i] *= d;
      }
      Graph g;
      double base = g.value(g.cosine_sim(g.constant(u.clone()),
                                         g.constant(v.clone()))).at(0);
      double scaled = g.value(g.cosine_sim(g.constant(std::move(cu)),
                                           g.constant(std::move(dv)))).at(0);
      CHECK(std::fabs(base - scaled) < 1e-12);

      double self = g.value(g.cosine_sim(g.constant(u.clone()),
                                         g.constant(u.clone()))).at(0);
      CHECK(std::fabs(self - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("finite_diff_check on the quadratic") {
  auto f = [](Graph& g, const std::vector<Var>& xs) {
    return g.mul(xs[0], xs[0]);
  };
  FdReport r = finite_diff_check(f, {Tensor::scalar(3.0)}, 1e-5);
  CHECK(r.max_rel_err < 1e-8);
  CHECK(r.coords_checked == 1);

  CHECK_THROWS_AS(finite_diff_check(f, {Tensor::scalar(3.0)}, 0.5),
                  NumericsError);
  CHECK_THROWS_AS(finite_diff_check(f, {Tensor::scalar(3.0)}, 0.0),
                  NumericsError);
}

TEST_CASE("finite_diff_check rejects non-deterministic functions") {
  auto f = [](Graph& g, const std::vector<Var>& xs) {
    static int calls = 0;
    return g.add(g.sum_all(xs[0]), g.constant(0.001 * ++calls));
  };
  CHECK_THROWS_WITH_AS(finite_diff_check(f, {Tensor::scalar(1.0)}, 1e-5),
                       doctest::Contains("deterministic"), NumericsError);
}

TEST_CASE("every primitive passes the central-difference oracle") {
  struct Case {
    const char* name;
    TensorFn fn;
    double lo, hi;
    std::vector<std::vector<std::size_t>> shapes;
  };

  const std::vector<Case> cases = {
      {"add", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.add(xs[0], xs[1]));
       }, -1, 1, {{2, 3}, {2, 3}}},
      {"sub", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.mul(g.sub(xs[0], xs[1]), xs[0]));
       }, -1, 1, {{2, 3}, {2, 3}}},
      {"mul", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.mul(xs[0], xs[1]));
       }, -1, 1, {{2, 3}, {2, 3}}},
      {"div", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.div(xs[0], xs[1]));
       }, 0.5, 2.0, {{2, 3}, {2, 3}}},
      {"scale", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.scale(xs[0], -1.7));
       }, -1, 1, {{2, 3}}},
      {"exp", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.exp(xs[0]));
       }, -1, 1, {{2, 3}}},
      {"log", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.log(xs[0]));
       }, 0.5, 3.0, {{2, 3}}},
      {"log1p", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.log1p(xs[0]));
       }, -0.5, 3.0, {{2, 3}}},
      {"tanh", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.tanh(xs[0]));
       }, -2, 2, {{2, 3}}},
      {"matmul", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.mul(g.matmul(xs[0], xs[1]),
                                g.matmul(xs[0], xs[1])));
       }, -1, 1, {{2, 3}, {3, 4}}},
      {"transpose", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.matmul(xs[0], g.transpose(xs[0])));
       }, -1, 1, {{2, 3}}},
      {"sum_cols", [](Graph& g, const std::vector<Var>& xs) {
         Var s = g.sum_cols(xs[0]);
         return g.sum_all(g.mul(s, s));
       }, -1, 1, {{3, 4}}},
      {"max_cols", [](Graph& g, const std::vector<Var>& xs) {
         Var m = g.max_cols(xs[0]);
         return g.sum_all(g.mul(m, m));
       }, -1, 1, {{3, 4}}},
      {"broadcast_col", [](Graph& g, const std::vector<Var>& xs) {
         Var b = g.broadcast_to(xs[0], 3, 4);
         return g.sum_all(g.mul(b, b));
       }, -1, 1, {{3, 1}}},
      {"broadcast_row", [](Graph& g, const std::vector<Var>& xs) {
         Var b = g.broadcast_to(xs[0], 3, 4);
         return g.sum_all(g.exp(b));
       }, -1, 1, {{4}}},
      {"reshape", [](Graph& g, const std::vector<Var>& xs) {
         Var r = g.reshape(xs[0], {3, 2});
         return g.sum_all(g.matmul(r, g.transpose(r)));
       }, -1, 1, {{2, 3}}},
      {"gather_rows", [](Graph& g, const std::vector<Var>& xs) {
         Var picked = g.gather_rows(xs[0], {2, 0, 2});
         return g.sum_all(g.mul(picked, picked));
       }, -1, 1, {{3, 4}}},
      {"slice_cols", [](Graph& g, const std::vector<Var>& xs) {
         Var s = g.slice_cols(xs[0], 1, 3);
         return g.sum_all(g.exp(s));
       }, -1, 1, {{3, 4}}},
      {"concat_rows", [](Graph& g, const std::vector<Var>& xs) {
         std::vector<Var> parts{xs[0], xs[1]};
         Var c = g.concat_rows(parts);
         return g.sum_all(g.mul(c, c));
       }, -1, 1, {{2, 3}, {1, 3}}},
      {"softmax", [](Graph& g, const std::vector<Var>& xs) {
         Var p = g.softmax_cols(xs[0]);
         return g.sum_all(g.mul(p, p));
       }, -2, 2, {{3, 4}}},
      {"layer_norm", [](Graph& g, const std::vector<Var>& xs) {
         Var ln = g.layer_norm(xs[0], xs[1], xs[2]);
         return g.sum_all(g.mul(ln, ln));
       }, -1, 1, {{3, 4}, {4}, {4}}},
      {"gelu", [](Graph& g, const std::vector<Var>& xs) {
         return g.sum_all(g.gelu(xs[0]));
       }, -2, 2, {{3, 4}}},
      {"row_normalize+cosine", [](Graph& g, const std::vector<Var>& xs) {
         Var n = g.row_normalize(xs[0]);
         return g.cosine_sim(g.gather_rows(n, {0}), g.gather_rows(n, {1}));
       }, 0.2, 1.0, {{2, 4}}},
  };

  for (const Case& c : cases) {
    CAPTURE(c.name);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      RngStream s(seed, RngPurpose::kData);
      std::uint64_t cur = 0;
      std::vector<Tensor> inputs;
      for (const auto& shape : c.shapes) {
        inputs.push_back(random_tensor(s, cur, shape, c.lo, c.hi));
      }
      FdReport r = finite_diff_check(c.fn, inputs, 1e-6);
      worst = std::max(worst, r.max_rel_err);
    }
    CHECK_MESSAGE(worst < 1e-4, c.name << " worst rel err " << worst);
  }
}

TEST_CASE("max_cols splits gradient across ties") {
  auto f = [](Graph& g, const std::vector<Var>& xs) {
    return g.sum_all(g.max_cols(xs[0]));
  };
  auto vg = value_and_grad(f, {Tensor::from_matrix(1, 3, {2, 2, 1})});
  CHECK(vg.grads[0].at(0) == doctest::Approx(0.5));
  CHECK(vg.grads[0].at(1) == doctest::Approx(0.5));
  CHECK(vg.grads[0].at(2) == 0.0);
}

TEST_CASE("constants never accumulate gradients") {
  Graph g;
  Var x = g.leaf(Tensor::scalar(2.0), true);
  Var c = g.constant(5.0);
  Var y = g.mul(x, c);
  g.backward(y);
  CHECK(g.grad(x) != nullptr);
  CHECK(g.grad(c) == nullptr);
  CHECK_FALSE(g.requires_grad(c));
}
