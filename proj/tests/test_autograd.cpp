#include <doctest.h>

#include <functional>
#include <random>

#include "paste/autograd.hpp"

using paste::ad::Expr;
using paste::ad::Graph;
using paste::ad::Matrix;
using paste::ad::Parameter;

namespace {

Matrix<double> random_matrix(std::mt19937_64& rng, int r, int c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix<double> m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

using Builder = std::function<Expr(Graph<double>&, Parameter<double>&, Parameter<double>&)>;

/// Max absolute difference between backprop and central differences.
double gradient_gap(Builder f, Parameter<double>& a, Parameter<double>& b) {
  Graph<double> g;
  a.zero_grad();
  b.zero_grad();
  g.backward(f(g, a, b));
  double gap = 0.0;
  for (Parameter<double>* p : {&a, &b}) {
    for (int i = 0; i < p->value.size(); ++i) {
      const double keep = p->value.data()[i];
      p->value.data()[i] = keep + 1e-6;
      Graph<double> gp;
      const double up = gp.scalar(f(gp, a, b));
      p->value.data()[i] = keep - 1e-6;
      Graph<double> gm;
      const double down = gm.scalar(f(gm, a, b));
      p->value.data()[i] = keep;
      gap = std::max(gap, std::abs((up - down) / 2e-6 - p->grad.data()[i]));
    }
  }
  return gap;
}

Expr reduce(Graph<double>& g, Expr x) {
  // Weighted sum so every entry gets a distinct upstream gradient.
  const auto& v = g.value(x);
  Matrix<double> w(v.cols(), 1);
  for (int i = 0; i < w.size(); ++i) w(i) = 0.3 + 0.1 * i;
  Matrix<double> r(1, v.rows());
  for (int i = 0; i < r.size(); ++i) r(i) = 1.0 - 0.2 * i;
  return g.matmul(g.matmul(g.constant(r), x), g.constant(w));
}

}  // namespace

TEST_CASE("autograd ops match finite differences") {
  std::mt19937_64 rng(5);
  Parameter<double> a{random_matrix(rng, 3, 4), {}};
  Parameter<double> b{random_matrix(rng, 4, 2), {}};
  Parameter<double> c{random_matrix(rng, 3, 1), {}};
  Parameter<double> d{random_matrix(rng, 3, 4), {}};

  const std::vector<std::pair<const char*, Builder>> cases{
      {"matmul+tanh", [](auto& g, auto& x, auto& y) { return reduce(g, g.tanh(g.matmul(g.parameter(x), g.parameter(y)))); }},
      {"sigmoid*mul", [](auto& g, auto& x, auto& y) {
         return reduce(g, g.cwise_mul(g.sigmoid(g.parameter(x)), g.tanh(g.parameter(y))));
       }},
      {"softmax+neg_log", [](auto& g, auto& x, auto&) { return g.neg_log(g.softmax(g.parameter(x)), 5, 1e-12); }},
      {"broadcast add", [](auto& g, auto& x, auto& y) { return reduce(g, g.tanh(g.add(g.parameter(x), g.parameter(y)))); }},
      {"rows/col/cat", [](auto& g, auto& x, auto&) {
         const Expr p = g.parameter(x);
         const Expr top = g.rows(p, 0, 2);
         const Expr c1 = g.col(p, 1);
         const Expr stacked = reduce(g, g.tanh(g.vcat({g.hcat({top, top}), g.repeat_cols(c1, 8)})));
         return g.add(stacked, reduce(g, g.tanh(g.transpose(p))));
       }},
      {"scale/sum", [](auto& g, auto& x, auto& y) {
         const Expr p = g.parameter(x);
         const std::vector<Expr> parts{g.scale(p, 2.5), g.tanh(p), g.cwise_mul(p, g.parameter(y))};
         return reduce(g, g.sum(parts));
       }},
      {"lookup", [](auto& g, auto& x, auto&) { return reduce(g, g.tanh(g.lookup(x, 2))); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    Parameter<double>& second = std::string(name) == "broadcast add" ? c : (std::string(name) == "matmul+tanh" ? b : d);
    CHECK(gradient_gap(f, a, second) < 1e-7);
  }
}

TEST_CASE("parameter nodes are shared within a graph") {
  Parameter<double> p{Matrix<double>::Constant(1, 1, 3.0), {}};
  Graph<double> g;
  const Expr x = g.parameter(p);
  const Expr y = g.parameter(p);
  CHECK(x.id == y.id);
  g.backward(g.cwise_mul(x, y));
  CHECK(p.grad(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("softmax is normalized and neg_log clamps") {
  Graph<double> g;
  Matrix<double> m(1, 4);
  m << 1000.0, 0.0, -1000.0, 2.0;
  const Expr s = g.softmax(g.constant(m));
  CHECK(g.value(s).sum() == doctest::Approx(1.0));
  CHECK(g.scalar(g.neg_log(s, 2, 1e-12)) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("shape errors") {
  Graph<double> g;
  const Expr a = g.zeros(2, 3);
  const Expr b = g.zeros(2, 3);
  CHECK_THROWS(g.matmul(a, b));
  CHECK_THROWS(g.add(a, g.zeros(3, 1)));
}
