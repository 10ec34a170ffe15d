#include <doctest.h>

#include <cmath>
#include <random>

#include "eaf/tensor.hpp"
#include "support/helpers.hpp"

using eaf::Tape;
using eaf::Tensor;
using namespace eaf::testing;

TEST_CASE("matmul identity and small products") {
  Tape tape;
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor out = tape.matmul(eye, a);
  CHECK(out.data() == a.data());

  Tensor row({1, 2}, {1, 2});
  Tensor col({2, 1}, {3, 4});
  CHECK(tape.matmul(row, col).value() == 11.0);
}

TEST_CASE("matmul shape mismatch throws") {
  Tape tape;
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS(tape.matmul(a, b));
}

TEST_CASE("matmul gradient matches finite differences") {
  std::mt19937_64 rng(7);
  Tensor a = random_tensor(rng, {3, 3});
  Tensor b = random_tensor(rng, {3, 3});
  const double err = gradcheck({a}, [&](Tape& t) { return t.sum(t.matmul(a, b)); });
  CHECK(err < 1e-6);
}

TEST_CASE("softmax_rows closed forms") {
  Tape tape;
  Tensor z({1, 3}, {0, 0, 0});
  Tensor s = tape.softmax_rows(z);
  for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Tensor big({1, 3}, {1000, 0, 0});
  Tensor sb = tape.softmax_rows(big);
  CHECK(std::abs(sb.at(0) - 1.0) < 1e-12);
  CHECK(std::abs(sb.at(1)) < 1e-12);
  CHECK(std::abs(sb.at(2)) < 1e-12);

  Tensor r({1, 2}, {1, 0});
  Tensor sr = tape.softmax_rows(r);
  const double e = std::exp(1.0);
  CHECK(sr.at(0) == doctest::Approx(e / (e + 1)).epsilon(1e-14));
  CHECK(sr.at(1) == doctest::Approx(1 / (e + 1)).epsilon(1e-14));
}

TEST_CASE("softmax_rows rows sum to 1 within 1e-12 and lie in [0,1]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    Tensor x = random_tensor(rng, {5, 7}, -30, 30);
    Tensor s = tape.softmax_rows(x);
    for (std::size_t r = 0; r < 5; ++r) {
      double sum = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        const double v = s(r, c);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("elementwise ops") {
  Tape tape;
  Tensor a({2}, {1, 2});
  Tensor b({2}, {3, 4});
  Tensor m = tape.mul(a, b);
  CHECK(m.at(0) == 3.0);
  CHECK(m.at(1) == 8.0);
  CHECK(tape.exp(Tensor({1}, {0})).value() == 1.0);
  // log input is clamped at 1e-12 so a zero stays finite
  CHECK(tape.log(Tensor({1}, {0})).value() == doctest::Approx(std::log(1e-12)));
  CHECK_THROWS(tape.add(a, Tensor({3}, {1, 2, 3})));
  // scalar broadcast on either side
  Tensor s = Tensor::scalar(2.0);
  Tensor sa = tape.mul(s, a);
  CHECK(sa.at(1) == 4.0);
}

TEST_CASE("gradient of sum(exp(x)) equals exp(x)") {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor(rng, {4});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = tape.sum(tape.exp(x));
  tape.backward(loss);
  const auto g = x.grad();
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(g[i] == doctest::Approx(std::exp(x.at(i))).epsilon(1e-14));
  CHECK(gradcheck({x}, [&](Tape& t) { return t.sum(t.exp(x)); }) < 1e-6);
}

TEST_CASE("backward basics") {
  Tensor x({3}, {5, -2, 0.5}, true);
  Tape tape;
  tape.backward(tape.sum(x));
  CHECK(x.grad() == std::vector<double>{1, 1, 1});

  Tensor y({2}, {1, 2}, true);
  Tape t2;
  t2.backward(t2.sum(t2.mul(y, y)));
  CHECK(y.grad() == std::vector<double>{2, 4});
}

TEST_CASE("backward rejects non-scalar loss and a reused tape") {
  Tensor x({2}, {1, 2}, true);
  Tape tape;
  Tensor v = tape.mul(x, x);
  CHECK_THROWS(tape.backward(v));
  Tensor s = tape.sum(v);
  tape.backward(s);
  CHECK_THROWS(tape.backward(s));
}

TEST_CASE("gradients accumulate across fan-out") {
  Tensor x({1}, {3.0}, true);
  Tape tape;
  Tensor loss = tape.sum(tape.add(tape.mul(x, x), x));  // x^2 + x
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("non-finite op results are an error") {
  Tape tape;
  CHECK_THROWS(tape.exp(Tensor({1}, {1e4})));
}

TEST_CASE("random compositions match finite differences over 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor a = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, {4, 3});
    Tensor v = random_tensor(rng, {1, 3});
    auto build = [&](Tape& t) {
      Tensor h = t.softmax_rows(t.add_rowvec(t.matmul(a, b), v));
      Tensor g = t.sigmoid(t.scale(t.matmul(b, a), 0.5));
      return t.add(t.mean(t.mul(h, t.relu(t.add_scalar(h, -0.2)))),
                   t.mean(t.log(t.add_scalar(g, 0.1))));
    };
    CHECK(gradcheck({a, b, v}, build) < 1e-4);
  }
}

TEST_CASE("power, neg, sub, transpose gradients") {
  std::mt19937_64 rng(21);
  Tensor a = random_tensor(rng, {3, 3}, 0.2, 2.0);
  Tensor b = random_tensor(rng, {3, 3});
  auto build = [&](Tape& t) {
    return t.sum(t.sub(t.power(a, 1.7), t.neg(t.transpose(t.mul(a, b)))));
  };
  CHECK(gradcheck({a, b}, build) < 1e-6);
}

TEST_CASE("concat and slice round-trip with gradients") {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor(rng, {2, 3});
  Tensor b = random_tensor(rng, {2, 2});
  {
    Tape tape;
    Tensor cat = tape.concat_cols({a, b});
    CHECK(cat.shape() == std::vector<std::size_t>{2, 5});
    Tensor back = tape.slice_cols(cat, 0, 3);
    CHECK(back.data() == a.data());
  }
  auto build = [&](Tape& t) {
    Tensor cat = t.concat_cols({a, b});
    return t.sum(t.mul(t.slice_cols(cat, 1, 4), t.slice_cols(cat, 0, 3)));
  };
  CHECK(gradcheck({a, b}, build) < 1e-6);

  Tensor c = random_tensor(rng, {1, 3});
  auto build_rows = [&](Tape& t) {
    return t.mean(t.power(t.concat_rows({a, c}), 2.0));
  };
  CHECK(gradcheck({a, c}, build_rows) < 1e-6);
}

TEST_CASE("gather_rows pads index -1 with zeros and scatter-adds gradient") {
  std::mt19937_64 rng(9);
  Tensor a = random_tensor(rng, {3, 2});
  Tape tape;
  Tensor g = tape.gather_rows(a, {2, -1, 0, 0});
  CHECK(g.shape() == std::vector<std::size_t>{4, 2});
  CHECK(g(1, 0) == 0.0);
  CHECK(g(1, 1) == 0.0);
  CHECK(g(0, 0) == a(2, 0));
  CHECK(g(2, 1) == a(0, 1));

  auto build = [&](Tape& t) {
    return t.sum(t.mul(t.gather_rows(a, {2, -1, 0, 0}),
                       t.gather_rows(a, {0, 1, 1, 2})));
  };
  CHECK(gradcheck({a}, build) < 1e-6);
}

TEST_CASE("pool_patches averages non-overlapping patches") {
  // 4x4 single-channel image, 2x2 pooling
  std::vector<double> img(16);
  for (int i = 0; i < 16; ++i) img[i] = i;
  Tape tape;
  Tensor t({16, 1}, img);
  Tensor p = tape.pool_patches(t, 4, 4, 2);
  CHECK(p.shape() == std::vector<std::size_t>{4, 1});
  CHECK(p.at(0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
  CHECK(p.at(3) == doctest::Approx((10 + 11 + 14 + 15) / 4.0));

  // constant image -> constant pooled map
  Tensor c = Tensor::full({16, 2}, 0.25);
  Tensor pc = tape.pool_patches(c, 4, 4, 2);
  for (double v : pc.data()) CHECK(v == 0.25);

  std::mt19937_64 rng(13);
  Tensor r = random_tensor(rng, {16, 2});
  auto build = [&](Tape& tp) {
    return tp.sum(tp.power(tp.pool_patches(r, 4, 4, 2), 2.0));
  };
  CHECK(gradcheck({r}, build) < 1e-6);

  CHECK_THROWS(tape.pool_patches(c, 4, 4, 3));  // size not divisible
}

TEST_CASE("reshape preserves data and gradient") {
  std::mt19937_64 rng(17);
  Tensor a = random_tensor(rng, {2, 6});
  {
    Tape tape;
    Tensor r = tape.reshape(a, {3, 4});
    CHECK(r.data() == a.data());
    CHECK_THROWS(tape.reshape(a, {5, 2}));
  }
  auto build = [&](Tape& t) {
    return t.sum(t.matmul(t.reshape(a, {3, 4}), t.reshape(a, {4, 3})));
  };
  CHECK(gradcheck({a}, build) < 1e-6);
}

TEST_CASE("determinism: identical inputs give bit-identical outputs") {
  std::mt19937_64 rng(23);
  Tensor a = random_tensor(rng, {4, 4});
  Tape t1, t2;
  Tensor o1 = t1.softmax_rows(t1.matmul(a, a));
  Tensor o2 = t2.softmax_rows(t2.matmul(a, a));
  CHECK(o1.data() == o2.data());
}
