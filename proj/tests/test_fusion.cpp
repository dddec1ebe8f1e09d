#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "oracle.hpp"
#include "inferem/fusion.hpp"
#include "inferem/gradcheck.hpp"

using namespace inferem;
using ag::Tape;
using ag::Var;

namespace {

struct Net {
  ag::ParameterStore store;
  MaifNet net;
  Net(std::size_t dim, std::size_t heads, std::uint64_t seed, bool randomized = true) {
    std::mt19937_64 rng(seed);
    net = MaifNet(store, "maifnet", dim, heads, rng);
    if (randomized) testing::randomize(store, rng);
  }
};

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("a single key receives all attention and gives identical rows") {
  Net n(8, 2, 1);
  std::mt19937_64 rng(2);
  Tape tape(false);
  const Var sq = tape.constant(testing::random_tensor(4, 8, rng));
  const Var skv = tape.constant(testing::random_tensor(1, 8, rng));
  std::vector<Var> weights;
  n.net(sq, skv, &weights);
  REQUIRE(weights.size() == 2);
  for (const Var& w : weights)
    for (double v : w.value().values()) CHECK(v == 1.0);
  const auto att = n.net.attention(sq, skv);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 8; ++c) CHECK(att.output.value()(r, c) == att.output.value()(0, c));
}

TEST_CASE("output shape equals query shape") {
  Net n(8, 2, 3);
  std::mt19937_64 rng(4);
  for (auto [a, b] : {std::pair<std::size_t, std::size_t>{1, 1}, {5, 2}, {2, 7}}) {
    Tape tape(false);
    const Var out = n.net(tape.constant(testing::random_tensor(a, 8, rng)),
                          tape.constant(testing::random_tensor(b, 8, rng)));
    CHECK(out.rows() == a);
    CHECK(out.cols() == 8);
  }
}

TEST_CASE("empty queries or keys are rejected") {
  Net n(4, 1, 5);
  Tape tape(false);
  const Var x = tape.constant(Tensor(2, 4, 0.5));
  const Var none = tape.constant(Tensor(0, 4));
  CHECK_THROWS_AS(n.net(x, none), ShapeError);
  CHECK_THROWS_AS(n.net(none, x), ShapeError);
}

TEST_CASE("a one-head block matches a scalar-loop forward pass") {
  for (std::uint64_t seed : {6u, 7u, 8u, 9u}) {
    Net n(4, 1, seed);
    std::mt19937_64 rng(seed + 100);
    const Tensor sq = testing::random_tensor(2, 4, rng), skv = testing::random_tensor(2, 4, rng);
    Tape tape(false);
    const Var out = n.net(tape.constant(sq), tape.constant(skv));
    const auto expected = oracle::maifnet(testing::to_mat(sq), testing::to_mat(skv), n.net);
    CHECK(testing::max_diff(expected, out.value()) < 1e-10);
  }
}

TEST_CASE("a two-head block matches the scalar-loop forward pass") {
  Net n(8, 2, 11);
  std::mt19937_64 rng(12);
  const Tensor sq = testing::random_tensor(3, 8, rng), skv = testing::random_tensor(5, 8, rng);
  Tape tape(false);
  const Var out = n.net(tape.constant(sq), tape.constant(skv));
  CHECK(testing::max_diff(oracle::maifnet(testing::to_mat(sq), testing::to_mat(skv), n.net),
                          out.value()) < 1e-10);
}

TEST_CASE("permuting key/value rows leaves the output unchanged") {
  Net n(8, 2, 13);
  std::mt19937_64 rng(14);
  const Tensor sq = testing::random_tensor(3, 8, rng), skv = testing::random_tensor(6, 8, rng);
  Tape tape(false);
  const Tensor base = n.net(tape.constant(sq), tape.constant(skv)).value();
  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor shuffled(6, 8);
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 8; ++c) shuffled(r, c) = skv(perm[r], c);
    Tape t(false);
    CHECK(max_abs_diff(n.net(t.constant(sq), t.constant(shuffled)).value(), base) < 1e-8);
  }
}

TEST_CASE("zeroed output projections reduce the block to two layer norms") {
  Net n(8, 2, 15);
  for (ag::Parameter* p : {n.net.attention.output.weight, n.net.attention.output.bias,
                           n.net.ff.outer.weight, n.net.ff.outer.bias}) {
    p->value.fill(0.0);
  }
  std::mt19937_64 rng(16);
  const Tensor sq = testing::random_tensor(3, 8, rng), skv = testing::random_tensor(4, 8, rng);
  Tape tape(false);
  const Var out = n.net(tape.constant(sq), tape.constant(skv));
  const auto expected =
      oracle::layer_norm(oracle::layer_norm(testing::to_mat(sq), n.net.attn_norm), n.net.ff_norm);
  CHECK(testing::max_diff(expected, out.value()) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gradients reach both the queries and the keys") {
  Net n(4, 2, 17);
  std::mt19937_64 rng(18);
  const std::vector<Tensor> point{testing::random_tensor(2, 4, rng), testing::random_tensor(3, 4, rng)};
  const Tensor probe = testing::random_tensor(2, 4, rng);
  const auto r = gradient_check(
      [&](Tape& tape, std::span<const Var> in) {
        return ag::sum(ag::mul(n.net(in[0], in[1]), tape.constant(probe)));
      },
      point);
  CHECK(r.coordinates == 8 + 12);
  CHECK(r.max_rel_error < 1e-4);

  Tape tape;
  const Var sq = tape.input(point[0]), skv = tape.input(point[1]);
  tape.backward(ag::sum(ag::mul(n.net(sq, skv), tape.constant(probe))));
  double q_norm = 0.0, kv_norm = 0.0;
  for (double g : sq.grad().values()) q_norm += std::abs(g);
  for (double g : skv.grad().values()) kv_norm += std::abs(g);
  CHECK(q_norm > 0.0);
  CHECK(kv_norm > 0.0);
}

TEST_CASE("concat_intentions puts real rows first") {
  std::mt19937_64 rng(19);
  Tape tape(false);
  const Var real = tape.constant(testing::random_tensor(3, 4, rng));
  const Var virt = tape.constant(testing::random_tensor(2, 4, rng));

  const Var alone = concat_intentions(real, std::nullopt);
  CHECK(alone.id == real.id);

  const Var both = concat_intentions(real, virt);
  REQUIRE(both.rows() == 5);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t r = 0; r < 3; ++r) CHECK(both.value()(r, c) == real.value()(r, c));
    for (std::size_t r = 0; r < 2; ++r) CHECK(both.value()(3 + r, c) == virt.value()(r, c));
  }
  CHECK_THROWS_AS(concat_intentions(real, tape.constant(Tensor(2, 5))), ShapeError);
}

}  // TEST_SUITE
