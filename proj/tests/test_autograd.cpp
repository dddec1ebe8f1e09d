#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "inferem/autograd.hpp"
#include "inferem/checkpoint.hpp"
#include "inferem/gradcheck.hpp"

using namespace inferem;
using ag::Tape;
using ag::Var;

TEST_SUITE("autograd") {

TEST_CASE("tensor construction checks sizes") {
  CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  const Tensor t(2, 3, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.shape() == std::array<std::size_t, 2>{2, 3});
  CHECK_THROWS(Tensor(2, 2).item());
  CHECK(Tensor::scalar(4.0).item() == 4.0);
}

TEST_CASE("softmax of equal logits is uniform") {
  Tape tape(false);
  const Var s = ag::softmax(tape.constant(Tensor::row({0.0, 0.0})), 1);
  CHECK(s.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.value()[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax rows are non-negative and sum to one") {
  std::mt19937_64 rng(3);
  Tape tape(false);
  const Var s = ag::softmax(tape.constant(testing::random_tensor(6, 9, rng, -30, 30)), 1);
  for (std::size_t r = 0; r < 6; ++r) {
    double sum = 0.0;
    for (double v : s.value().row_span(r)) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("layer norm of a constant row is zero before gain and bias") {
  Tape tape(false);
  const Var x = tape.constant(Tensor(1, 4, 3.0));
  const Var y = ag::layer_norm(x, tape.constant(Tensor(1, 4, 1.0)), tape.constant(Tensor(1, 4, 0.0)));
  for (double v : y.value().values()) CHECK(v == 0.0);
}

TEST_CASE("matmul shape rule and shape errors name both shapes") {
  Tape tape(false);
  const Var c = ag::matmul(tape.constant(Tensor(2, 3, 1.0)), tape.constant(Tensor(3, 4, 1.0)));
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 4);
  try {
    ag::matmul(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 3)));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(ag::add(tape.constant(Tensor(2, 3)), tape.constant(Tensor(3, 2))), ShapeError);
}

TEST_CASE("matmul matches a scalar loop") {
  std::mt19937_64 rng(5);
  const Tensor a = testing::random_tensor(3, 5, rng), b = testing::random_tensor(5, 2, rng);
  Tape tape(false);
  const Var c = ag::matmul(tape.constant(a), tape.constant(b));
  CHECK(testing::max_diff(testing::mat_mul(testing::to_mat(a), testing::to_mat(b)), c.value()) < 1e-14);
}

TEST_CASE("backward of sum gives ones; of half sum of squares gives the point") {
  ag::ParameterStore store;
  auto& p = store.create("p", Tensor(2, 3, std::vector<double>{1, -2, 3, 0.5, 0, -1}));
  {
    Tape tape;
    tape.backward(ag::sum(tape.param(p)));
    for (double g : p.grad.values()) CHECK(g == 1.0);
  }
  store.zero_grad();
  {
    Tape tape;
    const Var v = tape.param(p);
    tape.backward(ag::scale(ag::sum(ag::mul(v, v)), 0.5));
    for (std::size_t i = 0; i < p.value.size(); ++i) CHECK(p.grad[i] == p.value[i]);
  }
}

TEST_CASE("backward rejects a non-scalar root and is repeatable") {
  ag::ParameterStore store;
  auto& p = store.create("p", Tensor(1, 3, 2.0));
  Tape tape;
  const Var v = tape.param(p);
  CHECK_THROWS_AS(tape.backward(v), ShapeError);
  const Var loss = ag::sum(ag::square(v));
  tape.backward(loss);
  const Tensor first = loss.tape->grad(v.id);
  tape.backward(loss);
  CHECK(max_abs_diff(first, tape.grad(v.id)) == 0.0);
}

TEST_CASE("a parameter used twice accumulates both paths") {
  ag::ParameterStore store;
  auto& p = store.create("p", Tensor(1, 1, 3.0));
  Tape tape;
  const Var a = tape.param(p);
  const Var b = tape.param(p);
  CHECK(a.id == b.id);
  tape.backward(ag::add(ag::scale(a, 2.0), ag::mul(b, b)));  // 2p + p^2 -> 2 + 2p
  CHECK(p.grad[0] == doctest::Approx(8.0));
}

TEST_CASE("concat then slice along the same axis is the identity") {
  std::mt19937_64 rng(9);
  for (int axis : {0, 1}) {
    const Tensor a = testing::random_tensor(3, 4, rng);
    const Tensor b = axis == 0 ? testing::random_tensor(2, 4, rng) : testing::random_tensor(3, 2, rng);
    Tape tape(false);
    const Var c = ag::concat({tape.constant(a), tape.constant(b)}, axis);
    const std::size_t na = axis == 0 ? a.rows() : a.cols();
    const std::size_t nb = axis == 0 ? b.rows() : b.cols();
    CHECK(max_abs_diff(ag::slice(c, axis, 0, na).value(), a) == 0.0);
    CHECK(max_abs_diff(ag::slice(c, axis, na, nb).value(), b) == 0.0);
  }
}

TEST_CASE("masked_fill replaces masked entries and blocks their gradient") {
  Tape tape;
  const Var x = tape.input(Tensor::row({1.0, 2.0, 3.0}));
  Tensor mask = Tensor::row({0.0, 1.0, 0.0});
  const Var y = ag::masked_fill(x, mask, -5.0);
  CHECK(y.value()[1] == -5.0);
  CHECK(y.value()[2] == 3.0);
  tape.backward(ag::sum(y));
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("pick, embedding lookup and transpose forward values") {
  Tape tape(false);
  const Tensor table(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<int> ids{2, 0, 2};
  const Var e = ag::embedding_lookup(tape.constant(table), ids);
  CHECK(e.value()(0, 1) == 6.0);
  CHECK(e.value()(1, 0) == 1.0);
  const std::vector<int> cols{1, 0, 1};
  const Var p = ag::pick(e, cols);
  CHECK(p.value()[0] == 6.0);
  CHECK(p.value()[1] == 1.0);
  const Var t = ag::transpose(tape.constant(table));
  CHECK(t.rows() == 2);
  CHECK(t.value()(1, 2) == 6.0);
  const std::vector<int> bad{3};
  CHECK_THROWS(ag::embedding_lookup(tape.constant(table), bad));
}

TEST_CASE("a no-grad tape records nothing to differentiate") {
  ag::ParameterStore store;
  auto& p = store.create("p", Tensor(1, 2, 1.0));
  Tape tape(false);
  const Var v = tape.param(p);
  CHECK_FALSE(tape.needs_grad(ag::square(v).id));
}

TEST_CASE("gradient check: sum is exact, softmax-NLL is accurate, sabotage is caught") {
  std::mt19937_64 rng(11);
  const Tensor x = testing::random_tensor(2, 5, rng);
  const auto sum_check = gradient_check([](Tape&, std::span<const Var> in) { return ag::sum(in[0]); }, {x});
  CHECK(sum_check.max_rel_error < 1e-8);

  const auto nll = gradient_check(
      [](Tape&, std::span<const Var> in) {
        const std::vector<int> gold{3, 1};
        return ag::scale(ag::sum(ag::log(ag::pick(ag::softmax(in[0], 1), gold))), -1.0);
      },
      {x});
  CHECK(nll.max_rel_error < 1e-4);

  // Deliberately wrong rule: d(x^2)/dx reported as 3x.
  const auto wrong = gradient_check(
      [](Tape& tape, std::span<const Var> in) {
        const Var a = in[0];
        Tensor out = a.value();
        for (auto& v : out.values()) v = v * v;
        const Var sq = tape.push(std::move(out), {a}, [&tape, a](const Tensor&, const Tensor& g) {
          Tensor& slot = tape.grad_slot(a.id);
          for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += 3.0 * tape.value(a.id)[i] * g[i];
        });
        return ag::sum(sq);
      },
      {x});
  CHECK(wrong.max_rel_error > 1e-2);
}

TEST_CASE("random three-layer composition matches central differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = testing::random_tensor(4, 3, rng);
    const Tensor w1 = testing::random_tensor(3, 5, rng), w2 = testing::random_tensor(5, 5, rng),
                 w3 = testing::random_tensor(5, 2, rng);
    const auto r = gradient_check(
        [](Tape&, std::span<const Var> in) {
          Var h = ag::relu(ag::matmul(in[0], in[1]));
          h = ag::softmax(ag::matmul(h, in[2]), 1);
          return ag::sum(ag::square(ag::matmul(h, in[3])));
        },
        {x, w1, w2, w3});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradient check reports NaN") {
  const Tensor x = Tensor::row({-1.0, 2.0});
  CHECK_THROWS_AS(gradient_check([](Tape&, std::span<const Var> in) { return ag::sum(ag::log(in[0])); }, {x}),
                  NumericalError);
}

TEST_CASE("parameter names are unique") {
  ag::ParameterStore store;
  store.create("w", Tensor(1, 1));
  CHECK_THROWS(store.create("w", Tensor(1, 1)));
  CHECK(store.find("w") != nullptr);
  CHECK(store.find("v") == nullptr);
}

TEST_CASE("checkpoint round trip is bit exact and validates its header") {
  testing::TempDir dir("ckpt");
  std::mt19937_64 rng(2);
  std::vector<NamedTensor> recs{{"a", testing::random_tensor(3, 4, rng)},
                                {"b.c", Tensor::scalar(std::nextafter(1.0, 2.0))}};
  write_checkpoint(dir.path() / "x.bin", recs);
  const auto back = read_checkpoint(dir.path() / "x.bin");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].name == recs[i].name);
    REQUIRE(back[i].value.same_shape(recs[i].value));
    for (std::size_t k = 0; k < recs[i].value.size(); ++k) CHECK(back[i].value[k] == recs[i].value[k]);
  }
  {
    std::ifstream in(dir.path() / "x.bin", std::ios::binary);
    char magic[5] = {};
    in.read(magic, 5);
    CHECK(std::string(magic, 4) == "IFEM");
    CHECK(static_cast<unsigned char>(magic[4]) == kCheckpointVersion);
  }
  {
    std::ofstream out(dir.path() / "bad.bin", std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(read_checkpoint(dir.path() / "bad.bin"), CheckpointError);

  ag::ParameterStore store;
  store.create("a", Tensor(3, 4));
  assign_parameters(store, back);
  CHECK(max_abs_diff(store.at("a").value, recs[0].value) == 0.0);
  ag::ParameterStore other;
  other.create("missing", Tensor(1, 1));
  CHECK_THROWS_AS(assign_parameters(other, back), CheckpointError);
  ag::ParameterStore wrong_shape;
  wrong_shape.create("a", Tensor(4, 3));
  CHECK_THROWS_AS(assign_parameters(wrong_shape, back), CheckpointError);
}

}  // TEST_SUITE
