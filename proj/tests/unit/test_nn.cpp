#include <cmath>
#include <limits>

#include "doctest.h"
#include "grad_suite.hpp"
#include "swipeforge/error.hpp"
#include "swipeforge/nn/adam.hpp"
#include "swipeforge/nn/checkpoint.hpp"
#include "swipeforge/nn/grad_check.hpp"
#include "swipeforge/nn/layers.hpp"
#include "swipeforge/nn/ops.hpp"

using namespace swipeforge;
using nn::Tensor;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("gradient suite") {
  for (const auto& r : testing::gradient_suite()) {
    INFO(r.name);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("grad_check on sum of squares and on a constant") {
  Rng rng(1);
  const double err = nn::grad_check([](auto x) { return nn::sum(nn::square(x[0])); }, {random_matrix(4, 3, rng)});
  CHECK(err < 1e-6);
  const double flat = nn::grad_check([](auto x) { return nn::affine(nn::sum(nn::affine(x[0], 0.0)), 1.0, 3.0); },
                                     {random_matrix(2, 2, rng)});
  CHECK(flat == 0.0);
  // Analytic gradient of sum(x^2) is 2x.
  const Tensor x = Tensor::parameter(random_matrix(3, 3, rng));
  nn::sum(nn::square(x)).backward();
  CHECK((x.grad() - 2.0 * x.value()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("softmax basics") {
  const Tensor z = Tensor::constant(Matrix::Zero(1, 4));
  const Matrix s = nn::softmax_rows(z).value();
  for (int i = 0; i < 4; ++i) CHECK(s(0, i) == doctest::Approx(0.25).epsilon(1e-15));

  Matrix big(3, 3);
  big << 1000, -1000, 999, 1e6, 1e6, -1e6, -700, -710, -705;
  const Matrix p = nn::softmax_rows(Tensor::constant(big)).value();
  for (int r = 0; r < 3; ++r) {
    CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-9);
    CHECK(p.row(r).minCoeff() >= 0.0);
  }
  const Matrix lp = nn::log_softmax_rows(Tensor::constant(big)).value();
  CHECK(lp.allFinite());
}

TEST_CASE("matmul with identity and shape errors") {
  Rng rng(2);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix out = nn::matmul(Tensor::constant(Matrix::Identity(3, 3)), Tensor::constant(a)).value();
  CHECK(out == a);
  CHECK(code_of([&] { nn::matmul(Tensor::constant(a), Tensor::constant(a)); }) == ErrorCode::kShapeMismatch);
  CHECK(code_of([&] { nn::add(Tensor::constant(a), Tensor::constant(Matrix::Zero(2, 4))); }) ==
        ErrorCode::kShapeMismatch);
  CHECK(code_of([&] { nn::mul(Tensor::constant(a), Tensor::constant(Matrix::Zero(3, 3))); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("non-finite values are surfaced") {
  Matrix bad(1, 2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { nn::tanh(Tensor::constant(bad)); }) == ErrorCode::kNonFinite);
  Matrix huge(1, 1);
  huge << 1000.0;
  CHECK(code_of([&] { nn::exp(Tensor::constant(huge)); }) == ErrorCode::kNonFinite);
  Matrix negative(1, 1);
  negative << -1.0;
  CHECK(code_of([&] { nn::log(Tensor::constant(negative)); }) == ErrorCode::kNonFinite);
  CHECK(nn::log(Tensor::constant(Matrix::Zero(1, 1))).item() == nn::kLogZero);
}

TEST_CASE("dropout") {
  Rng rng(3);
  const Matrix a = random_matrix(20, 20, rng);
  CHECK(nn::dropout(Tensor::constant(a), 0.5, false, rng).value() == a);
  const Matrix d = nn::dropout(Tensor::constant(a), 0.5, true, rng).value();
  int kept = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (d.data()[i] != 0.0) {
      ++kept;
      CHECK(d.data()[i] == doctest::Approx(2.0 * a.data()[i]));
    }
  }
  CHECK(kept > 120);
  CHECK(kept < 280);
}

TEST_CASE("min_max_normalize") {
  Matrix row(1, 4);
  row << 2.0, -1.0, 5.0, 0.5;
  const Matrix n = nn::min_max_normalize(Tensor::constant(row)).value();
  CHECK(n.minCoeff() == 0.0);
  CHECK(n.maxCoeff() == 1.0);
  CHECK(n(0, 3) == doctest::Approx(0.25));
  CHECK(nn::min_max_normalize(Tensor::constant(Matrix::Constant(1, 3, 0.7))).value() == Matrix::Zero(1, 3));
}

TEST_CASE("recurrent cells") {
  Rng rng(4);
  for (auto kind : {nn::CellKind::kLstm, nn::CellKind::kGru}) {
    nn::RecurrentCell cell(kind, 3, 5, rng);
    cell.w_input.mutable_value().setZero();
    cell.w_hidden.mutable_value().setZero();
    cell.bias.mutable_value().setZero();
    const Tensor out = cell.run(Tensor::constant(random_matrix(4, 3, rng)), false);
    CHECK(out.rows() == 4);
    CHECK(out.cols() == 5);
    CHECK(out.value().cwiseAbs().maxCoeff() == 0.0);
    CHECK(code_of([&] { cell.run(Tensor::constant(random_matrix(4, 2, rng)), false); }) ==
          ErrorCode::kShapeMismatch);
  }
  nn::Bidirectional bi(nn::CellKind::kLstm, 3, 6, rng);
  CHECK(bi.output_dim() == 12);
  CHECK(bi.run(Tensor::constant(random_matrix(5, 3, rng))).cols() == 12);
  nn::BidirectionalStack stack(nn::CellKind::kLstm, 3, 4, 2, rng);
  CHECK(stack.layers.size() == 2);
  CHECK(stack.layers[1].forward_cell.input_dim() == 8);
}

TEST_CASE("reverse run aligns rows with inputs") {
  Rng rng(5);
  nn::RecurrentCell cell(nn::CellKind::kGru, 2, 3, rng);
  const Matrix xs = random_matrix(4, 2, rng);
  const Matrix rev = cell.run(Tensor::constant(xs), true).value();
  // The last input row is the first step of the reversed pass.
  const Tensor first = cell.step(Tensor::constant(xs.row(3)), cell.zero_state()).h;
  CHECK((rev.row(3) - first.value()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("encoder block attention") {
  Rng rng(6);
  nn::EncoderBlockConfig cfg;
  cfg.heads = 2;
  cfg.model_dim = 8;
  cfg.ff_dim = 16;
  nn::EncoderBlock block(cfg, rng);
  std::vector<Matrix> att;
  block.forward(Tensor::constant(random_matrix(1, 8, rng)), false, nullptr, &att);
  REQUIRE(att.size() == 2);
  for (const auto& a : att) CHECK(a(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  const Matrix seq = random_matrix(4, 8, rng);
  const Matrix out = block.forward(Tensor::constant(seq), false, nullptr, &att).value();
  for (const auto& a : att) {
    for (int r = 0; r < 4; ++r) CHECK(std::abs(a.row(r).sum() - 1.0) < 1e-12);
  }
  const std::vector<int> perm{2, 0, 3, 1};
  Matrix permuted(4, 8);
  for (int i = 0; i < 4; ++i) permuted.row(i) = seq.row(perm[i]);
  std::vector<Matrix> att_p;
  const Matrix out_p = block.forward(Tensor::constant(permuted), false, nullptr, &att_p).value();
  for (int i = 0; i < 4; ++i) {
    CHECK((out_p.row(i) - out.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(att_p[0](i, j) - att[0](perm[i], perm[j])) < 1e-12);
  }
  cfg.heads = 3;
  CHECK(code_of([&] { nn::EncoderBlock bad(cfg, rng); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { block.forward(Tensor::constant(random_matrix(3, 5, rng)), false, nullptr); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("adam") {
  nn::AdamConfig cfg;
  cfg.lr = 0.01;
  Matrix p = Matrix::Constant(2, 2, 1.5), m1 = Matrix::Zero(2, 2), m2 = Matrix::Zero(2, 2);
  const Matrix before = p;
  for (long s = 1; s <= 5; ++s) adam_update(p, Matrix::Zero(2, 2), m1, m2, s, cfg);
  CHECK(p == before);

  Matrix g(1, 3);
  g << 0.5, -2.0, 7.0;
  Matrix q = Matrix::Zero(1, 3), a = Matrix::Zero(1, 3), b = Matrix::Zero(1, 3);
  adam_update(q, g, a, b, 1, cfg);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(std::abs(q(0, i)) - cfg.lr) < 1e-6);
  CHECK(q(0, 0) < 0.0);
  CHECK(q(0, 1) > 0.0);

  Tensor w = Tensor::parameter(Matrix::Zero(1, 1));
  nn::AdamConfig opt_cfg;
  opt_cfg.lr = 0.1;
  nn::Adam opt({w}, opt_cfg);
  for (int i = 0; i < 200; ++i) {
    nn::square(nn::affine(w, 1.0, -3.0)).backward();
    opt.step();
  }
  CHECK(std::abs(w.item() - 3.0) < 0.1);
  CHECK(opt.step_count() == 200);
}

TEST_CASE("identical seeds give identical parameters after training steps") {
  const auto run = [] {
    Rng rng(9);
    nn::Dense layer(3, 2, rng);
    nn::Adam opt({layer.weight, layer.bias}, nn::AdamConfig{});
    Rng data(10);
    for (int i = 0; i < 20; ++i) {
      const Tensor x = Tensor::constant(random_matrix(4, 3, data));
      nn::sum(nn::square(layer.forward(x))).backward();
      opt.step();
    }
    return layer.weight.value();
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint text round-trip is lossless") {
  Rng rng(12);
  nn::Checkpoint ck;
  ck.module_kind = "demo";
  ck.hyperparameters["alpha"] = 0.1 + 0.2;
  ck.hyperparameters["name"] = std::string("x\"y");
  ck.parameters["w"] = random_matrix(3, 7, rng) * 1e-7;
  ck.parameters["w"](0, 0) = std::nextafter(1.0, 2.0);
  const nn::Checkpoint back = nn::checkpoint_from_string(nn::checkpoint_to_string(ck));
  CHECK(back.module_kind == "demo");
  CHECK(back.number("alpha") == 0.1 + 0.2);
  CHECK(back.text("name") == "x\"y");
  CHECK(back.parameters.at("w") == ck.parameters.at("w"));
  CHECK(code_of([&] { back.parameter("w", 2, 7); }) == ErrorCode::kSchema);
  CHECK(code_of([] { nn::checkpoint_from_string("[]"); }) == ErrorCode::kSchema);
  CHECK(code_of([] { nn::load_checkpoint("/nonexistent/model.json"); }) == ErrorCode::kMissingCheckpoint);
}

TEST_CASE("sinusoidal positions") {
  const Matrix p = nn::sinusoidal_positions(5, 6);
  CHECK(p.rows() == 5);
  CHECK(p.cols() == 6);
  CHECK(p(0, 0) == 0.0);
  CHECK(p(0, 1) == 1.0);
  CHECK(p(3, 0) == doctest::Approx(std::sin(3.0)));
}
