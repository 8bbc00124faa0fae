#include <doctest.h>

#include "mfpu/errors.hpp"
#include "mfpu/optim.hpp"

using namespace mfpu;

namespace {

void set_grad(Tensor64& p, double g) {
  // Populate the grad slot through a taped scale: d(g * sum(p))/dp = g.
  backward(scale(sum(p), g));
}

}  // namespace

TEST_CASE("one plain SGD step") {
  auto w = Tensor64::parameter({1}, {1.0});
  SgdOptimizer<double> opt({w}, {0.1, 0.0, 0.0, 0.0});
  set_grad(w, 0.5);
  opt.step();
  CHECK(w[0] == doctest::Approx(0.95).epsilon(1e-15));
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("zero gradient without decay is a fixed point") {
  auto w = Tensor64::parameter({3}, {1.0, -2.0, 0.5});
  SgdOptimizer<double> opt({w}, {0.3, 0.9, 0.0, 0.0});
  for (int i = 0; i < 3; ++i) {
    set_grad(w, 0.0);
    opt.step();
  }
  CHECK(w[0] == 1.0);
  CHECK(w[1] == -2.0);
  CHECK(w[2] == 0.5);
}

TEST_CASE("momentum: second step moves by 1.9 g") {
  const double g = 0.25;
  auto w = Tensor64::parameter({1}, {0.0});
  SgdOptimizer<double> opt({w}, {1.0, 0.9, 0.0, 0.0});
  set_grad(w, g);
  opt.step();
  const double after_first = w[0];
  CHECK(after_first == doctest::Approx(-g));
  set_grad(w, g);
  opt.step();
  CHECK(after_first - w[0] == doctest::Approx(1.9 * g).epsilon(1e-15));
}

TEST_CASE("weight decay adds lambda * w to the step") {
  auto w = Tensor64::parameter({1}, {2.0});
  SgdOptimizer<double> opt({w}, {0.1, 0.0, 0.5, 0.0});
  set_grad(w, 0.0);
  opt.step();
  CHECK(w[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
}

TEST_CASE("learning rate decays per epoch") {
  auto w = Tensor64::parameter({1}, {0.0});
  SgdOptimizer<double> opt({w}, {0.001, 0.9, 0.0005, 1e-4});
  CHECK(opt.current_learning_rate() == 0.001);
  opt.set_epoch(10);
  CHECK(opt.current_learning_rate() == doctest::Approx(0.001 / 1.001).epsilon(1e-15));
}

TEST_CASE("step without gradients is a contract violation") {
  auto w = Tensor64::parameter({1}, {0.0});
  SgdOptimizer<double> opt({w}, {});
  CHECK_THROWS_AS(opt.step(), ContractViolation);
}
