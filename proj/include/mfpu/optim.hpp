#pragma once

#include <cstddef>
#include <vector>

#include "mfpu/tensor.hpp"

namespace mfpu {

struct SgdHyperparameters {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double lr_decay = 1e-4;  // per epoch: lr_e = lr_0 / (1 + lr_decay * e)
};

// SGD with momentum and L2 weight decay. Holds one velocity buffer per
// parameter, in the order the parameters were registered.
template <class T>
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Tensor<T>> params, SgdHyperparameters hp);

  // v <- mu * v + (grad + lambda * w); w <- w - lr * v; grads cleared.
  // Every parameter must carry a gradient.
  void step();

  void set_epoch(std::size_t epoch) { epoch_ = epoch; }
  std::size_t epoch() const { return epoch_; }
  double current_learning_rate() const;

  const SgdHyperparameters& hyperparameters() const { return hp_; }
  const std::vector<T>& velocity(std::size_t i) const { return velocity_.at(i); }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> velocity_;
  SgdHyperparameters hp_;
  std::size_t epoch_ = 0;
};

}  // namespace mfpu
