#include "mfpu/optim.hpp"

#include <string>

#include "mfpu/errors.hpp"
#include "mfpu/kernels.hpp"

namespace mfpu {

template <class T>
SgdOptimizer<T>::SgdOptimizer(std::vector<Tensor<T>> params, SgdHyperparameters hp)
    : params_(std::move(params)), hp_(hp) {
  require(hp_.learning_rate >= 0 && hp_.momentum >= 0 && hp_.weight_decay >= 0 && hp_.lr_decay >= 0,
          "sgd: hyperparameters must be non-negative");
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.numel(), T(0));
}

template <class T>
double SgdOptimizer<T>::current_learning_rate() const {
  return hp_.learning_rate / (1.0 + hp_.lr_decay * static_cast<double>(epoch_));
}

template <class T>
void SgdOptimizer<T>::step() {
  for (std::size_t i = 0; i < params_.size(); ++i)
    require(params_[i].has_grad(), "sgd step: parameter " + std::to_string(i) + " has no gradient");
  const auto& kt = kernels::active<T>();
  const T lr = static_cast<T>(current_learning_rate());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    kt.sgd_momentum(p.numel(), lr, static_cast<T>(hp_.momentum), static_cast<T>(hp_.weight_decay),
                    p.data().data(), p.grad().data(), velocity_[i].data());
    p.clear_grad();
  }
}

template class SgdOptimizer<float>;
template class SgdOptimizer<double>;

}  // namespace mfpu
