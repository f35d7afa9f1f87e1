#pragma once

#include <map>
#include <string>

#include "laeo/nn/params.hpp"

namespace laeo::nn {

// Momentum SGD: v <- momentum * v + grad; w <- w - lr * v.
template <class T>
class Sgd {
 public:
  Sgd(double lr = 1e-3, double momentum = 0.9) : lr_(lr), momentum_(momentum) {
    require(lr > 0, "learning rate must be > 0");
    require(momentum >= 0 && momentum < 1, "momentum must be in [0,1)");
  }

  void step(ParamSet<T>& params) {
    for (auto& e : params.entries()) {
      auto [it, inserted] = velocity_.try_emplace(e.name, e.value.shape());
      auto& v = it->second;
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        v[i] = T(momentum_) * v[i] + e.grad[i];
        e.value[i] -= T(lr_) * v[i];
      }
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, momentum_;
  std::map<std::string, Tensor<T>> velocity_;
};

}  // namespace laeo::nn
