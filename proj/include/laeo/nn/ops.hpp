#pragma once

// Single-op forward helpers over the graph kernels, for callers that do not
// need gradients.

#include "laeo/nn/graph.hpp"

namespace laeo::nn {

template <class T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& spec) {
  Graph<T> g(Mode::Inference, 0, false);
  return g.value(g.conv3d(g.input(x), g.input(w), g.input(b), spec));
}

template <class T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  Graph<T> g(Mode::Inference, 0, false);
  return g.value(g.dense(g.input(x), g.input(w), g.input(b)));
}

template <class T>
Tensor<T> l2_normalize(const Tensor<T>& x) {
  Graph<T> g(Mode::Inference, 0, false);
  return g.value(g.l2_normalize(g.input(x)));
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
  Graph<T> g(Mode::Inference, 0, false);
  return g.value(g.softmax(g.input(x.reshaped({x.size()}))));
}

}  // namespace laeo::nn
