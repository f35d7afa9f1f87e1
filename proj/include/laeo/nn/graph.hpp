#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "laeo/nn/losses.hpp"
#include "laeo/nn/params.hpp"
#include "laeo/nn/tensor.hpp"
#include "laeo/rng.hpp"

namespace laeo::nn {

enum class Mode { Inference, Training };

// 3D convolution geometry over (depth, height, width). 2D convolutions are
// expressed with depth-1 inputs and depth-1 kernels.
struct ConvSpec {
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> pad{1, 1, 1};
  bool relu = false;
};

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, int stride, int pad) {
  const long n = static_cast<long>(in) + 2L * pad - static_cast<long>(k);
  require(n >= 0 && stride >= 1, "convolution kernel larger than padded input");
  return static_cast<std::size_t>(n / stride + 1);
}

// Reverse-mode tape. Every op appends a node holding its value and a
// closure that pushes the node's gradient to its parents. Parameter leaves
// alias a ParamSet and accumulate into its gradient buffers on backward().
template <class T>
class Graph {
 public:
  struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
  };
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(Mode mode = Mode::Inference, std::uint64_t seed = 0, bool grad_enabled = true)
      : mode_(mode), rng_(seed), grad_enabled_(grad_enabled) {}

  Mode mode() const { return mode_; }
  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var input(Tensor<T> v) {
    Node n;
    n.value = std::move(v);
    return push(std::move(n));
  }

  Var param(ParamSet<T>& ps, const std::string& name) {
    auto& e = ps.entry(name);
    Node n;
    n.external = &e.value;
    if (grad_enabled_) {
      n.external_grad = &e.grad;
      n.requires_grad = true;
      n.backward = [](Graph& g, std::size_t self) {
        auto& node = g.nodes_[self];
        auto& dst = *node.external_grad;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += node.grad[i];
      };
    }
    return push(std::move(n));
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).val(); }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient of the last backward() target w.r.t. this node (empty if none).
  const Tensor<T>& grad(Var v) const { return nodes_.at(v.id).grad; }

  // Appends a custom op. `fn` receives the graph and the new node's index
  // and must add into parents' buffers obtained with grad_buffer().
  Var record(Tensor<T> value, std::span<const Var> parents, BackwardFn fn) {
    require(value.all_finite(), "non-finite value produced by graph op");
    Node n;
    n.value = std::move(value);
    if (grad_enabled_) {
      for (Var p : parents) n.requires_grad = n.requires_grad || nodes_.at(p.id).requires_grad;
      if (n.requires_grad) n.backward = std::move(fn);
    }
    return push(std::move(n));
  }
  Var record(Tensor<T> value, std::initializer_list<Var> parents, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
  }

  // Gradient accumulator of node `id`, allocated on first use.
  Tensor<T>& grad_buffer(std::size_t id) {
    auto& n = nodes_.at(id);
    if (n.grad.size() != n.val().size()) n.grad = Tensor<T>(n.val().shape());
    return n.grad;
  }
  const Tensor<T>& out_grad(std::size_t id) const { return nodes_[id].grad; }

  void backward(Var loss, T seed = T(1)) {
    require(!nodes_.empty() && loss.id < nodes_.size(), "backward called before any forward op");
    require(grad_enabled_, "backward on a graph built without gradient recording");
    require(!backward_done_, "backward already executed on this graph");
    require(nodes_[loss.id].val().size() == 1, "backward target must be a scalar");
    backward_done_ = true;
    grad_buffer(loss.id)[0] = seed;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, i);
    }
  }

  // ---- layers -----------------------------------------------------------

  // x: [D,H,W,Cin]; w: [kD,kH,kW,Cin,Cout]; b: [Cout] -> [D',H',W',Cout].
  Var conv3d(Var xv, Var wv, Var bv, const ConvSpec& spec) {
    const auto& x = value(xv);
    const auto& w = value(wv);
    const auto& b = value(bv);
    require(x.rank() == 4 && w.rank() == 5 && b.rank() == 1,
            "conv3d expects x[D,H,W,C], w[kD,kH,kW,Cin,Cout], b[Cout]");
    require(w.dim(3) == x.dim(3), "conv3d channel mismatch: input " + shape_str(x.shape()) +
                                      " vs kernel " + shape_str(w.shape()));
    require(b.dim(0) == w.dim(4), "conv3d bias length must equal output channels");
    const std::size_t D = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const std::size_t kD = w.dim(0), kH = w.dim(1), kW = w.dim(2), Co = w.dim(4);
    const std::size_t Do = conv_out_dim(D, kD, spec.stride[0], spec.pad[0]);
    const std::size_t Ho = conv_out_dim(H, kH, spec.stride[1], spec.pad[1]);
    const std::size_t Wo = conv_out_dim(W, kW, spec.stride[2], spec.pad[2]);
    const std::size_t P = Do * Ho * Wo, K = kD * kH * kW * C;

    auto col = std::make_shared<Mat>(P, K);
    // Visits the im2col row segments. A kernel row lying fully inside the
    // input is one contiguous span of kW * C values.
    auto for_each_span = [=](auto&& fn) {
      for (std::size_t od = 0; od < Do; ++od)
        for (std::size_t oh = 0; oh < Ho; ++oh)
          for (std::size_t ow = 0; ow < Wo; ++ow) {
            const std::size_t row = (od * Ho + oh) * Wo + ow;
            const long iw0 = long(ow) * spec.stride[2] - spec.pad[2];
            std::size_t k = 0;
            for (std::size_t a = 0; a < kD; ++a)
              for (std::size_t c = 0; c < kH; ++c) {
                const long id = long(od) * spec.stride[0] + long(a) - spec.pad[0];
                const long ih = long(oh) * spec.stride[1] + long(c) - spec.pad[1];
                const bool row_in = id >= 0 && id < long(D) && ih >= 0 && ih < long(H);
                const std::size_t base = row_in ? (std::size_t(id) * H + std::size_t(ih)) * W : 0;
                if (row_in && iw0 >= 0 && iw0 + long(kW) <= long(W)) {
                  fn(row, k, true, (base + std::size_t(iw0)) * C, kW * C);
                  k += kW * C;
                  continue;
                }
                for (std::size_t e = 0; e < kW; ++e, k += C) {
                  const long iw = iw0 + long(e);
                  const bool inside = row_in && iw >= 0 && iw < long(W);
                  fn(row, k, inside, inside ? (base + std::size_t(iw)) * C : 0, C);
                }
              }
          }
    };
    for_each_span([&](std::size_t row, std::size_t k, bool inside, std::size_t src, std::size_t n) {
      T* dst = col->data() + row * K + k;
      if (!inside) {
        std::fill(dst, dst + n, T(0));
      } else {
        const T* s = x.data() + src;
        std::copy(s, s + n, dst);
      }
    });

    Tensor<T> y({Do, Ho, Wo, Co});
    MapMat ym(y.data(), P, Co);
    ym.noalias() = (*col) * CMapMat(w.data(), K, Co);
    ym.rowwise() += CMapRow(b.data(), 1, Co);
    if (spec.relu) ym = ym.cwiseMax(T(0));

    const bool relu = spec.relu;
    auto fn = [=](Graph& g, std::size_t self) {
      const auto& yv = g.nodes_[self].val();
      Mat gy = CMapMat(g.nodes_[self].grad.data(), P, Co);
      if (relu)
        gy = (CMapMat(yv.data(), P, Co).array() > T(0)).select(gy, T(0));
      if (g.nodes_[wv.id].requires_grad) {
        MapMat(g.grad_buffer(wv.id).data(), K, Co).noalias() += col->transpose() * gy;
      }
      if (g.nodes_[bv.id].requires_grad) {
        MapRow(g.grad_buffer(bv.id).data(), 1, Co) += gy.colwise().sum();
      }
      if (g.nodes_[xv.id].requires_grad) {
        Mat dcol = gy * CMapMat(g.value(wv).data(), K, Co).transpose();
        T* dx = g.grad_buffer(xv.id).data();
        for_each_span([&](std::size_t row, std::size_t k, bool inside, std::size_t src, std::size_t n) {
          if (!inside) return;
          const T* s = dcol.data() + row * K + k;
          for (std::size_t c = 0; c < n; ++c) dx[src + c] += s[c];
        });
      }
    };
    return record(std::move(y), {xv, wv, bv}, std::move(fn));
  }

  // x: any shape with In elements; w: [In, Out]; b: [Out] -> [Out].
  Var dense(Var xv, Var wv, Var bv) {
    const auto& x = value(xv);
    const auto& w = value(wv);
    const auto& b = value(bv);
    require(w.rank() == 2 && b.rank() == 1, "dense expects w[In,Out] and b[Out]");
    require(w.dim(0) == x.size() && w.dim(1) == b.dim(0),
            "dense shape mismatch: x has " + std::to_string(x.size()) + " elements, w is " +
                shape_str(w.shape()) + ", b is " + shape_str(b.shape()));
    const std::size_t In = w.dim(0), Out = w.dim(1);
    Tensor<T> y({Out});
    MapCol(y.data(), Out).noalias() =
        CMapMat(w.data(), In, Out).transpose() * CMapCol(x.data(), In) + CMapCol(b.data(), Out);
    auto fn = [=](Graph& g, std::size_t self) {
      CMapCol gy(g.nodes_[self].grad.data(), Out);
      if (g.nodes_[wv.id].requires_grad)
        MapMat(g.grad_buffer(wv.id).data(), In, Out).noalias() +=
            CMapCol(g.value(xv).data(), In) * gy.transpose();
      if (g.nodes_[bv.id].requires_grad) MapCol(g.grad_buffer(bv.id).data(), Out) += gy;
      if (g.nodes_[xv.id].requires_grad)
        MapCol(g.grad_buffer(xv.id).data(), In).noalias() += CMapMat(g.value(wv).data(), In, Out) * gy;
    };
    return record(std::move(y), {xv, wv, bv}, std::move(fn));
  }

  Var relu(Var xv) {
    Tensor<T> y = value(xv);
    for (auto& v : y.values()) v = v > T(0) ? v : T(0);
    auto fn = [=](Graph& g, std::size_t self) {
      const auto& yv = g.nodes_[self].val();
      const auto& gy = g.nodes_[self].grad;
      auto& dx = g.grad_buffer(xv.id);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += yv[i] > T(0) ? gy[i] : T(0);
    };
    return record(std::move(y), {xv}, std::move(fn));
  }

  // Inverted dropout; identity in inference mode.
  Var dropout(Var xv, double rate) {
    require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0,1)");
    if (mode_ == Mode::Inference || rate == 0.0) return xv;
    const auto& x = value(xv);
    auto mask = std::make_shared<std::vector<T>>(x.size());
    const T keep_scale = T(1.0 / (1.0 - rate));
    for (auto& m : *mask) m = rng_.uniform() < rate ? T(0) : keep_scale;
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= (*mask)[i];
    auto fn = [=](Graph& g, std::size_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& dx = g.grad_buffer(xv.id);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gy[i] * (*mask)[i];
    };
    return record(std::move(y), {xv}, std::move(fn));
  }

  Var reshape(Var xv, Shape shape) {
    Tensor<T> y = value(xv).reshaped(std::move(shape));
    auto fn = [=](Graph& g, std::size_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& dx = g.grad_buffer(xv.id);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gy[i];
    };
    return record(std::move(y), {xv}, std::move(fn));
  }

  Var flatten(Var xv) { return reshape(xv, {value(xv).size()}); }

  // y = x / sqrt(|x|^2 + eps^2). With eps == 0 a zero input is an error.
  Var l2_normalize(Var xv, double eps = 0.0) {
    const auto& x = value(xv);
    T sq = 0;
    for (T v : x.values()) sq += v * v;
    require(eps > 0.0 || sq > T(0), "l2_normalize of a zero vector");
    const T norm = std::sqrt(sq + T(eps * eps));
    Tensor<T> y = x;
    for (auto& v : y.values()) v /= norm;
    auto fn = [=](Graph& g, std::size_t self) {
      const auto& yv = g.nodes_[self].val();
      const auto& gy = g.nodes_[self].grad;
      T dot = 0;
      for (std::size_t i = 0; i < yv.size(); ++i) dot += yv[i] * gy[i];
      auto& dx = g.grad_buffer(xv.id);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += (gy[i] - yv[i] * dot) / norm;
    };
    return record(std::move(y), {xv}, std::move(fn));
  }

  // Flattens and concatenates.
  Var concat(std::span<const Var> parts) {
    std::size_t n = 0;
    for (Var p : parts) n += value(p).size();
    Tensor<T> y({n});
    std::size_t off = 0;
    for (Var p : parts) {
      const auto& v = value(p);
      std::copy(v.data(), v.data() + v.size(), y.data() + off);
      off += v.size();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    auto fn = [ps](Graph& g, std::size_t self) {
      const auto& gy = g.nodes_[self].grad;
      std::size_t o = 0;
      for (Var p : ps) {
        const std::size_t len = g.value(p).size();
        if (g.nodes_[p.id].requires_grad) {
          auto& dx = g.grad_buffer(p.id);
          for (std::size_t i = 0; i < len; ++i) dx[i] += gy[o + i];
        }
        o += len;
      }
    };
    return record(std::move(y), parts, std::move(fn));
  }
  Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
  }

  Var softmax(Var xv) {
    const auto& x = value(xv);
    require(x.size() >= 1, "softmax of an empty tensor");
    Tensor<T> y({x.size()});
    T mx = x[0];
    for (T v : x.values()) mx = std::max(mx, v);
    T z = 0;
    for (std::size_t i = 0; i < x.size(); ++i) z += (y[i] = std::exp(x[i] - mx));
    for (auto& v : y.values()) v /= z;
    auto fn = [=](Graph& g, std::size_t self) {
      const auto& yv = g.nodes_[self].val();
      const auto& gy = g.nodes_[self].grad;
      T dot = 0;
      for (std::size_t i = 0; i < yv.size(); ++i) dot += yv[i] * gy[i];
      auto& dx = g.grad_buffer(xv.id);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += yv[i] * (gy[i] - dot);
    };
    return record(std::move(y), {xv}, std::move(fn));
  }

  // Cross-entropy on a 2-way probability vector (index 1 = LAEO).
  Var laeo_loss(Var probs, int c) {
    const auto& p = value(probs);
    require(p.size() == 2, "laeo_loss expects a 2-class probability vector");
    require(c == 0 || c == 1, "laeo_loss class must be 0 or 1");
    const LossSample s{c, double(p[1])};
    Tensor<T> y({1}, T(nn::laeo_loss(s)));
    auto fn = [=](Graph& g, std::size_t self) {
      const T gy = g.nodes_[self].grad[0];
      g.grad_buffer(probs.id)[1] += gy * T(laeo_loss_grad(s));
    };
    return record(std::move(y), {probs}, std::move(fn));
  }

  // pred: [3] normalized (yaw, pitch, roll); gt in degrees.
  Var head_pose_loss(Var pred, const HeadPose& gt, const PoseLossWeights& w, double k = 1.0) {
    const auto& p = value(pred);
    require(p.size() == 3, "head_pose_loss expects [yaw, pitch, roll]");
    const double dy = double(p[0]) - gt.yaw / kYawScale;
    const double dp = double(p[1]) - gt.pitch / kPitchScale;
    const double dr = double(p[2]) - gt.roll / kRollScale;
    const double loss = w.yaw * smooth_l1(dy) + w.pitch * smooth_l1(dp) + w.roll * smooth_l1(dr) +
                        w.sign * sign_loss(double(p[0]), gt.yaw, k);
    const std::array<T, 3> d{T(w.yaw * smooth_l1_grad(dy) + w.sign * sign_loss_grad(double(p[0]), gt.yaw, k)),
                             T(w.pitch * smooth_l1_grad(dp)), T(w.roll * smooth_l1_grad(dr))};
    auto fn = [=](Graph& g, std::size_t self) {
      const T gy = g.nodes_[self].grad[0];
      auto& dx = g.grad_buffer(pred.id);
      for (std::size_t i = 0; i < 3; ++i) dx[i] += gy * d[i];
    };
    return record(Tensor<T>({1}, T(loss)), {pred}, std::move(fn));
  }

  Var add(Var av, Var bv) {
    require(value(av).shape() == value(bv).shape(), "add shape mismatch");
    Tensor<T> y = value(av);
    const auto& b = value(bv);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
    auto fn = [=](Graph& g, std::size_t self) {
      const auto& gy = g.nodes_[self].grad;
      for (Var p : {av, bv}) {
        if (!g.nodes_[p.id].requires_grad) continue;
        auto& dx = g.grad_buffer(p.id);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gy[i];
      }
    };
    return record(std::move(y), {av, bv}, std::move(fn));
  }

  Var scale(Var xv, T s) {
    Tensor<T> y = value(xv);
    for (auto& v : y.values()) v *= s;
    auto fn = [=](Graph& g, std::size_t self) {
      const auto& gy = g.nodes_[self].grad;
      auto& dx = g.grad_buffer(xv.id);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += s * gy[i];
    };
    return record(std::move(y), {xv}, std::move(fn));
  }

  Var sum(Var xv) {
    T s = 0;
    for (T v : value(xv).values()) s += v;
    auto fn = [=](Graph& g, std::size_t self) {
      const T gy = g.nodes_[self].grad[0];
      auto& dx = g.grad_buffer(xv.id);
      for (auto& v : dx.values()) v += gy;
    };
    return record(Tensor<T>({1}, s), {xv}, std::move(fn));
  }

 private:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapMat = Eigen::Map<Mat>;
  using CMapMat = Eigen::Map<const Mat>;
  using MapRow = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
  using CMapRow = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;
  using MapCol = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  using CMapCol = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T>* external_grad = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    const Tensor<T>& val() const { return external ? *external : value; }
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Mode mode_;
  Rng rng_;
  bool grad_enabled_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
};

}  // namespace laeo::nn
