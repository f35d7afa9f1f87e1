#include <gtest/gtest.h>

#include <cmath>

#include "laeo/nn/checkpoint.hpp"
#include "laeo/nn/gradcheck.hpp"
#include "laeo/nn/ops.hpp"
#include "laeo/nn/optim.hpp"

using namespace laeo;
using namespace laeo::nn;

namespace {

Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(std::move(s));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Direct nested-loop cross-correlation; independent of the im2col path.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                          std::array<int, 3> stride, std::array<int, 3> pad) {
  const long D = long(x.dim(0)), H = long(x.dim(1)), W = long(x.dim(2)), C = long(x.dim(3));
  const long kD = long(w.dim(0)), kH = long(w.dim(1)), kW = long(w.dim(2)), Co = long(w.dim(4));
  const long Do = (D + 2 * pad[0] - kD) / stride[0] + 1;
  const long Ho = (H + 2 * pad[1] - kH) / stride[1] + 1;
  const long Wo = (W + 2 * pad[2] - kW) / stride[2] + 1;
  Tensor<double> y({std::size_t(Do), std::size_t(Ho), std::size_t(Wo), std::size_t(Co)});
  for (long od = 0; od < Do; ++od)
    for (long oh = 0; oh < Ho; ++oh)
      for (long ow = 0; ow < Wo; ++ow)
        for (long co = 0; co < Co; ++co) {
          double s = b[std::size_t(co)];
          for (long a = 0; a < kD; ++a)
            for (long c = 0; c < kH; ++c)
              for (long e = 0; e < kW; ++e) {
                const long id = od * stride[0] + a - pad[0];
                const long ih = oh * stride[1] + c - pad[1];
                const long iw = ow * stride[2] + e - pad[2];
                if (id < 0 || ih < 0 || iw < 0 || id >= D || ih >= H || iw >= W) continue;
                for (long ci = 0; ci < C; ++ci)
                  s += x.at({std::size_t(id), std::size_t(ih), std::size_t(iw), std::size_t(ci)}) *
                       w.at({std::size_t(a), std::size_t(c), std::size_t(e), std::size_t(ci), std::size_t(co)});
              }
          y.at({std::size_t(od), std::size_t(oh), std::size_t(ow), std::size_t(co)}) = s;
        }
  return y;
}

void expect_close(const Tensor<double>& a, const Tensor<double>& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

}  // namespace

// ---- forward kernels ------------------------------------------------------

TEST(Tensor, BuffersAre64ByteAligned) {
  std::vector<char> pad(3);
  for (std::size_t n : {1u, 3u, 17u, 1000u}) {
    Tensor<float> a({n});
    Tensor<double> b({n}, std::vector<double>(n, 1.0));
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(a.data()) % 64, 0u);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(b.data()) % 64, 0u);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(b.reshaped({1, n}).data()) % 64, 0u);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(b.cast<float>().data()) % 64, 0u);
  }
}

TEST(Conv, IdentityKernel) {
  Rng rng(1);
  auto x = random_tensor({2, 4, 5, 3}, rng);
  Tensor<double> w({1, 1, 1, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) w.at({0, 0, 0, c, c}) = 1.0;
  auto y = conv_forward(x, w, Tensor<double>({3}), ConvSpec{{1, 1, 1}, {0, 0, 0}, false});
  expect_close(y, x, 0);
}

TEST(Conv, ZeroKernelGivesBias) {
  Rng rng(2);
  auto x = random_tensor({1, 5, 5, 2}, rng);
  Tensor<double> b({4}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) b[i] = double(i) - 1.5;
  auto y = conv_forward(x, Tensor<double>({1, 3, 3, 2, 4}), b, ConvSpec{});
  for (std::size_t p = 0; p < y.size(); ++p) EXPECT_EQ(y[p], b[p % 4]);
}

TEST(Conv, RampMatchesDirectSummation) {
  Tensor<double> x({1, 5, 5, 1});
  for (std::size_t i = 0; i < 25; ++i) x[i] = double(i);
  Rng rng(3);
  auto w = random_tensor({1, 3, 3, 1, 1}, rng);
  Tensor<double> b({1}, 0.25);
  ConvSpec spec{{1, 1, 1}, {0, 1, 1}, false};
  expect_close(conv_forward(x, w, b, spec), naive_conv(x, w, b, spec.stride, spec.pad), 1e-12);
}

TEST(Conv, StridedPadded3DMatchesDirectSummation) {
  Rng rng(4);
  auto x = random_tensor({4, 9, 7, 3}, rng);
  auto w = random_tensor({3, 3, 3, 3, 5}, rng);
  auto b = random_tensor({5}, rng);
  for (ConvSpec spec : {ConvSpec{{1, 2, 2}, {1, 1, 1}, false}, ConvSpec{{2, 1, 3}, {0, 1, 2}, false}}) {
    expect_close(conv_forward(x, w, b, spec), naive_conv(x, w, b, spec.stride, spec.pad), 1e-12);
  }
}

TEST(Conv, FusedReluClampsNegatives) {
  Rng rng(5);
  auto x = random_tensor({2, 6, 6, 2}, rng);
  auto w = random_tensor({3, 3, 3, 2, 3}, rng);
  auto b = random_tensor({3}, rng);
  auto plain = conv_forward(x, w, b, ConvSpec{});
  auto relu = conv_forward(x, w, b, ConvSpec{{1, 1, 1}, {1, 1, 1}, true});
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_EQ(relu[i], std::max(0.0, plain[i]));
}

TEST(Conv, ShapeMismatchThrows) {
  Tensor<double> x({1, 4, 4, 3});
  EXPECT_THROW(conv_forward(x, Tensor<double>({1, 3, 3, 2, 4}), Tensor<double>({4}), ConvSpec{}), ValidationError);
  EXPECT_THROW(conv_forward(x, Tensor<double>({1, 3, 3, 3, 4}), Tensor<double>({3}), ConvSpec{}), ValidationError);
  EXPECT_THROW(conv_forward(x, Tensor<double>({1, 9, 9, 3, 4}), Tensor<double>({4}), ConvSpec{{1, 1, 1}, {0, 0, 0}, false}),
               ValidationError);
}

TEST(Dense, IdentityZeroAndOracle) {
  Rng rng(6);
  auto x = random_tensor({3}, rng);
  Tensor<double> eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at({i, i}) = 1;
  expect_close(dense_forward(x, eye, Tensor<double>({3})), x, 0);

  Tensor<double> b({2}, 0.5);
  expect_close(dense_forward(x, Tensor<double>({3, 2}), b), b, 0);

  auto x4 = random_tensor({4}, rng);
  auto w = random_tensor({4, 3}, rng);
  auto b3 = random_tensor({3}, rng);
  Tensor<double> expected({3});
  for (std::size_t o = 0; o < 3; ++o) {
    expected[o] = b3[o];
    for (std::size_t i = 0; i < 4; ++i) expected[o] += x4[i] * w.at({i, o});
  }
  expect_close(dense_forward(x4, w, b3), expected, 1e-14);
  EXPECT_THROW(dense_forward(x4, Tensor<double>({3, 3}), b3), ValidationError);
}

TEST(L2Normalize, Cases) {
  Tensor<double> unit({3}, std::vector<double>{0, 1, 0});
  expect_close(l2_normalize(unit), unit, 0);
  Tensor<double> v({2}, std::vector<double>{3, 4});
  expect_close(l2_normalize(v), Tensor<double>({2}, std::vector<double>{0.6, 0.8}), 1e-15);
  Tensor<double> v7({2}, std::vector<double>{21, 28});
  expect_close(l2_normalize(v7), l2_normalize(v), 1e-15);
  EXPECT_THROW(l2_normalize(Tensor<double>({4})), ValidationError);
}

TEST(Softmax, Cases) {
  expect_close(softmax(Tensor<double>({2})), Tensor<double>({2}, 0.5), 0);
  auto big = softmax(Tensor<double>({2}, std::vector<double>{1000, 0}));
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_GE(big[1], 0.0);
  EXPECT_TRUE(big.all_finite());
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  expect_close(softmax(Tensor<double>({3}, std::vector<double>{1, 2, 3})),
               Tensor<double>({3}, std::vector<double>{std::exp(1.0) / z, std::exp(2.0) / z, std::exp(3.0) / z}), 1e-15);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_tensor({1 + rng.index(6)}, rng, -20, 20);
    auto y = softmax(x);
    double s = 0;
    for (double v : y.values()) {
      EXPECT_GT(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
    auto shifted = x;
    const double c = rng.uniform(-50, 50);
    for (auto& v : shifted.values()) v += c;
    expect_close(softmax(shifted), y, 1e-12);
  }
}

// ---- losses ---------------------------------------------------------------

TEST(Losses, LaeoLoss) {
  EXPECT_NEAR(laeo_loss({1, 1.0}), 0.0, 1e-6);
  EXPECT_NEAR(laeo_loss({1, 0.5}), std::log(2.0), 1e-9);
  EXPECT_NEAR(laeo_loss({0, 0.5}), std::log(2.0), 1e-9);
  EXPECT_NEAR(laeo_loss({0, 0.0}), 0.0, 1e-6);
  EXPECT_TRUE(std::isfinite(laeo_loss({1, 0.0})));
  EXPECT_NEAR(laeo_loss({1, 0.0}), -std::log(kProbEps), 1e-9);
}

TEST(Losses, SmoothL1) {
  EXPECT_EQ(smooth_l1(0.0), 0.0);
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1(-2.0), 1.5);
}

TEST(Losses, SignLoss) {
  EXPECT_EQ(sign_loss(5.0, 30.0), 0.0);
  EXPECT_EQ(sign_loss(-5.0, -30.0), 0.0);
  EXPECT_NEAR(sign_loss(-10.0, 30.0), 1.0, 1e-8);
  for (double p : {-3.0, -0.2, 0.0, 0.7, 4.0}) EXPECT_EQ(sign_loss(p, 0.0), 0.0);
  for (double p : {-1.0, -0.3, 0.4, 2.0})
    for (double gt : {-120.0, -5.0, 5.0, 170.0}) {
      EXPECT_GE(sign_loss(p, gt), 0.0);
      EXPECT_LE(sign_loss(p, gt), 1.0);
    }
}

TEST(Losses, HeadPoseLoss) {
  const HeadPose gt{-45, 10, 20};
  EXPECT_EQ(head_pose_loss(gt, gt), 0.0);
  EXPECT_EQ(head_pose_loss(HeadPose{0, 0, 0}, HeadPose{0, 0, 0}), 0.0);
  // Yaw off by 90 degrees (0.5 normalized) with the same sign: smooth-L1 only.
  EXPECT_NEAR(head_pose_loss(HeadPose{135, 10, 20}, HeadPose{45, 10, 20}), 0.6 * 0.125, 1e-15);
  // Crossing zero adds the sign term on the normalized prediction 0.25.
  EXPECT_NEAR(head_pose_loss(HeadPose{45, 10, 20}, gt), 0.6 * 0.125 + 0.1 * std::tanh(0.25), 1e-15);

  const HeadPose pred{30, -20, 5}, target{-60, 15, -40};
  PoseLossWeights w2{1.2, 0.6, 0.2, 0.2};
  EXPECT_NEAR(head_pose_loss(pred, target, w2), 2 * head_pose_loss(pred, target), 1e-15);
  EXPECT_THROW((PoseLossWeights{-1, 0, 0, 0}).validate(), ValidationError);
}

// ---- backward -------------------------------------------------------------

TEST(Backward, CrossEntropyLogitGradient) {
  ParamSet<double> ps;
  ps.add("z", Tensor<double>({2}, 0.3));
  Graph<double> g(Mode::Training);
  auto probs = g.softmax(g.param(ps, "z"));
  auto loss = g.laeo_loss(probs, 1);
  EXPECT_NEAR(g.value(loss)[0], std::log(2.0), 1e-12);
  g.backward(loss);
  EXPECT_NEAR(ps.grad("z")[1], -0.5, 1e-12);
  EXPECT_NEAR(ps.grad("z")[0], 0.5, 1e-12);
}

TEST(Backward, IdentityConvPassesUpstreamGradient) {
  Rng rng(8);
  ParamSet<double> ps;
  ps.add("x", random_tensor({2, 3, 3, 2}, rng));
  Tensor<double> w({1, 1, 1, 2, 2});
  w.at({0, 0, 0, 0, 0}) = w.at({0, 0, 0, 1, 1}) = 1;
  auto up = random_tensor({2, 3, 3, 2}, rng);
  Graph<double> g(Mode::Training);
  auto y = g.conv3d(g.param(ps, "x"), g.input(w), g.input(Tensor<double>({2})), ConvSpec{{1, 1, 1}, {0, 0, 0}, false});
  // Project onto a fixed upstream gradient.
  auto loss = g.sum(g.record(g.value(y), {y}, [&](Graph<double>& gg, std::size_t self) {
    auto& dx = gg.grad_buffer(y.id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gg.out_grad(self)[i] * up[i];
  }));
  g.backward(loss);
  expect_close(ps.grad("x"), up, 0);
}

TEST(Backward, BeforeForwardThrows) {
  Graph<double> g;
  EXPECT_THROW(g.backward({}), ValidationError);
  Graph<double> nograd(Mode::Inference, 0, false);
  auto v = nograd.sum(nograd.input(Tensor<double>({2}, 1.0)));
  EXPECT_THROW(nograd.backward(v), ValidationError);
}

TEST(Backward, WeightSharingAccumulates) {
  ParamSet<double> ps;
  ps.add("w", Tensor<double>({1, 1}, 2.0));
  ps.add("b", Tensor<double>({1}, 0.0));
  Graph<double> g(Mode::Training);
  auto x1 = g.input(Tensor<double>({1}, 3.0));
  auto x2 = g.input(Tensor<double>({1}, 5.0));
  auto y = g.add(g.dense(x1, g.param(ps, "w"), g.param(ps, "b")), g.dense(x2, g.param(ps, "w"), g.param(ps, "b")));
  g.backward(g.sum(y));
  EXPECT_DOUBLE_EQ(ps.grad("w")[0], 8.0);
  EXPECT_DOUBLE_EQ(ps.grad("b")[0], 2.0);
}

// ---- gradient checks ------------------------------------------------------

namespace {

GradCheckReport check(ParamSet<double>& ps, const LossBuilder& fn) { return grad_check(ps, fn, {}); }

// Weighted sum with fixed random coefficients turns any output into a scalar.
Graph<double>::Var project(Graph<double>& g, Graph<double>::Var v, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> c(g.value(v).shape());
  for (auto& x : c.values()) x = rng.uniform(-1, 1);
  Tensor<double> w({g.value(v).size(), 1}, c.storage());
  return g.dense(v, g.input(w), g.input(Tensor<double>({1})));
}

}  // namespace

TEST(GradCheck, DenseIsExactToOneInAMillion) {
  Rng rng(9);
  ParamSet<double> ps;
  ps.add("x", random_tensor({5}, rng));
  ps.add("w", random_tensor({5, 3}, rng));
  ps.add("b", random_tensor({3}, rng));
  auto r = check(ps, [](Graph<double>& g, ParamSet<double>& p) {
    return project(g, g.dense(g.param(p, "x"), g.param(p, "w"), g.param(p, "b")), 1);
  });
  EXPECT_LE(r.max_rel_error, 1e-6);
}

TEST(GradCheck, ConvVariants) {
  Rng rng(10);
  for (ConvSpec spec : {ConvSpec{{1, 1, 1}, {1, 1, 1}, true}, ConvSpec{{1, 2, 2}, {1, 1, 1}, true},
                        ConvSpec{{2, 1, 1}, {0, 1, 1}, false}}) {
    ParamSet<double> ps;
    ps.add("x", random_tensor({3, 6, 5, 2}, rng));
    ps.add("w", random_tensor({3, 3, 3, 2, 3}, rng));
    ps.add("b", random_tensor({3}, rng, -0.1, 0.1));
    auto r = check(ps, [spec](Graph<double>& g, ParamSet<double>& p) {
      return project(g, g.conv3d(g.param(p, "x"), g.param(p, "w"), g.param(p, "b"), spec), 2);
    });
    EXPECT_TRUE(r.passed()) << r.max_rel_error;
  }
}

TEST(GradCheck, NormalizationSoftmaxDropoutConcat) {
  Rng rng(11);
  ParamSet<double> ps;
  ps.add("a", random_tensor({6}, rng));
  ps.add("b", random_tensor({2, 2}, rng));
  auto r = check(ps, [](Graph<double>& g, ParamSet<double>& p) {
    auto a = g.l2_normalize(g.param(p, "a"));
    auto b = g.dropout(g.flatten(g.param(p, "b")), 0.5);
    auto c = g.relu(g.concat({a, b}));
    auto s = g.softmax(g.scale(c, 3.0));
    return project(g, s, 3);
  });
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
  EXPECT_EQ(r.entries.size(), 2u);
}

TEST(GradCheck, LaeoAndPoseLosses) {
  Rng rng(12);
  ParamSet<double> ps;
  ps.add("z", random_tensor({2}, rng));
  ps.add("pose", Tensor<double>({3}, std::vector<double>{0.3, -0.2, 0.7}));
  for (int c : {0, 1}) {
    auto r = check(ps, [c](Graph<double>& g, ParamSet<double>& p) {
      auto l1 = g.laeo_loss(g.softmax(g.param(p, "z")), c);
      auto l2 = g.head_pose_loss(g.param(p, "pose"), HeadPose{-50, 40, 300.0 - 180}, PoseLossWeights{}, 1.0);
      return g.add(l1, l2);
    });
    EXPECT_TRUE(r.passed()) << r.max_rel_error;
  }
  // Beyond the smooth-L1 knee.
  ps.value("pose")[0] = -0.9;
  auto r = check(ps, [](Graph<double>& g, ParamSet<double>& p) {
    return g.head_pose_loss(g.param(p, "pose"), HeadPose{170, -80, 179}, PoseLossWeights{}, 2.0);
  });
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
}

TEST(GradCheck, CorruptedBackwardIsReported) {
  Rng rng(13);
  ParamSet<double> ps;
  ps.add("x", random_tensor({4}, rng));
  auto r = check(ps, [](Graph<double>& g, ParamSet<double>& p) {
    auto x = g.param(p, "x");
    Tensor<double> sq = g.value(x);
    for (auto& v : sq.values()) v *= v;
    // Backward deliberately omits the factor 2 of d(x^2)/dx.
    auto y = g.record(sq, {x}, [x](Graph<double>& gg, std::size_t self) {
      auto& dx = gg.grad_buffer(x.id);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gg.out_grad(self)[i] * gg.value(x)[i];
    });
    return g.sum(y);
  });
  EXPECT_FALSE(r.passed());
  EXPECT_NEAR(r.max_rel_error, 0.5, 1e-6);
}

// ---- dropout --------------------------------------------------------------

TEST(Dropout, IdentityAtInferenceAndUnbiasedInTraining) {
  Tensor<double> x({20000}, 1.0);
  Graph<double> inf(Mode::Inference);
  auto vi = inf.input(x);
  EXPECT_EQ(inf.dropout(vi, 0.5).id, vi.id);

  Graph<double> tr(Mode::Training, 42);
  const auto& y = tr.value(tr.dropout(tr.input(x), 0.5));
  double mean = 0;
  for (double v : y.values()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    mean += v;
  }
  EXPECT_NEAR(mean / double(y.size()), 1.0, 0.03);
}

// ---- optimizer ------------------------------------------------------------

TEST(Sgd, ZeroGradientLeavesParams) {
  ParamSet<float> ps;
  ps.add("w", Tensor<float>({3}, 1.5f));
  Sgd<float> opt(0.1, 0.9);
  opt.step(ps);
  EXPECT_EQ(ps.value("w"), Tensor<float>({3}, 1.5f));
}

TEST(Sgd, QuadraticSteps) {
  ParamSet<double> ps;
  ps.add("w", Tensor<double>({1}, 1.0));
  Sgd<double> plain(0.1, 0.0);
  ps.grad("w")[0] = 2 * ps.value("w")[0];
  plain.step(ps);
  EXPECT_NEAR(ps.value("w")[0], 0.8, 1e-15);

  // With momentum 0.9: v1 = 2, w1 = 0.8; v2 = 0.9*2 + 1.6 = 3.4, w2 = 0.46.
  ParamSet<double> pm;
  pm.add("w", Tensor<double>({1}, 1.0));
  Sgd<double> mom(0.1, 0.9);
  for (int i = 0; i < 2; ++i) {
    pm.grad("w")[0] = 2 * pm.value("w")[0];
    mom.step(pm);
  }
  EXPECT_NEAR(pm.value("w")[0], 0.46, 1e-15);
}

// ---- checkpoint -----------------------------------------------------------

TEST(Checkpoint, ByteExactRoundTrip) {
  Rng rng(14);
  ParamSet<float> ps;
  ps.add("head.conv1.w", random_tensor({3, 3, 3, 3, 4}, rng).cast<float>());
  ps.add("head.conv1.b", random_tensor({4}, rng).cast<float>());
  ps.add("fusion.w", random_tensor({7, 2}, rng).cast<float>());
  const auto bytes = encode_checkpoint(ps);
  EXPECT_EQ(bytes.substr(0, 5), "LAEO1");
  auto back = decode_checkpoint(bytes);
  EXPECT_TRUE(back == ps);
  EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(Checkpoint, RejectsBadInput) {
  ParamSet<float> ps;
  ps.add("w", Tensor<float>({2}, 1.0f));
  auto bytes = encode_checkpoint(ps);
  auto bad = bytes;
  bad[4] = '2';
  EXPECT_THROW(decode_checkpoint(bad), IoError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), IoError);
}
