#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ddqn/errors.hpp"
#include "ddqn/neural.hpp"

using namespace ddqn;
using namespace ddqn::nn;
using Mat = Matrix<double>;

namespace {

Mat random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * uniform_unit(rng) - 1.0);
  return m;
}

// Scalar-loop reference forward pass; shares nothing with DuelingNet::forward
// beyond the parameter layout.
std::vector<double> oracle_q(const DuelingNet<double>& net, const std::vector<double>& x) {
  const auto& spec = net.spec();
  const auto& layers = net.layers();
  const auto& p = net.params();
  std::size_t li = 0;
  std::vector<double> h;
  if (spec.arch == ArchTag::cnn) {
    int ch = spec.input_channels, n = spec.window_n;
    std::vector<double> sig(x.begin(), x.begin() + ch * n);
    for (; layers[li].type == "conv1d"; ++li) {
      const auto& l = layers[li];
      const int len = (n - l.kernel) / l.stride + 1;
      std::vector<double> out(static_cast<std::size_t>(l.out * len));
      for (int o = 0; o < l.out; ++o)
        for (int t = 0; t < len; ++t) {
          double acc = p[2 * li + 1](o, 0);
          for (int c = 0; c < ch; ++c)
            for (int k = 0; k < l.kernel; ++k)
              acc += p[2 * li](o, c * l.kernel + k) * sig[static_cast<std::size_t>(c * n + t * l.stride + k)];
          out[static_cast<std::size_t>(o * len + t)] = acc > 0 ? acc : 0;
        }
      sig = out;
      ch = l.out;
      n = len;
    }
    h = sig;
    h.push_back(x[x.size() - 2]);
    h.push_back(x[x.size() - 1]);
  } else {
    h = x;
  }
  auto dense = [&](std::size_t i, const std::vector<double>& in, bool act) {
    const auto& l = layers[i];
    std::vector<double> out(static_cast<std::size_t>(l.out));
    for (int o = 0; o < l.out; ++o) {
      double acc = p[2 * i + 1](o, 0);
      for (int k = 0; k < l.in; ++k) acc += p[2 * i](o, k) * in[static_cast<std::size_t>(k)];
      out[static_cast<std::size_t>(o)] = act && acc < 0 ? 0 : acc;
    }
    return out;
  };
  for (; layers[li].role == "trunk"; ++li) h = dense(li, h, true);
  const double v = dense(li, h, false)[0];
  const auto a = dense(li + 1, h, false);
  const double mean = (a[0] + a[1] + a[2]) / 3.0;
  return {v + a[0] - mean, v + a[1] - mean, v + a[2] - mean};
}

NetSpec small_ffdqn() { return NetSpec::ffdqn(3, 6, {16, 12}); }
NetSpec small_cnn() { return NetSpec::cnn(4, 9, {{5, 3, 1}, {4, 2, 2}}, {10}); }

}  // namespace

TEST_CASE("dueling_aggregate examples") {
  Mat v(1, 1), a(1, 3), q(1, 3);
  v << 1.0;
  a << 2, 0, 1;
  q << 2, 0, 1;
  CHECK(dueling_aggregate(v, a) == q);

  v << 3.0;
  a << 5, 5, 5;
  q << 3, 3, 3;
  CHECK(dueling_aggregate(v, a) == q);

  Mat bad(2, 1);
  CHECK_THROWS_AS(dueling_aggregate(bad, a), ShapeMismatch);
}

TEST_CASE("property: dueling identifiability and shift invariance") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto b = 1 + static_cast<Eigen::Index>(uniform_index(rng, 8));
    const Mat v = random_matrix(rng, b, 1, 10.0);
    const Mat a = random_matrix(rng, b, 3, 10.0);
    const double c = 100.0 * (2.0 * uniform_unit(rng) - 1.0);
    const Mat q = dueling_aggregate(v, a);
    const Mat shifted = dueling_aggregate(v, (a.array() + c).matrix());
    CHECK((q - shifted).cwiseAbs().maxCoeff() <= 1e-12);
    for (Eigen::Index r = 0; r < b; ++r) {
      CHECK(std::abs((q.row(r).array() - v(r, 0)).mean()) <= 1e-9);
      Eigen::Index qa, aa;
      q.row(r).maxCoeff(&qa);
      a.row(r).maxCoeff(&aa);
      CHECK(qa == aa);
    }
  }
}

TEST_CASE("conv1d_forward examples and shape law") {
  Mat input(1, 4);
  input << 1, 2, 3, 4;
  Mat k(1, 2);
  k << 1, -1;
  Vector<double> bias = Vector<double>::Zero(1);
  Mat expected(1, 3);
  expected << -1, -1, -1;
  CHECK(conv1d_forward(input, k, bias, 2, 1) == expected);

  Mat ident(1, 1);
  ident << 1;
  CHECK(conv1d_forward(input, ident, bias, 1, 1) == input);

  CHECK_THROWS_AS(conv1d_forward(input, Mat::Ones(1, 5), bias, 5, 1), KernelTooLarge);
  CHECK_THROWS_AS(conv1d_forward(input, Mat::Ones(1, 3), bias, 2, 1), ShapeMismatch);

  Rng rng(4);
  for (int n = 1; n <= 12; ++n)
    for (int kernel = 1; kernel <= n; ++kernel)
      for (int stride = 1; stride <= 4; ++stride) {
        const int ch = 1 + static_cast<int>(uniform_index(rng, 3));
        const int out = 1 + static_cast<int>(uniform_index(rng, 3));
        const Mat x = random_matrix(rng, ch, n);
        const Mat w = random_matrix(rng, out, ch * kernel);
        const Vector<double> b = random_matrix(rng, out, 1);
        const Mat y = conv1d_forward(x, w, b, kernel, stride);
        REQUIRE(y.cols() == (n - kernel) / stride + 1);
        REQUIRE(y.rows() == out);
        for (int o = 0; o < out; ++o)
          for (int t = 0; t < y.cols(); ++t) {
            double acc = b[o];
            for (int c = 0; c < ch; ++c)
              for (int j = 0; j < kernel; ++j) acc += w(o, c * kernel + j) * x(c, t * stride + j);
            CHECK(std::abs(y(o, t) - acc) <= 1e-12);
          }
      }
}

TEST_CASE("zero network outputs zero Q") {
  for (const auto& spec : {small_ffdqn(), small_cnn(), NetSpec::ffdqn(3, 10), NetSpec::cnn(3, 10)}) {
    const DuelingNet<double> net(spec);
    Rng rng(1);
    CHECK(net.forward(random_matrix(rng, 5, spec.input_size())).isZero());
  }
}

TEST_CASE("forward matches the scalar-loop oracle and is per-sample independent") {
  for (const auto& spec : {small_ffdqn(), small_cnn(), NetSpec::ffdqn(3, 10), NetSpec::cnn(4, 10)}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      auto net = DuelingNet<double>::glorot(spec, rng);
      // Non-zero biases exercise the bias paths too.
      for (std::size_t i = 1; i < net.params().size(); i += 2)
        net.mutable_params()[i] = random_matrix(rng, net.params()[i].rows(), 1, 0.1);
      const Mat x = random_matrix(rng, 4, spec.input_size());
      const Mat q = net.forward(x);
      for (Eigen::Index b = 0; b < x.rows(); ++b) {
        std::vector<double> xb(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index j = 0; j < x.cols(); ++j) xb[static_cast<std::size_t>(j)] = x(b, j);
        const auto expect = oracle_q(net, xb);
        for (int a = 0; a < 3; ++a) CHECK(std::abs(q(b, a) - expect[static_cast<std::size_t>(a)]) <= 1e-10);
      }
      Mat dup(2, spec.input_size());
      dup << x.row(0), x.row(0);
      const Mat qd = net.forward(dup);
      // Equal up to summation order: Eigen may vectorize the two rows differently.
      CHECK((qd.row(0) - qd.row(1)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(net.forward(x) == q);  // bitwise determinism
    }
  }
}

TEST_CASE("forward rejects wrong input width") {
  const DuelingNet<double> net(small_ffdqn());
  CHECK_THROWS_AS(net.forward(Mat::Zero(2, 5)), ShapeMismatch);
}

TEST_CASE("backward: zero upstream and the linear-head analytic gradient") {
  Rng rng(8);
  auto net = DuelingNet<double>::glorot(small_cnn(), rng);
  const Mat x = random_matrix(rng, 3, net.spec().input_size());
  auto [q, cache] = forward(net, x);
  for (const auto& g : backward(net, cache, Mat::Zero(3, 3))) CHECK(g.isZero());

  // Heads only: q = dueling(W_v x + b_v, W_a x + b_a). With L = sum(q),
  // dV = 3 per row and dA = 0, so dW_v = 3 * sum_b x_b and dW_a = 0.
  auto linear = DuelingNet<double>::glorot(NetSpec::ffdqn(3, 4, {}), rng);
  const Mat xl = random_matrix(rng, 5, linear.spec().input_size());
  auto [ql, cl] = forward(linear, xl);
  const auto g = backward(linear, cl, Mat::Ones(5, 3));
  CHECK((g[0] - 3.0 * xl.colwise().sum()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(g[1](0, 0) == doctest::Approx(15.0));
  CHECK(g[2].cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(g[3].cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("backward rejects stale or foreign caches") {
  Rng rng(2);
  auto net = DuelingNet<double>::glorot(small_ffdqn(), rng);
  const Mat x = random_matrix(rng, 2, net.spec().input_size());
  auto [q, cache] = forward(net, x);
  const auto other = net;
  CHECK_THROWS_AS(other.backward(cache, Mat::Ones(2, 3)), StaleCache);
  sgd_update(net, net.zero_grads(), 0.1);
  CHECK_THROWS_AS(net.backward(cache, Mat::Ones(2, 3)), StaleCache);
  auto [q2, fresh] = forward(net, x);
  CHECK_NOTHROW(net.backward(fresh, Mat::Ones(2, 3)));
  CHECK_THROWS_AS(net.backward(fresh, Mat::Ones(3, 3)), ShapeMismatch);
}

TEST_CASE("gradcheck: linear net is exact, random nets pass, fault injection is caught") {
  Rng rng(21);
  {
    auto linear = DuelingNet<double>::glorot(NetSpec::ffdqn(3, 4, {}), rng);
    const Mat x = random_matrix(rng, 3, linear.spec().input_size());
    CHECK(gradcheck(linear, x, linear_loss(random_matrix(rng, 3, 3))) < 1e-9);
  }
  for (const auto& spec : {small_ffdqn(), small_cnn()}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng r(seed);
      const auto net = DuelingNet<double>::glorot(spec, r);
      const Mat x = random_matrix(r, 4, spec.input_size());
      const auto loss = seed % 2 ? linear_loss(random_matrix(r, 4, 3)) : squared_loss(random_matrix(r, 4, 3));
      CHECK(gradcheck(net, x, loss) < 1e-4);

      // Double the largest first-layer weight gradient.
      const double broken = gradcheck(net, x, loss, 1e-5, [](LayerGrads<double>& g) {
        Eigen::Index i;
        g[0].reshaped().cwiseAbs().maxCoeff(&i);
        g[0].data()[i] *= 2.0;
      });
      CHECK(broken > 0.4);
    }
  }
}

TEST_CASE("sgd_update arithmetic") {
  DuelingNet<double> net(NetSpec::ffdqn(1, 1, {}));
  auto params = net.params();
  for (auto& p : params) p.setOnes();
  net.set_params(params);
  auto g = net.zero_grads();
  for (auto& m : g) m.setConstant(2.0);

  sgd_update(net, g, 0.0);
  CHECK(net.params()[0](0, 0) == 1.0);
  sgd_update(net, g, 0.1);
  CHECK(net.params()[0](0, 0) == doctest::Approx(0.8));
  sgd_update(net, g, 0.1);
  CHECK(net.params()[0](0, 0) == doctest::Approx(1.0 - 2 * 0.1 * 2.0));

  g.pop_back();
  CHECK_THROWS_AS(sgd_update(net, g, 0.1), ShapeMismatch);
}

TEST_CASE("adam first step moves each parameter by about lr against its gradient") {
  Rng rng(6);
  auto net = DuelingNet<double>::glorot(small_ffdqn(), rng);
  const auto before = net.params();
  auto g = net.zero_grads();
  for (auto& m : g) m = random_matrix(rng, m.rows(), m.cols());
  Optimizer<double> adam({OptimizerKind::adam, 1e-3, 0.9, 0.999, 1e-8});
  adam.step(net, g);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (Eigen::Index e = 0; e < g[i].size(); ++e) {
      const double moved = net.params()[i].data()[e] - before[i].data()[e];
      const double gi = g[i].data()[e];
      CHECK(moved == doctest::Approx(-1e-3 * gi / (std::abs(gi) + 1e-8)).epsilon(1e-6));
    }
  CHECK(adam.steps() == 1);
}

TEST_CASE("sync_target copies and isolates") {
  Rng rng(3);
  auto online = DuelingNet<double>::glorot(small_cnn(), rng);
  DuelingNet<double> target(small_cnn());
  sync_target(online, target);
  const Mat x = random_matrix(rng, 3, online.spec().input_size());
  CHECK(online.forward(x) == target.forward(x));
  const Mat before = target.forward(x);
  auto g = online.zero_grads();
  for (auto& m : g) m.setOnes();
  sgd_update(online, g, 0.01);
  CHECK(target.forward(x) == before);
  CHECK(online.forward(x) != before);

  DuelingNet<double> ff(small_ffdqn());
  CHECK_THROWS_AS(sync_target(ff, target), ArchitectureMismatch);
}

TEST_CASE("checkpoint round trip is exact and shapes are validated") {
  Rng rng(12);
  for (const auto& spec : {small_ffdqn(), small_cnn()}) {
    Checkpoint ckpt{DuelingNet<double>::glorot(spec, rng), 99, 1234};
    const auto path = (std::filesystem::temp_directory_path() / "ddqn_ckpt_test.json").string();
    save_checkpoint(ckpt, path);
    const Checkpoint back = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(back.net.spec() == spec);
    CHECK(back.rng_seed == 99);
    CHECK(back.training_step == 1234);
    for (std::size_t i = 0; i < ckpt.net.params().size(); ++i) CHECK(back.net.params()[i] == ckpt.net.params()[i]);

    auto j = checkpoint_to_json(ckpt);
    j["parameters"][0]["weight"][0].erase(0);
    CHECK_THROWS_AS(checkpoint_from_json(j), CheckpointMismatch);
    j = checkpoint_to_json(ckpt);
    j["layer_specs"][0]["out"] = 999;
    CHECK_THROWS_AS(checkpoint_from_json(j), CheckpointMismatch);
    j = checkpoint_to_json(ckpt);
    j["parameters"][1]["bias"].push_back(0.0);
    CHECK_THROWS_AS(checkpoint_from_json(j), CheckpointMismatch);
  }
}

TEST_CASE("32-bit instantiation tracks the 64-bit network") {
  Rng rng(30);
  const auto net = DuelingNet<double>::glorot(small_cnn(), rng);
  const auto net32 = net.cast<float>();
  const Mat x = random_matrix(rng, 3, net.spec().input_size());
  const Mat q64 = net.forward(x);
  const Matrix<float> q32 = net32.forward(x.cast<float>());
  CHECK((q64 - q32.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("net spec validation") {
  CHECK_THROWS_AS(NetSpec::cnn(3, 4, {{8, 5, 1}}, {8}).validate(), KernelTooLarge);
  CHECK_THROWS_AS(NetSpec::cnn(3, 4, {}, {8}).validate(), ConfigInvalid);
  CHECK(NetSpec::cnn(3, 10).feature_width() == 128);
  CHECK(NetSpec::cnn(3, 10).dense_input_size() == 32 * 2 + 2);
  CHECK(layer_specs(NetSpec::ffdqn(3, 10)).size() == 4);
}
