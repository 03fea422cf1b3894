#include <doctest.h>

#include <cmath>
#include <random>

#include "dgvc/coding.hpp"
#include "dgvc/model.hpp"
#include "dgvc/pmf.hpp"
#include "dgvc/prob.hpp"
#include "gradcheck.hpp"

using namespace dgvc;
using namespace dgvc::model;
using ad::Shape;
using dgvc::testing::check_input_gradients;
using dgvc::testing::check_param_gradients;
using dgvc::testing::random_tensor;

namespace {

ModelConfig small_config(ArchVariant arch = ArchVariant::LstmpLg) {
  ModelConfig c;
  c.frame_h = c.frame_w = 16;
  c.frames = 3;
  c.dim_z = 4;
  c.dim_f = arch == ArchVariant::LstmpL ? 0 : 5;
  c.hidden = 6;
  c.mlp_hidden = 8;
  c.conv_channels = {3, 4};
  c.arch = arch;
  return c;
}

void zero_param(VideoModel& m, const std::string& name) {
  for (auto& p : m.params().all()) {
    if (p.name.rfind(name, 0) == 0) p.value.fill(0.0);
  }
}

Tensor frames_tensor(const ModelConfig& c, std::mt19937_64& rng) {
  return random_tensor({c.frames, c.frame_c, c.frame_h, c.frame_w}, rng, 0.0, 1.0);
}

}  // namespace

TEST_CASE("model config invariants") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    ModelConfig m;
    mutate(m);
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  };
  bad([](ModelConfig& m) { m.frame_h = m.frame_w = 24; });
  bad([](ModelConfig& m) { m.frame_h = m.frame_w = 8; });
  bad([](ModelConfig& m) { m.frames = 1; });
  bad([](ModelConfig& m) { m.arch = ArchVariant::LstmpL; });  // dim_f must be 0
  bad([](ModelConfig& m) { m.dim_f = 0; });                   // LSTMP-LG needs f
  CHECK(parse_arch("KFP-LG") == ArchVariant::KfpLg);
  CHECK_THROWS(parse_arch("KFP"));
}

TEST_CASE("encoders: zero output layer, determinism, continuity") {
  std::mt19937_64 rng(1);
  VideoModel m(small_config(), 7);
  const Tensor x = frames_tensor(m.config(), rng);
  const Tensor frame = Tensor(Shape{3, 16, 16}, std::vector<double>(x.values().begin(), x.values().begin() + 768));

  CHECK(m.encode_local(frame) == m.encode_local(frame));
  CHECK(m.encode_global(x) == m.encode_global(x));

  // Continuity: a 1e-6 pixel change moves the output by a comparable amount.
  Tensor nudged = frame;
  nudged[100] += 1e-6;
  const Tensor a = m.encode_local(frame), b = m.encode_local(nudged);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
  CHECK(diff < 1e-4);

  zero_param(m, "enc_local.fc2");
  zero_param(m, "enc_global.fc2");
  CHECK(m.encode_local(frame) == Tensor(Shape{4}));
  CHECK(m.encode_global(x) == Tensor(Shape{5}));
}

TEST_CASE("global encoder is order sensitive") {
  std::mt19937_64 rng(2);
  ModelConfig c = small_config();
  VideoModel m(c, 3);
  const Tensor x = frames_tensor(c, rng);
  Tensor reversed(x.shape());
  const std::size_t per = c.values_per_frame();
  for (std::size_t t = 0; t < c.frames; ++t) {
    std::copy_n(x.ptr() + t * per, per, reversed.ptr() + (c.frames - 1 - t) * per);
  }
  CHECK(m.encode_global(x) != m.encode_global(reversed));

  // Two identical frames: the reversed segment is the same segment.
  c.frames = 2;
  VideoModel m2(c, 3);
  Tensor twin(Shape{2, 3, 16, 16});
  std::copy_n(x.ptr(), per, twin.ptr());
  std::copy_n(x.ptr(), per, twin.ptr() + per);
  CHECK(m2.encode_global(twin) == m2.encode_global(twin));

  VideoModel local(small_config(ArchVariant::LstmpL), 3);
  CHECK_THROWS(local.encode_global(x));
}

TEST_CASE("decoder output lies in (0, 1) and is deterministic") {
  std::mt19937_64 rng(3);
  VideoModel m(small_config(), 4);
  const Tensor z = random_tensor({3, 4}, rng, -30.0, 30.0);
  const Tensor f = random_tensor({5}, rng, -30.0, 30.0);
  const Tensor out = m.decode_all(z, &f);
  CHECK(out.shape() == Shape{3, 3, 16, 16});
  for (double v : out.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(out == m.decode_all(z, &f));
  CHECK(m.decode_frame(Tensor(Shape{4}), &f).shape() == Shape{3, 16, 16});
  CHECK_THROWS(m.decode_frame(Tensor(Shape{3}), &f));
}

TEST_CASE("Laplace frame log-likelihood") {
  const Tensor x(Shape{2, 3}, 0.25);
  CHECK(frame_log_likelihood(x, x, 1.0) == doctest::Approx(6.0 * std::log(0.5)));
  CHECK(frame_log_likelihood(Tensor::vector({1.0}), Tensor::vector({0.0}), 2.0) == doctest::Approx(-2.0));
  CHECK_THROWS(frame_log_likelihood(x, x, 0.0));
  CHECK_THROWS(frame_log_likelihood(x, x, -1.0));

  // d(-log p)/d mean = lambda * sign(mean - x)
  ad::Graph g;
  const Var xv = g.input(Tensor::vector({0.2, 0.8, 0.5}));
  const Var mean = g.variable(Tensor::vector({0.5, 0.3, 0.7}));
  g.backward(laplace_nll(g, xv, mean, 3.0));
  const Tensor grad = g.grad(mean);
  CHECK(grad[0] == doctest::Approx(3.0));
  CHECK(grad[1] == doctest::Approx(-3.0));
  CHECK(grad[2] == doctest::Approx(3.0));
  CHECK(g.value(laplace_nll(g, xv, mean, 3.0)).item() ==
        doctest::Approx(-frame_log_likelihood(g.value(xv), g.value(mean), 3.0)));
}

TEST_CASE("factorized density: identity init, monotone, bounded") {
  ad::ParamStore store;
  const auto d = FactorizedDensity::create(store, "p", 3, 4);
  for (double v : {-5.0, -0.5, 0.0, 0.3, 4.0}) CHECK(d.cdf(store, 1, v) == doctest::Approx(prob::sigmoid(v)).epsilon(1e-12));

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    for (auto& p : store.all()) p.value = random_tensor(p.value.shape(), rng, -3.0, 3.0);
    for (std::size_t dim = 0; dim < 3; ++dim) {
      double prev = -1.0;
      for (int i = 0; i < 1000; ++i) {
        const double v = -30.0 + 60.0 * i / 999.0;
        const double c = d.cdf(store, dim, v);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        CHECK(c >= prev);
        prev = c;
      }
    }
  }
}

TEST_CASE("factorized density at initialization reaches 0.999 at +20") {
  VideoModel m(small_config(), 1);
  for (std::size_t dim = 0; dim < 4; ++dim) CHECK(m.factorized_cdf_z1(dim, 20.0) >= 0.999);
  for (std::size_t dim = 0; dim < 5; ++dim) CHECK(m.factorized_cdf_f(dim, 20.0) >= 0.999);
}

TEST_CASE("fused log-mass primitives: oracle values and gradients") {
  // log(Phi(b) - Phi(a)), reference values from 50-digit arithmetic.
  auto normal = [](double v, double mu, double sigma) {
    ad::Graph g;
    return g.value(normal_log_mass(g, g.input(Tensor::vector({v})), g.input(Tensor::vector({mu})),
                                   g.input(Tensor::vector({sigma}))))[0];
  };
  CHECK(normal(0.0, 0.0, 1.0) == doctest::Approx(std::log(0.38292492254802620728)).epsilon(1e-13));
  CHECK(normal(-30.0, 0.0, 1.0) == doctest::Approx(-439.42947460915031827).epsilon(1e-12));
  CHECK(normal(30.0, 0.0, 1.0) == doctest::Approx(-439.42947460915031827).epsilon(1e-12));
  CHECK(normal(2.0, 0.0, 0.1) == doctest::Approx(-116.13138484571170).epsilon(1e-12));
  CHECK(normal(0.3, 0.0, 0.01) == doctest::Approx(0.0));

  const auto lo = prob::logistic_interval_log_mass(40.0, 39.0);
  CHECK(lo.value == doctest::Approx(-39.458675145387081907).epsilon(1e-13));
  CHECK(prob::logistic_interval_log_mass(-39.0, -40.0).value == doctest::Approx(-39.458675145387081907).epsilon(1e-13));
  CHECK(prob::logistic_interval_log_mass(0.5, -0.5).value == doctest::Approx(-1.4068291137472952528).epsilon(1e-13));

  std::mt19937_64 rng(12);
  for (int inst = 0; inst < 10; ++inst) {
    CAPTURE(inst);
    const Tensor v = random_tensor({2, 3}, rng, -4.0, 4.0);
    const Tensor mu = random_tensor({2, 3}, rng, -2.0, 2.0);
    const Tensor sigma = random_tensor({2, 3}, rng, 0.2, 3.0);
    const auto rep = check_input_gradients({v, mu, sigma}, [](ad::Graph& g, const std::vector<Var>& x) {
      return normal_log_mass(g, x[0], x[1], x[2]);
    }, 40 + inst);
    INFO(rep.where);
    CHECK(rep.max_rel < 1e-4);

    ad::ParamStore store;
    const auto dens = FactorizedDensity::create(store, "p", 3, 4);
    for (auto& p : store.all()) p.value = random_tensor(p.value.shape(), rng, -1.5, 1.5);
    const Tensor vals = random_tensor({2, 3}, rng, -3.0, 3.0);
    const auto irep = check_input_gradients({vals}, [&](ad::Graph& g, const std::vector<Var>& x) {
      return dens.log_mass(g, x[0]);
    }, 60 + inst, 1e-5, &store);
    INFO(irep.where);
    CHECK(irep.max_rel < 1e-4);
    const auto prep = check_param_gradients(store, [&](bool backprop) {
      ad::Graph g = backprop ? ad::Graph(&store) : ad::Graph(std::as_const(store));
      const Var loss = g.sum(dens.log_mass(g, g.input(vals)));
      if (backprop) g.backward(loss);
      return g.value(loss).item();
    });
    INFO(prep.where);
    CHECK(prep.max_rel < 1e-4);

    const Tensor x = random_tensor({4}, rng, 0.0, 1.0);
    const Tensor mean = random_tensor({4}, rng, 0.0, 1.0);
    const auto lrep = check_input_gradients({mean}, [&](ad::Graph& g, const std::vector<Var>& m) {
      return laplace_nll(g, g.input(x), m[0], 1.5);
    }, 80 + inst);
    INFO(lrep.where);
    CHECK(lrep.max_rel < 1e-4);
  }
}

TEST_CASE("conditional priors: zero parameters, determinism, context") {
  std::mt19937_64 rng(4);
  const Tensor z_prev = random_tensor({4}, rng, -3.0, 3.0);

  SUBCASE("LSTM prior") {
    VideoModel m(small_config(ArchVariant::LstmpLg), 5);
    const auto s0 = m.initial_prior_state();
    CHECK(s0.lstm.h == Tensor(Shape{6}));
    CHECK(s0.lstm.c == Tensor(Shape{6}));
    const auto [s1, p1] = m.lstm_prior_step(s0, z_prev);
    const auto [s1b, p1b] = m.lstm_prior_step(s0, z_prev);
    CHECK(p1.mu == p1b.mu);
    CHECK(p1.sigma == p1b.sigma);
    for (double s : p1.sigma.values()) CHECK(s >= kSigmaFloor);

    zero_param(m, "prior_lstm");
    const auto [sz, pz] = m.lstm_prior_step(s0, z_prev);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(pz.mu[i] == 0.0);
      CHECK(pz.sigma[i] == doctest::Approx(std::log(2.0) + 1e-6).epsilon(1e-14));
    }
  }

  SUBCASE("KF prior") {
    VideoModel m(small_config(ArchVariant::KfpLg), 5);
    for (const char* name : {"prior_kf.fc1.w", "prior_kf.fc2.w"}) {
      CHECK(m.params().find(name)->value.shape() == Shape{4, 4});
    }
    CHECK(m.params().find("prior_kf.fc3.w")->value.shape() == Shape{8, 4});
    const auto p = m.kf_prior_step(z_prev);
    CHECK(p.mu == m.kf_prior_step(z_prev).mu);
    zero_param(m, "prior_kf");
    const auto pz = m.kf_prior_step(z_prev);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(pz.mu[i] == 0.0);
      CHECK(pz.sigma[i] == doctest::Approx(0.6931471805599453 + 1e-6).epsilon(1e-14));
    }
  }
}

TEST_CASE("KF prior ignores all history but z_{t-1}; LSTM prior does not") {
  std::mt19937_64 rng(5);
  std::vector<Tensor> hist;
  for (int i = 0; i < 4; ++i) hist.push_back(random_tensor({4}, rng, -3.0, 3.0));
  auto run = [](const VideoModel& m, const std::vector<Tensor>& h) {
    auto state = m.initial_prior_state();
    PriorStep last;
    for (const auto& z : h) std::tie(state, last) = m.prior_step(state, z);
    return last.mu;
  };
  std::vector<Tensor> changed = hist;
  changed[0] = random_tensor({4}, rng, -3.0, 3.0);
  std::swap(changed[1], changed[2]);

  VideoModel kf(small_config(ArchVariant::KfpLg), 6);
  CHECK(run(kf, hist) == run(kf, changed));
  VideoModel lstm(small_config(ArchVariant::LstmpLg), 6);
  CHECK(run(lstm, hist) != run(lstm, changed));
}

TEST_CASE("integer pmf: oracle value, symmetry, normalization, range") {
  const NormalDist unit{0.0, 1.0};
  CHECK(integer_pmf(unit, 0, 64) == doctest::Approx(0.38292492254802620728).epsilon(1e-14));
  CHECK(integer_pmf(unit, 1, 64) == integer_pmf(unit, -1, 64));
  CHECK_THROWS_AS(integer_pmf(unit, 65, 64), std::out_of_range);
  CHECK_THROWS_AS(integer_pmf(unit, -65, 64), std::out_of_range);

  // Boundary bins absorb the tails.
  const NormalDist wide{40.0, 30.0};
  CHECK(integer_pmf(wide, 64, 64) == doctest::Approx(prob::normal_cdf(-(63.5 - 40.0) / 30.0)));
  CHECK(integer_pmf(wide, -64, 64) == doctest::Approx(prob::normal_cdf((-63.5 - 40.0) / 30.0)));
}

TEST_CASE("integer pmf sums to one for 1000 random prior parameterizations") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> mu(-80.0, 80.0), log_sigma(-14.0, 5.0);
  ad::ParamStore store;
  const auto dens = FactorizedDensity::create(store, "p", 2, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    const NormalDist n{mu(rng), std::exp(log_sigma(rng))};
    double total = 0.0;
    for (double p : integer_pmf_table(n, 64)) total += p;
    CHECK(std::fabs(total - 1.0) <= 1e-12);

    for (auto& p : store.all()) p.value = random_tensor(p.value.shape(), rng, -3.0, 3.0);
    double ftotal = 0.0;
    for (double p : integer_pmf_table(FactorizedDim{&dens, &store, 1}, 64)) ftotal += p;
    CHECK(std::fabs(ftotal - 1.0) <= 1e-12);
  }
}

TEST_CASE("segment terms: box posterior and rate additivity") {
  std::mt19937_64 rng(6);
  const ModelConfig c = small_config();
  VideoModel m(c, 9);
  const Tensor x = frames_tensor(c, rng);
  const Tensor nz(Shape{3, 4}, std::vector<double>(coding::inject_noise(std::vector<double>(12, 0.0), rng)));
  const Tensor nf(Shape{5}, std::vector<double>(coding::inject_noise(std::vector<double>(5, 0.0), rng)));
  ad::Graph g(std::as_const(m.params()));
  const auto terms = m.segment_terms(g, x, nz, nf, 1.0);

  // Independent recomputation of the total cross entropy from the means.
  const Tensor& zh = g.value(terms.z_hat);
  const Tensor& fh = g.value(terms.f_hat);
  double total = 0.0;
  for (std::size_t d = 0; d < 5; ++d) {
    const double v = fh[d] + nf[d];
    total -= std::log(m.factorized_cdf_f(d, v + 0.5) - m.factorized_cdf_f(d, v - 0.5));
  }
  std::vector<Tensor> z(3, Tensor(Shape{4}));
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t d = 0; d < 4; ++d) z[t][d] = zh[t * 4 + d] + nz[t * 4 + d];
  }
  for (std::size_t d = 0; d < 4; ++d) {
    total -= std::log(m.factorized_cdf_z1(d, z[0][d] + 0.5) - m.factorized_cdf_z1(d, z[0][d] - 0.5));
  }
  auto state = m.initial_prior_state();
  for (std::size_t t = 1; t < 3; ++t) {
    auto [next, p] = m.prior_step(state, z[t - 1]);
    state = next;
    for (std::size_t d = 0; d < 4; ++d) {
      const double a = (z[t][d] - 0.5 - p.mu[d]) / p.sigma[d];
      const double b = (z[t][d] + 0.5 - p.mu[d]) / p.sigma[d];
      total -= std::log(prob::normal_cdf(b) - prob::normal_cdf(a));
    }
  }
  const double rf = g.value(terms.rate_f).item(), rz = g.value(terms.rate_z).item();
  CHECK(rf + rz == doctest::Approx(total).epsilon(1e-10));

  const double expected_distortion = -frame_log_likelihood(x, g.value(terms.recon), 1.0);
  CHECK(g.value(terms.distortion).item() == doctest::Approx(expected_distortion).epsilon(1e-12));
}
