// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any of them fails.
//
// Trained models are cached in the work directory (DGVC_ACCEPTANCE_DIR, or
// --work-dir) under the same names and run keys as `dgvc rd-sweep`, so a
// sweep run with the embedded config can be reused as is.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "dgvc/checkpoint.hpp"
#include "dgvc/codec.hpp"
#include "dgvc/coding.hpp"
#include "dgvc/layers.hpp"
#include "dgvc/pmf.hpp"
#include "dgvc/sweep.hpp"
#include "gradcheck.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace dgvc;
using model::ArchVariant;

namespace {

// Tolerances.
constexpr double kCoderSlack = 1.02;       // criterion 2: factor on N*H
constexpr double kCoderExtraBits = 64.0;   // criterion 2: additive bits
constexpr double kLayerGradTol = 1e-4;     // criterion 3
constexpr double kElboGradTol = 1e-3;      // criterion 3
constexpr double kPmfSumTol = 1e-12;       // criterion 4
constexpr double kRateRelTol = 0.05;       // criterion 5
constexpr double kRateExtraBytes = 16.0;   // criterion 5, per segment
constexpr int kAblationMinBetas = 2;       // criterion 6
constexpr int kRdMaxInversions = 1;        // criterion 8
constexpr int kIntegrityTrials = 100;      // criterion 9
constexpr double kTrainPsnrDb = 25.0;      // decoder fidelity on training data

constexpr const char* kConfig = R"({
  "model": {"conv_channels": [16, 32, 64, 64], "hidden": 64, "mlp_hidden": 128},
  "train": {"steps": 5000, "batch": 4, "seed": 1, "log_every": 100, "checkpoint_every": 500},
  "data": {"dir": "data", "manifest": "data/manifest.txt", "train": 2000, "test": 200, "seed": 1},
  "paths": {"work_dir": "."},
  "sweep": {"betas": [0.01, 0.1, 1.0]}
})";

constexpr ArchVariant kArchs[] = {ArchVariant::LstmpLg, ArchVariant::KfpLg, ArchVariant::LstmpL};
constexpr double kDefaultBeta = 0.1;

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Trained sweep, shared by the model-based criteria and built on first use.

struct Run {
  ArchVariant arch;
  double beta;
  std::unique_ptr<model::VideoModel> model;
  codec::Evaluation eval;
};

class Sweep {
 public:
  explicit Sweep(fs::path dir) : dir_(std::move(dir)) {}

  const nlohmann::json& config() {
    if (cfg_.is_null()) {
      fs::create_directories(dir_);
      std::ofstream(dir_ / "accept.json") << kConfig;
      cfg_ = cli::load_config(dir_ / "accept.json");
    }
    return cfg_;
  }

  const std::vector<data::VideoSegment>& test() {
    load_data();
    return test_;
  }
  const std::vector<data::VideoSegment>& train() {
    load_data();
    return train_;
  }
  std::vector<double> betas() { return cli::sweep_betas(config()); }

  // All runs of the sweep, trained (or loaded) and evaluated on the test split.
  std::vector<Run>& runs() {
    if (!runs_.empty()) return runs_;
    load_data();
    std::vector<ad::Tensor> tensors;
    for (const auto& s : train_) tensors.push_back(s.to_tensor());
    for (auto arch : kArchs) {
      for (double beta : betas()) {
        const auto mc = cli::model_config(config_with_arch(arch));
        auto hyper = cli::train_hyper(config());
        hyper.beta = beta;
        std::ostringstream name;
        name << "model_" << model::arch_name(arch) << "_beta" << beta;
        std::ofstream log(dir_ / (name.str() + ".log.jsonl"), std::ios::app);
        const auto t0 = std::chrono::steady_clock::now();
        auto m = std::make_unique<model::VideoModel>(
            train::train_or_load(mc, hyper, tensors, dir_ / (name.str() + ".ckpt"), &log));
        auto ev = codec::evaluate(codec::Codec(*m), test_);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "  " << name.str() << ": bpp " << fmt(ev.mean.bpp) << "  estimate "
                  << fmt(ev.mean.rate_estimate_bpp) << "  psnr " << fmt(ev.mean.psnr_db) << " dB  ("
                  << fmt(secs, 3) << " s)\n";
        runs_.push_back({arch, beta, std::move(m), std::move(ev)});
      }
    }
    return runs_;
  }

  Run& run(ArchVariant arch, double beta) {
    for (auto& r : runs()) {
      if (r.arch == arch && r.beta == beta) return r;
    }
    throw std::logic_error("no such run");
  }

 private:
  nlohmann::json config_with_arch(ArchVariant arch) {
    nlohmann::json c = config();
    cli::set_value(c, "model.arch", std::string(model::arch_name(arch)));
    return c;
  }

  void load_data() {
    if (!test_.empty()) return;
    const auto& cfg = config();
    const fs::path manifest = dir_ / cli::path_value(cfg, "manifest");
    const auto spec = cli::dataset_spec(cfg);
    bool fresh = fs::exists(manifest);
    if (fresh) {
      test_ = data::load_split(manifest, "test");
      train_ = data::load_split(manifest, "train");
      fresh = test_.size() == spec.test && train_.size() == spec.train;
    }
    if (!fresh) {
      std::cerr << "  generating dataset in " << (dir_ / cli::path_value(cfg, "dir")) << '\n';
      data::generate_dataset(dir_ / cli::path_value(cfg, "dir"), spec);
      test_ = data::load_split(manifest, "test");
      train_ = data::load_split(manifest, "train");
    }
  }

  fs::path dir_;
  nlohmann::json cfg_;
  std::vector<data::VideoSegment> test_, train_;
  std::vector<Run> runs_;
};

// ---------------------------------------------------------------------------

Verdict lossless_roundtrip(Sweep& sweep) {
  std::size_t segments = 0, latent_bad = 0, pixel_bad = 0;
  for (auto& run : sweep.runs()) {
    const codec::Codec codec(*run.model);
    for (const auto& seg : sweep.test()) {
      const auto enc = codec.compress(seg);
      const auto dec = codec.decompress(enc.bytes);
      latent_bad += !(dec.latents == enc.latents);
      pixel_bad += dec.video.pixels != enc.reconstruction.pixels;
      ++segments;
    }
  }
  return {segments > 0 && latent_bad == 0 && pixel_bad == 0,
          std::to_string(segments) + " segments over " + std::to_string(sweep.runs().size()) +
              " models: " + std::to_string(latent_bad) + " latent and " + std::to_string(pixel_bad) +
              " pixel mismatches"};
}

// Binary PMF {1 - p, p} with entropy h, by bisection on p in (0, 1/2].
std::vector<double> binary_with_entropy(double h) {
  auto H = [](double p) { return -p * std::log2(p) - (1 - p) * std::log2(1 - p); };
  double lo = 1e-12, hi = 0.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (H(mid) < h ? lo : hi) = mid;
  }
  const double p = 0.5 * (lo + hi);
  return {1 - p, p};
}

Verdict coder_optimality() {
  constexpr std::size_t n = 100000;
  std::mt19937_64 rng(2026);
  bool pass = true;
  std::ostringstream detail;
  for (double h : {0.1, 0.5, 1.0, 3.0}) {
    const std::vector<double> pmf = h == 3.0 ? std::vector<double>(8, 0.125) : binary_with_entropy(h);
    std::discrete_distribution<std::uint32_t> draw(pmf.begin(), pmf.end());
    std::vector<std::uint32_t> symbols(n);
    for (auto& s : symbols) s = draw(rng);
    const auto table = coding::build_cdf_table(pmf);
    const coding::TableProvider provider = [&](std::span<const std::uint32_t>) { return table; };
    const auto bytes = coding::ac_encode(symbols, provider);
    const bool ok = coding::ac_decode(bytes, n, provider) == symbols;
    const double bits = 8.0 * bytes.size();
    const double bound = n * h * kCoderSlack + kCoderExtraBits;
    pass = pass && ok && bits <= bound;
    detail << "H=" << h << ": " << bits << " <= " << fmt(bound, 7) << (ok ? "" : " (decode mismatch)") << "; ";
  }
  return {pass, detail.str()};
}

// sum(w * out) for fixed random weights.
template <typename F>
std::function<double(bool)> projected_loss(ad::ParamStore& store, F build, std::uint64_t seed) {
  return [&store, build, seed](bool backprop) {
    ad::Graph g = backprop ? ad::Graph(&store) : ad::Graph(std::as_const(store));
    const ad::Var out = build(g);
    std::mt19937_64 rng(seed);
    const ad::Var w = g.input(testing::random_tensor(g.value(out).shape(), rng, 0.5, 1.5));
    const ad::Var loss = g.sum(g.mul(out, w));
    if (backprop) g.backward(loss);
    return g.value(loss).item();
  };
}

Verdict gradient_correctness() {
  using testing::random_tensor;
  std::mt19937_64 rng(31);
  std::map<std::string, double> layer_err;
  auto record = [&](const std::string& name, const testing::GradReport& rep) {
    layer_err[name] = std::max(layer_err[name], rep.max_rel);
  };
  {
    ad::ParamStore s;
    const auto d = ad::Dense::create(s, "d", 4, 3, rng);
    const auto x = random_tensor({2, 4}, rng);
    record("dense", testing::check_param_gradients(s, projected_loss(s, [&](ad::Graph& g) { return d(g, g.input(x)); }, 1)));
    record("dense", testing::check_input_gradients({x}, [&](ad::Graph& g, const std::vector<ad::Var>& v) { return d(g, v[0]); }, 1, 1e-5, &s));
  }
  {
    ad::ParamStore s;
    const auto c = ad::Conv2d::create(s, "c", 2, 3, 4, 2, 1, rng);
    const auto x = random_tensor({1, 2, 8, 8}, rng);
    record("conv2d", testing::check_param_gradients(s, projected_loss(s, [&](ad::Graph& g) { return c(g, g.input(x)); }, 2)));
    record("conv2d", testing::check_input_gradients({x}, [&](ad::Graph& g, const std::vector<ad::Var>& v) { return c(g, v[0]); }, 2, 1e-5, &s));
  }
  {
    ad::ParamStore s;
    const auto c = ad::Deconv2d::create(s, "c", 3, 2, 4, 2, 1, rng);
    const auto x = random_tensor({1, 3, 4, 4}, rng);
    record("deconv2d", testing::check_param_gradients(s, projected_loss(s, [&](ad::Graph& g) { return c(g, g.input(x)); }, 3)));
    record("deconv2d", testing::check_input_gradients({x}, [&](ad::Graph& g, const std::vector<ad::Var>& v) { return c(g, v[0]); }, 3, 1e-5, &s));
  }
  {
    ad::ParamStore s;
    const auto cell = ad::LstmCell::create(s, "l", 3, 4, rng);
    const std::vector<ad::Tensor> xs{random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
    auto unroll = [&](ad::Graph& g, const std::vector<ad::Var>& in) {
      ad::LstmVars st = cell.initial(g);
      for (auto x : in) st = cell.step(g, x, st);
      return g.concat({st.h, st.c});
    };
    record("lstm", testing::check_param_gradients(s, projected_loss(s, [&](ad::Graph& g) {
      std::vector<ad::Var> in;
      for (const auto& x : xs) in.push_back(g.input(x));
      return unroll(g, in);
    }, 4)));
    record("lstm", testing::check_input_gradients(xs, unroll, 4, 1e-5, &s));
  }
  {
    ad::ParamStore s;
    const auto bi = ad::BiLstm::create(s, "b", 3, 2, rng);
    const std::vector<ad::Tensor> xs{random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
    record("bilstm", testing::check_input_gradients(xs, [&](ad::Graph& g, const std::vector<ad::Var>& in) { return bi(g, in); }, 5, 1e-5, &s));
    record("bilstm", testing::check_param_gradients(s, projected_loss(s, [&](ad::Graph& g) {
      std::vector<ad::Var> in;
      for (const auto& x : xs) in.push_back(g.input(x));
      return bi(g, in);
    }, 5)));
  }
  for (int inst = 0; inst < 5; ++inst) {
    const auto v = random_tensor({2, 3}, rng, -4.0, 4.0);
    const auto mu = random_tensor({2, 3}, rng, -2.0, 2.0);
    const auto sigma = random_tensor({2, 3}, rng, 0.2, 3.0);
    record("normal box mass", testing::check_input_gradients({v, mu, sigma}, [](ad::Graph& g, const std::vector<ad::Var>& x) {
      return model::normal_log_mass(g, x[0], x[1], x[2]);
    }, 10 + inst));

    ad::ParamStore s;
    const auto dens = model::FactorizedDensity::create(s, "p", 3, 4);
    for (auto& p : s.all()) p.value = random_tensor(p.value.shape(), rng, -1.5, 1.5);
    const auto vals = random_tensor({2, 3}, rng, -3.0, 3.0);
    record("factorized box mass", testing::check_input_gradients({vals}, [&](ad::Graph& g, const std::vector<ad::Var>& x) {
      return dens.log_mass(g, x[0]);
    }, 20 + inst, 1e-5, &s));
    record("factorized box mass", testing::check_param_gradients(s, projected_loss(s, [&](ad::Graph& g) {
      return dens.log_mass(g, g.input(vals));
    }, 20 + inst)));

    const auto x = random_tensor({4}, rng, 0.0, 1.0);
    const auto mean = random_tensor({4}, rng, 0.0, 1.0);
    record("laplace nll", testing::check_input_gradients({mean}, [&](ad::Graph& g, const std::vector<ad::Var>& m) {
      return model::laplace_nll(g, g.input(x), m[0], 1.5);
    }, 30 + inst));
  }

  bool pass = true;
  std::ostringstream detail;
  double worst_layer = 0.0;
  for (const auto& [name, err] : layer_err) {
    worst_layer = std::max(worst_layer, err);
    if (err >= kLayerGradTol) {
      pass = false;
      detail << name << " " << fmt(err, 3) << "; ";
    }
  }
  detail << "worst layer " << fmt(worst_layer, 3);

  std::vector<ad::Tensor> batch;
  for (std::uint64_t i = 0; i < 2; ++i) {
    batch.push_back(data::gen_sprite_video(data::SpriteSceneSpec::random(i + 1, 16, 16), 3, 16, 16).to_tensor());
  }
  for (auto arch : kArchs) {
    model::ModelConfig c;
    c.frame_h = c.frame_w = 16;
    c.frames = 3;
    c.dim_z = 2;
    c.dim_f = arch == ArchVariant::LstmpL ? 0 : 3;
    c.hidden = 4;
    c.mlp_hidden = 4;
    c.conv_channels = {2, 4};
    c.arch = arch;
    model::VideoModel m(c, 3);
    train::TrainHyper h;
    h.beta = 0.7;
    std::mt19937_64 probe(17);
    // Roundoff in central differences scales with the loss itself.
    const double floor = 1e-7 * std::fabs(train::elbo_loss(m, batch, h, probe, false).loss);
    const auto rep = testing::check_param_gradients(m.params(), [&](bool backprop) {
      std::mt19937_64 noise(17);
      return train::elbo_loss(m, batch, h, noise, backprop).loss;
    }, 1e-5, 1, floor);
    pass = pass && rep.max_rel < kElboGradTol;
    detail << ", elbo " << model::arch_name(arch) << " " << fmt(rep.max_rel, 3);
  }
  return {pass, detail.str()};
}

Verdict probability_validity() {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> mu(-80.0, 80.0), log_sigma(-14.0, 5.0);
  ad::ParamStore store;
  const auto dens = model::FactorizedDensity::create(store, "p", 3, 4);
  double worst_normal = 0.0, worst_factorized = 0.0;
  std::size_t non_monotone = 0, out_of_range = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const model::NormalDist n{mu(rng), std::exp(log_sigma(rng))};
    const auto pn = model::integer_pmf_table(n, 64);
    worst_normal = std::max(worst_normal, std::fabs(std::accumulate(pn.begin(), pn.end(), 0.0) - 1.0));

    for (auto& p : store.all()) p.value = testing::random_tensor(p.value.shape(), rng, -3.0, 3.0);
    for (std::size_t dim = 0; dim < 3; ++dim) {
      const auto pf = model::integer_pmf_table(model::FactorizedDim{&dens, &store, dim}, 64);
      worst_factorized = std::max(worst_factorized, std::fabs(std::accumulate(pf.begin(), pf.end(), 0.0) - 1.0));
      double prev = 0.0;
      for (int i = 0; i < 1000; ++i) {
        const double c = dens.cdf(store, dim, -80.0 + 160.0 * i / 999.0);
        non_monotone += c < prev;
        out_of_range += c < 0.0 || c > 1.0;
        prev = c;
      }
    }
  }
  return {worst_normal <= kPmfSumTol && worst_factorized <= kPmfSumTol && non_monotone == 0 && out_of_range == 0,
          "max |sum - 1|: normal " + fmt(worst_normal, 3) + ", factorized " + fmt(worst_factorized, 3) + "; " +
              std::to_string(non_monotone) + " CDF decreases, " + std::to_string(out_of_range) +
              " out of [0, 1] on 3000 grids"};
}

double rate_allowance_bpp(const model::ModelConfig& c, double estimate) {
  const double pixels = static_cast<double>(c.frames) * c.frame_h * c.frame_w;
  return kRateRelTol * estimate + 8.0 * kRateExtraBytes / pixels;
}

Verdict rate_consistency(Sweep& sweep) {
  auto check = [&](double beta) {
    const auto& r = sweep.run(ArchVariant::LstmpLg, beta);
    const auto& m = r.eval.mean;
    const auto& c = r.model->config();
    const double header_bpp = 8.0 * codec::kHeaderSize / (static_cast<double>(c.frames) * c.frame_h * c.frame_w);
    const double gap = std::fabs(m.bpp - m.rate_estimate_bpp);
    const double allow = rate_allowance_bpp(c, m.rate_estimate_bpp);
    std::ostringstream s;
    s << "beta " << beta << ": |" << fmt(m.bpp) << " - " << fmt(m.rate_estimate_bpp) << "| = " << fmt(gap)
      << " vs allowance " << fmt(allow) << " bpp (header " << fmt(header_bpp) << ", payload-only gap "
      << fmt(m.bpp - header_bpp - m.rate_estimate_bpp) << ")";
    return std::pair{gap <= allow, s.str()};
  };
  const auto [pass, detail] = check(kDefaultBeta);
  std::string others;
  for (double beta : sweep.betas()) {
    if (beta != kDefaultBeta) others += "; " + check(beta).second;
  }
  return {pass, detail + others};
}

Verdict ablation(Sweep& sweep) {
  int holds = 0;
  std::ostringstream detail;
  for (double beta : sweep.betas()) {
    const auto& lg = sweep.run(ArchVariant::LstmpLg, beta).eval.mean;
    const auto& kf = sweep.run(ArchVariant::KfpLg, beta).eval.mean;
    const auto& l = sweep.run(ArchVariant::LstmpL, beta).eval.mean;
    const bool ok = lg.bpp < kf.bpp && lg.psnr_db >= kf.psnr_db && lg.bpp < l.bpp;
    holds += ok;
    detail << "beta " << beta << (ok ? " holds" : " fails") << " (bpp LG " << fmt(lg.bpp) << " KF " << fmt(kf.bpp)
           << " L " << fmt(l.bpp) << "; psnr LG " << fmt(lg.psnr_db) << " KF " << fmt(kf.psnr_db) << " L "
           << fmt(l.psnr_db) << "); ";
  }
  detail << holds << " of " << sweep.betas().size() << " on " << sweep.test().size() << " segments";
  return {holds >= kAblationMinBetas, detail.str()};
}

Verdict entropy_by_frame(Sweep& sweep) {
  bool pass = true;
  std::ostringstream detail;
  for (double beta : sweep.betas()) {
    const auto& bz = sweep.run(ArchVariant::LstmpLg, beta).eval.mean.bits_z;
    const double worst = *std::max_element(bz.begin() + 2, bz.end());
    pass = pass && worst < bz[0];
    detail << "beta " << beta << ": bits_z(1) " << fmt(bz[0]) << ", max over t>=3 " << fmt(worst) << "; ";
  }
  return {pass, detail.str()};
}

Verdict rd_monotonicity(Sweep& sweep) {
  auto betas = sweep.betas();
  std::sort(betas.begin(), betas.end());
  int inversions = 0;
  std::ostringstream detail;
  for (auto arch : kArchs) {
    detail << model::arch_name(arch) << ":";
    for (std::size_t i = 0; i < betas.size(); ++i) {
      const auto& m = sweep.run(arch, betas[i]).eval.mean;
      detail << " (" << fmt(m.bpp) << ", " << fmt(m.psnr_db) << ")";
      if (i > 0) {
        const auto& prev = sweep.run(arch, betas[i - 1]).eval.mean;
        inversions += m.bpp > prev.bpp;
        inversions += m.psnr_db > prev.psnr_db;
      }
    }
    detail << "; ";
  }
  detail << inversions << " inversion(s) in (bpp, psnr) over increasing beta";
  return {inversions <= kRdMaxInversions, detail.str()};
}

Verdict bitstream_integrity(Sweep& sweep) {
  auto& runs = sweep.runs();
  const auto& test = sweep.test();
  std::mt19937_64 rng(9);
  int flips_caught = 0, refused = 0, mismatch_errors = 0;
  for (int trial = 0; trial < kIntegrityTrials; ++trial) {
    const auto& run = runs[rng() % runs.size()];
    const codec::Codec codec(*run.model);
    auto bytes = codec.compress(test[rng() % test.size()]).bytes;
    const std::size_t bit = 8 * codec::kHeaderSize + rng() % (8 * (bytes.size() - codec::kHeaderSize));
    bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    try {
      codec.decompress(bytes);
    } catch (const codec::CodecError&) {
      ++flips_caught;
    }
  }
  for (int trial = 0; trial < kIntegrityTrials; ++trial) {
    const std::size_t a = trial % runs.size();
    const std::size_t b = (a + 1 + (trial / runs.size()) % (runs.size() - 1)) % runs.size();
    const auto bytes = codec::Codec(*runs[a].model).compress(test[trial % test.size()]).bytes;
    try {
      codec::Codec(*runs[b].model).decompress(bytes);
    } catch (const codec::ModelMismatchError&) {
      ++refused;
      ++mismatch_errors;
    } catch (const codec::CodecError&) {
      ++refused;
    }
  }
  return {flips_caught == kIntegrityTrials && refused == kIntegrityTrials,
          std::to_string(flips_caught) + "/" + std::to_string(kIntegrityTrials) + " payload bit flips detected, " +
              std::to_string(refused) + "/" + std::to_string(kIntegrityTrials) + " wrong-model decodes refused (" +
              std::to_string(mismatch_errors) + " by checksum)"};
}

Verdict training_fidelity(Sweep& sweep) {
  const auto& train = sweep.train();
  const std::size_t n = std::min<std::size_t>(200, train.size());
  const auto ev = codec::evaluate(codec::Codec(*sweep.run(ArchVariant::LstmpLg, kDefaultBeta).model),
                                  std::span(train).first(n));
  return {ev.mean.psnr_db >= kTrainPsnrDb, "LSTMP-LG beta " + fmt(kDefaultBeta) + " on " + std::to_string(n) +
                                               " training segments: " + fmt(ev.mean.psnr_db) + " dB (need " +
                                               fmt(kTrainPsnrDb) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string work_dir;
  if (const char* env = std::getenv("DGVC_ACCEPTANCE_DIR")) work_dir = env;
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "Cache for data and trained models");
  app.add_option("--only", only, "Run only these criteria (0 = training-set fidelity)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  if (work_dir.empty()) {
    std::cerr << "error: set DGVC_ACCEPTANCE_DIR or --work-dir\n";
    return 2;
  }

  Sweep sweep(work_dir);
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "lossless latent roundtrip", [&] { return lossless_roundtrip(sweep); }},
      {2, "coder optimality", coder_optimality},
      {3, "gradient correctness", gradient_correctness},
      {4, "probability validity", probability_validity},
      {5, "rate-estimate consistency", [&] { return rate_consistency(sweep); }},
      {6, "ablation directions", [&] { return ablation(sweep); }},
      {7, "entropy drops with frame index", [&] { return entropy_by_frame(sweep); }},
      {8, "rate-distortion monotonicity", [&] { return rd_monotonicity(sweep); }},
      {9, "bitstream integrity", [&] { return bitstream_integrity(sweep); }},
      {0, "decoder fidelity on training data", [&] { return training_fidelity(sweep); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    if (v.detail.ends_with("; ")) v.detail.resize(v.detail.size() - 2);
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (c.id ? std::to_string(c.id) : std::string("+")) << ". "
              << c.name << ": " << v.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " check(s) failed" : std::string("all checks passed")) << '\n';
  return failed ? 1 : 0;
}
