#include "dgvc/model.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "dgvc/prob.hpp"

namespace dgvc::model {

using ad::Shape;

std::string_view arch_name(ArchVariant arch) {
  switch (arch) {
    case ArchVariant::LstmpLg: return "LSTMP-LG";
    case ArchVariant::KfpLg: return "KFP-LG";
    case ArchVariant::LstmpL: return "LSTMP-L";
  }
  throw std::invalid_argument("unknown architecture variant");
}

ArchVariant parse_arch(std::string_view name) {
  for (ArchVariant a : {ArchVariant::LstmpLg, ArchVariant::KfpLg, ArchVariant::LstmpL}) {
    if (arch_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown architecture variant '" + std::string(name) +
                              "' (expected LSTMP-LG, KFP-LG or LSTMP-L)");
}

bool has_global(ArchVariant arch) { return arch != ArchVariant::LstmpL; }

namespace {
bool power_of_two(unsigned v) { return v != 0 && (v & (v - 1)) == 0; }
}  // namespace

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (!power_of_two(frame_h) || !power_of_two(frame_w) || frame_h < 16 || frame_w < 16) {
    bad("frame_h and frame_w must be powers of two >= 16");
  }
  if (frame_h != frame_w) bad("frames must be square");
  if (frame_c == 0) bad("frame_c must be positive");
  if (frames < 2) bad("T must be at least 2");
  if (dim_z == 0) bad("dim_z must be positive");
  if (has_global(arch) != (dim_f != 0)) bad("dim_f must be 0 exactly for LSTMP-L");
  if (hidden == 0 || mlp_hidden == 0) bad("hidden sizes must be positive");
  if (conv_channels.empty()) bad("at least one conv layer is required");
  if ((frame_h >> conv_channels.size()) == 0) bad("too many conv layers for the frame size");
  for (auto c : conv_channels) {
    if (c == 0) bad("conv channels must be positive");
  }
  if (alphabet_bound == 0) bad("alphabet bound must be positive");
  if (flow_layers < 2) bad("factorized density needs at least two layers");
}

std::size_t ModelConfig::feature_size() const {
  return std::size_t{conv_channels.back()} * feature_side() * feature_side();
}

// ---------------------------------------------------------------------------
// Factorized density

FactorizedDensity FactorizedDensity::create(ParamStore& store, const std::string& name,
                                            std::size_t dims, std::size_t layers) {
  FactorizedDensity d;
  d.dims_ = dims;
  d.layers_ = layers;
  // softplus(h) == 1, b == 0, tanh(a) == 0: every layer is the identity.
  const double unit = std::log(std::expm1(1.0));
  d.scale_ = store.add(name + ".scale", Tensor(Shape{layers, dims}, unit));
  d.bias_ = store.add(name + ".bias", Tensor(Shape{layers, dims}, 0.0));
  d.mix_ = store.add(name + ".mix", Tensor(Shape{layers - 1, dims}, 0.0));
  return d;
}

double FactorizedDensity::logit(const ParamStore& store, std::size_t dim, double x) const {
  const Tensor& h = store[scale_].value;
  const Tensor& b = store[bias_].value;
  const Tensor& a = store[mix_].value;
  for (std::size_t k = 0; k < layers_; ++k) {
    const std::size_t i = k * dims_ + dim;
    const double u = prob::softplus(h[i]) * x + b[i];
    x = k + 1 < layers_ ? u + std::tanh(a[i]) * std::tanh(u) : u;
  }
  return x;
}

double FactorizedDensity::cdf(const ParamStore& store, std::size_t dim, double x) const {
  return prob::sigmoid(logit(store, dim, x));
}

Var FactorizedDensity::log_mass(Graph& g, Var values) const {
  const Tensor& v = g.value(values);
  if (v.rank() != 2 || v.dim(1) != dims_) {
    throw ad::ShapeError("factorized log mass: values " + ad::shape_string(v.shape()) +
                         ", expected [N," + std::to_string(dims_) + "]");
  }
  const Var hv = g.param(scale_), bv = g.param(bias_), av = g.param(mix_);
  const Tensor& h = g.value(hv);
  const Tensor& b = g.value(bv);
  const Tensor& a = g.value(av);
  const std::size_t n = v.dim(0), d = dims_, kl = layers_;

  // Saved per element and side (0 = upper, 1 = lower): the input of each
  // affine layer and its output.
  auto xs = std::make_shared<std::vector<double>>(2 * n * d * kl);
  auto us = std::make_shared<std::vector<double>>(2 * n * d * kl);
  auto dup = std::make_shared<std::vector<double>>(n * d);
  auto dlo = std::make_shared<std::vector<double>>(n * d);
  Tensor out(Shape{n, d});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t e = r * d + j;
      double logits[2];
      for (int side = 0; side < 2; ++side) {
        double x = v[e] + (side == 0 ? 0.5 : -0.5);
        const std::size_t base = (side * n * d + e) * kl;
        for (std::size_t k = 0; k < kl; ++k) {
          const std::size_t pi = k * d + j;
          (*xs)[base + k] = x;
          const double u = prob::softplus(h[pi]) * x + b[pi];
          (*us)[base + k] = u;
          x = k + 1 < kl ? u + std::tanh(a[pi]) * std::tanh(u) : u;
        }
        logits[side] = x;
      }
      const prob::LogisticLogMass lm = prob::logistic_interval_log_mass(logits[0], logits[1]);
      out[e] = lm.value;
      (*dup)[e] = lm.d_upper;
      (*dlo)[e] = lm.d_lower;
    }
  }
  return g.custom(
      "factorized_log_mass", {values, hv, bv, av}, std::move(out),
      [values, hv, bv, av, xs, us, dup, dlo, n, d, kl](Graph& g, const Tensor& gy) {
        const Tensor& h = g.value(hv);
        const Tensor& a = g.value(av);
        Tensor* gv = g.requires_grad(values) ? &g.grad_ref(values) : nullptr;
        Tensor& gh = g.grad_ref(hv);
        Tensor& gb = g.grad_ref(bv);
        Tensor& ga = g.grad_ref(av);
        for (std::size_t e = 0; e < n * d; ++e) {
          const std::size_t j = e % d;
          for (int side = 0; side < 2; ++side) {
            double du = gy[e] * (side == 0 ? (*dup)[e] : (*dlo)[e]);
            const std::size_t base = (side * n * d + e) * kl;
            for (std::size_t k = kl; k-- > 0;) {
              const std::size_t pi = k * d + j;
              const double x = (*xs)[base + k];
              gh[pi] += du * x * prob::sigmoid(h[pi]);
              gb[pi] += du;
              const double dx = du * prob::softplus(h[pi]);
              if (k == 0) {
                if (gv) (*gv)[e] += dx;
                break;
              }
              // x_k = u_{k-1} + tanh(a_{k-1}) tanh(u_{k-1})
              const std::size_t pp = (k - 1) * d + j;
              const double up = (*us)[base + k - 1];
              const double ta = std::tanh(a[pp]);
              const double tu = std::tanh(up);
              ga[pp] += dx * (1.0 - ta * ta) * tu;
              du = dx * (1.0 + ta * (1.0 - tu * tu));
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Likelihood and prior primitives

Var normal_log_mass(Graph& g, Var v, Var mu, Var sigma) {
  const Tensor& vv = g.value(v);
  const Tensor& mv = g.value(mu);
  const Tensor& sv = g.value(sigma);
  if (vv.shape() != mv.shape() || vv.shape() != sv.shape()) {
    throw ad::ShapeError("normal log mass: operand shapes differ");
  }
  const std::size_t n = vv.size();
  auto partials = std::make_shared<std::vector<double>>(3 * n);
  Tensor out(vv.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const prob::LogMass lm = prob::normal_box_log_mass(vv[i], mv[i], sv[i]);
    out[i] = lm.value;
    (*partials)[3 * i] = lm.d_v;
    (*partials)[3 * i + 1] = lm.d_mu;
    (*partials)[3 * i + 2] = lm.d_sigma;
  }
  return g.custom("normal_log_mass", {v, mu, sigma}, std::move(out),
                  [v, mu, sigma, partials, n](Graph& g, const Tensor& gy) {
                    const Var vars[3] = {v, mu, sigma};
                    for (int k = 0; k < 3; ++k) {
                      if (!g.requires_grad(vars[k])) continue;
                      Tensor& gt = g.grad_ref(vars[k]);
                      for (std::size_t i = 0; i < n; ++i) gt[i] += gy[i] * (*partials)[3 * i + k];
                    }
                  });
}

Var laplace_nll(Graph& g, Var x, Var mean, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("laplace scale lambda must be positive");
  const double count = static_cast<double>(g.value(x).size());
  const Var l1 = g.sum(g.abs(g.sub(mean, x)));
  return g.add_scalar(g.scale(l1, lambda), -count * std::log(lambda / 2.0));
}

double frame_log_likelihood(const Tensor& x, const Tensor& mean, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("laplace scale lambda must be positive");
  if (x.shape() != mean.shape()) throw ad::ShapeError("frame likelihood: shape mismatch");
  const double log_norm = std::log(lambda / 2.0);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += log_norm - lambda * std::fabs(x[i] - mean[i]);
  return s;
}

// ---------------------------------------------------------------------------
// VideoModel

VideoModel::VideoModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto& ch = config_.conv_channels;
  const std::size_t feat = config_.feature_size();
  const bool global = has_global(config_.arch);

  auto make_convs = [&](const std::string& name) {
    ConvStack s;
    std::size_t in = config_.frame_c;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      s.layers.push_back(
          ad::Conv2d::create(store_, name + std::to_string(i), in, ch[i], 4, 2, 1, rng));
      in = ch[i];
    }
    return s;
  };

  local_convs_ = make_convs("enc_local.conv");
  local_fc1_ = ad::Dense::create(store_, "enc_local.fc1", feat, config_.mlp_hidden, rng);
  local_fc2_ = ad::Dense::create(store_, "enc_local.fc2", config_.mlp_hidden, config_.dim_z, rng);
  if (global) {
    global_convs_ = make_convs("enc_global.conv");
    global_rnn_ = ad::BiLstm::create(store_, "enc_global.rnn", feat, config_.hidden, rng);
    global_fc1_ = ad::Dense::create(store_, "enc_global.fc1", global_rnn_.output_size(),
                                    config_.mlp_hidden, rng);
    global_fc2_ =
        ad::Dense::create(store_, "enc_global.fc2", config_.mlp_hidden, config_.dim_f, rng);
  }
  dec_fc1_ = ad::Dense::create(store_, "dec.fc1", std::size_t{config_.dim_z} + config_.dim_f,
                               config_.mlp_hidden, rng);
  dec_fc2_ = ad::Dense::create(store_, "dec.fc2", config_.mlp_hidden, feat, rng);
  for (std::size_t i = ch.size(); i-- > 0;) {
    const std::size_t out = i == 0 ? config_.frame_c : ch[i - 1];
    dec_deconvs_.push_back(
        ad::Deconv2d::create(store_, "dec.deconv" + std::to_string(ch.size() - 1 - i), ch[i], out,
                             4, 2, 1, rng));
  }
  if (global) {
    prior_f_ = FactorizedDensity::create(store_, "prior_f", config_.dim_f, config_.flow_layers);
  }
  prior_z1_ = FactorizedDensity::create(store_, "prior_z1", config_.dim_z, config_.flow_layers);
  if (config_.arch == ArchVariant::KfpLg) {
    kf_fc1_ = ad::Dense::create(store_, "prior_kf.fc1", config_.dim_z, config_.dim_z, rng);
    kf_fc2_ = ad::Dense::create(store_, "prior_kf.fc2", config_.dim_z, config_.dim_z, rng);
    kf_fc3_ = ad::Dense::create(store_, "prior_kf.fc3", config_.dim_z, 2 * config_.dim_z, rng);
  } else {
    prior_lstm_ = ad::LstmCell::create(store_, "prior_lstm.cell", config_.dim_z, config_.hidden, rng);
    prior_lstm_out_ =
        ad::Dense::create(store_, "prior_lstm.out", config_.hidden, 2 * config_.dim_z, rng);
  }
}

Var VideoModel::ConvStack::operator()(Graph& g, Var x) const {
  for (const auto& layer : layers) x = g.leaky_relu(layer(g, x), kLeakySlope);
  return x;
}

Var VideoModel::encode_local(Graph& g, Var frames) const {
  const std::size_t t = g.value(frames).dim(0);
  Var feat = g.reshape(local_convs_(g, frames), Shape{t, config_.feature_size()});
  return local_fc2_(g, g.leaky_relu(local_fc1_(g, feat), kLeakySlope));
}

Var VideoModel::encode_global(Graph& g, Var frames) const {
  if (!has_global(config_.arch)) {
    throw std::logic_error("encode_global called on a local-only (LSTMP-L) model");
  }
  const std::size_t t = g.value(frames).dim(0);
  Var feat = g.reshape(global_convs_(g, frames), Shape{t, config_.feature_size()});
  std::vector<Var> seq;
  seq.reserve(t);
  for (std::size_t i = 0; i < t; ++i) seq.push_back(g.row(feat, i));
  const Var summary = global_rnn_(g, seq);
  return global_fc2_(g, g.leaky_relu(global_fc1_(g, summary), kLeakySlope));
}

Var VideoModel::decode(Graph& g, Var z, Var f) const {
  const Tensor& zv = g.value(z);
  if (zv.rank() != 2 || zv.dim(1) != config_.dim_z) {
    throw ad::ShapeError("decode: z must be [N," + std::to_string(config_.dim_z) + "], got " +
                         ad::shape_string(zv.shape()));
  }
  const std::size_t n = zv.dim(0);
  Var in = z;
  if (has_global(config_.arch)) {
    if (!f.valid() || g.value(f).rank() != 1 || g.value(f).size() != config_.dim_f) {
      throw ad::ShapeError("decode: f must be [" + std::to_string(config_.dim_f) + "]");
    }
    in = g.concat({z, g.tile_rows(f, n)});
  } else if (f.valid()) {
    throw ad::ShapeError("decode: local-only model takes no global latent");
  }
  Var h = g.leaky_relu(dec_fc1_(g, in), kLeakySlope);
  h = g.leaky_relu(dec_fc2_(g, h), kLeakySlope);
  const std::size_t side = config_.feature_side();
  h = g.reshape(h, Shape{n, config_.conv_channels.back(), side, side});
  for (std::size_t i = 0; i < dec_deconvs_.size(); ++i) {
    h = dec_deconvs_[i](g, h);
    h = i + 1 < dec_deconvs_.size() ? g.leaky_relu(h, kLeakySlope) : g.sigmoid(h);
  }
  return h;
}

std::pair<Var, Var> VideoModel::conditional_prior(Graph& g, Var z) const {
  const std::size_t t = g.value(z).dim(0), dz = config_.dim_z;
  Var raw;
  if (config_.arch == ArchVariant::KfpLg) {
    std::vector<Var> prev;
    for (std::size_t i = 0; i + 1 < t; ++i) prev.push_back(g.row(z, i));
    Var h = g.tanh(kf_fc1_(g, g.stack_rows(prev)));
    h = g.tanh(kf_fc2_(g, h));
    raw = kf_fc3_(g, h);
  } else {
    ad::LstmVars state = prior_lstm_.initial(g);
    std::vector<Var> hs;
    for (std::size_t i = 0; i + 1 < t; ++i) {
      state = prior_lstm_.step(g, g.row(z, i), state);
      hs.push_back(state.h);
    }
    raw = prior_lstm_out_(g, g.stack_rows(hs));
  }
  const Var mu = g.slice(raw, 0, dz);
  const Var sigma = g.add_scalar(g.softplus(g.slice(raw, dz, 2 * dz)), kSigmaFloor);
  return {mu, sigma};
}

SegmentTerms VideoModel::segment_terms(Graph& g, const Tensor& frames, const Tensor& noise_z,
                                       const Tensor& noise_f, double lambda) const {
  const std::size_t t = config_.frames, dz = config_.dim_z;
  const Shape want{t, config_.frame_c, config_.frame_h, config_.frame_w};
  if (frames.shape() != want) {
    throw ad::ShapeError("segment frames " + ad::shape_string(frames.shape()) + ", expected " +
                         ad::shape_string(want));
  }
  if (noise_z.shape() != Shape{t, dz}) throw ad::ShapeError("noise_z shape mismatch");
  SegmentTerms terms;
  const Var x = g.input(frames, "frames");
  terms.z_hat = encode_local(g, x);
  const Var z = g.add(terms.z_hat, g.input(noise_z, "noise_z"));
  Var f;
  if (has_global(config_.arch)) {
    if (noise_f.shape() != Shape{config_.dim_f}) throw ad::ShapeError("noise_f shape mismatch");
    terms.f_hat = encode_global(g, x);
    f = g.add(terms.f_hat, g.input(noise_f, "noise_f"));
    terms.rate_f =
        g.scale(g.sum(prior_f_.log_mass(g, g.reshape(f, Shape{1, config_.dim_f}))), -1.0);
  }
  terms.recon = decode(g, z, f);
  terms.distortion = laplace_nll(g, x, terms.recon, lambda);

  const Var rate_z1 = g.sum(prior_z1_.log_mass(g, g.reshape(g.row(z, 0), Shape{1, dz})));
  const auto [mu, sigma] = conditional_prior(g, z);
  std::vector<Var> rest;
  for (std::size_t i = 1; i < t; ++i) rest.push_back(g.row(z, i));
  const Var rate_rest = g.sum(normal_log_mass(g, g.stack_rows(rest), mu, sigma));
  terms.rate_z = g.scale(g.add(rate_z1, rate_rest), -1.0);
  return terms;
}

// ---- tensor-level ----------------------------------------------------------

Tensor VideoModel::encode_local(const Tensor& frame) const {
  const Shape want{config_.frame_c, config_.frame_h, config_.frame_w};
  if (frame.shape() != want) {
    throw ad::ShapeError("encode_local: frame " + ad::shape_string(frame.shape()) +
                         ", expected " + ad::shape_string(want));
  }
  Graph g(store_);
  Shape batched{1};
  batched.insert(batched.end(), want.begin(), want.end());
  const Var z = encode_local(g, g.input(frame.reshaped(batched), "frame"));
  return g.value(z).reshaped(Shape{config_.dim_z});
}

Tensor VideoModel::encode_local_all(const Tensor& frames) const {
  const Shape want{config_.frames, config_.frame_c, config_.frame_h, config_.frame_w};
  if (frames.shape() != want) throw ad::ShapeError("encode_local_all: shape mismatch");
  Graph g(store_);
  return g.value(encode_local(g, g.input(frames, "frames")));
}

Tensor VideoModel::encode_global(const Tensor& frames) const {
  const Shape want{config_.frames, config_.frame_c, config_.frame_h, config_.frame_w};
  if (frames.shape() != want) {
    throw ad::ShapeError("encode_global: frames " + ad::shape_string(frames.shape()) +
                         ", expected " + ad::shape_string(want));
  }
  Graph g(store_);
  return g.value(encode_global(g, g.input(frames, "frames")));
}

Tensor VideoModel::decode_all(const Tensor& z, const Tensor* f) const {
  Graph g(store_);
  const Var fv = f ? g.input(*f, "f") : Var{};
  return g.value(decode(g, g.input(z, "z"), fv));
}

Tensor VideoModel::decode_frame(const Tensor& z, const Tensor* f) const {
  if (z.rank() != 1 || z.size() != config_.dim_z) {
    throw ad::ShapeError("decode_frame: z must be [" + std::to_string(config_.dim_z) + "]");
  }
  return decode_all(z.reshaped(Shape{1, config_.dim_z}), f)
      .reshaped(Shape{config_.frame_c, config_.frame_h, config_.frame_w});
}

double VideoModel::factorized_cdf_f(std::size_t dim, double v) const {
  if (!has_global(config_.arch)) throw std::logic_error("local-only model has no f prior");
  return prior_f_.cdf(store_, dim, v);
}

double VideoModel::factorized_cdf_z1(std::size_t dim, double v) const {
  return prior_z1_.cdf(store_, dim, v);
}

PriorState VideoModel::initial_prior_state() const {
  return PriorState{ad::LstmState::zeros(config_.hidden)};
}

namespace {
PriorStep split_head(const Tensor& raw, std::size_t dz) {
  PriorStep s{Tensor(Shape{dz}), Tensor(Shape{dz})};
  for (std::size_t i = 0; i < dz; ++i) {
    s.mu[i] = raw[i];
    s.sigma[i] = prob::softplus(raw[dz + i]) + kSigmaFloor;
  }
  return s;
}
}  // namespace

std::pair<PriorState, PriorStep> VideoModel::lstm_prior_step(const PriorState& state,
                                                             const Tensor& z_prev) const {
  if (config_.arch == ArchVariant::KfpLg) throw std::logic_error("model has no LSTM prior");
  if (z_prev.size() != config_.dim_z) throw ad::ShapeError("lstm_prior_step: z dim mismatch");
  Graph g(store_);
  const ad::LstmVars next =
      prior_lstm_.step(g, g.input(z_prev.reshaped(Shape{config_.dim_z}), "z_prev"),
                       {g.input(state.lstm.h, "h"), g.input(state.lstm.c, "c")});
  const Var raw = prior_lstm_out_(g, next.h);
  PriorState out{ad::LstmState{g.value(next.h), g.value(next.c)}};
  return {std::move(out), split_head(g.value(raw), config_.dim_z)};
}

PriorStep VideoModel::kf_prior_step(const Tensor& z_prev) const {
  if (config_.arch != ArchVariant::KfpLg) throw std::logic_error("model has no one-step prior");
  if (z_prev.size() != config_.dim_z) throw ad::ShapeError("kf_prior_step: z dim mismatch");
  Graph g(store_);
  Var h = g.tanh(kf_fc1_(g, g.input(z_prev.reshaped(Shape{config_.dim_z}), "z_prev")));
  h = g.tanh(kf_fc2_(g, h));
  return split_head(g.value(kf_fc3_(g, h)), config_.dim_z);
}

std::pair<PriorState, PriorStep> VideoModel::prior_step(const PriorState& state,
                                                        const Tensor& z_prev) const {
  if (config_.arch == ArchVariant::KfpLg) return {state, kf_prior_step(z_prev)};
  return lstm_prior_step(state, z_prev);
}

}  // namespace dgvc::model
