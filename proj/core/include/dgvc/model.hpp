#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dgvc/graph.hpp"
#include "dgvc/layers.hpp"
#include "dgvc/params.hpp"
#include "dgvc/tensor.hpp"

namespace dgvc::model {

using ad::Graph;
using ad::ParamStore;
using ad::Tensor;
using ad::Var;

enum class ArchVariant : std::uint8_t {
  LstmpLg = 0,  // global + local latents, LSTM conditional prior
  KfpLg = 1,    // global + local latents, one-step (Kalman-style) MLP prior
  LstmpL = 2,   // local latents only, LSTM conditional prior
};

std::string_view arch_name(ArchVariant arch);
ArchVariant parse_arch(std::string_view name);
bool has_global(ArchVariant arch);

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kLeakySlope = 0.2;

struct ModelConfig {
  std::uint16_t frame_h = 32;
  std::uint16_t frame_w = 32;
  std::uint16_t frame_c = 3;
  std::uint16_t frames = 10;  // T
  std::uint16_t dim_z = 16;
  std::uint16_t dim_f = 64;
  std::uint16_t hidden = 128;      // prior LSTM and inference bi-LSTM
  std::uint16_t mlp_hidden = 256;  // encoder / decoder MLPs
  ArchVariant arch = ArchVariant::LstmpLg;
  std::vector<std::uint16_t> conv_channels{32, 64, 128, 128};
  std::uint16_t alphabet_bound = 64;  // L: integer latents live in [-L, L]
  std::uint8_t flow_layers = 4;       // K of the factorized density

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  std::size_t pixels_per_frame() const { return std::size_t{frame_h} * frame_w; }
  std::size_t values_per_frame() const { return pixels_per_frame() * frame_c; }
  std::size_t feature_side() const { return frame_h >> conv_channels.size(); }
  std::size_t feature_size() const;
  std::size_t alphabet_size() const { return 2 * std::size_t{alphabet_bound} + 1; }

  bool operator==(const ModelConfig&) const = default;
};

// Normal density parameters for one conditional prior step.
struct PriorStep {
  Tensor mu;
  Tensor sigma;
};

// Per-dimension monotone flow whose cumulative is
//   c(x) = sigmoid(l_K(g_{K-1}(l_{K-1}(... g_1(l_1(x)))))),
//   l_k(x) = softplus(h_k) x + b_k,  g_k(x) = x + tanh(a_k) tanh(x).
class FactorizedDensity {
 public:
  FactorizedDensity() = default;
  // Initialized so that c(x) == sigmoid(x).
  static FactorizedDensity create(ParamStore& store, const std::string& name, std::size_t dims,
                                  std::size_t layers);

  std::size_t dims() const { return dims_; }
  std::size_t layers() const { return layers_; }

  double logit(const ParamStore& store, std::size_t dim, double x) const;
  double cdf(const ParamStore& store, std::size_t dim, double x) const;

  // Elementwise log(c(v + 1/2) - c(v - 1/2)) for values [N, dims]; fused
  // primitive with gradients to the values and the density parameters.
  Var log_mass(Graph& g, Var values) const;

 private:
  ad::ParamId scale_, bias_, mix_;
  std::size_t dims_ = 0, layers_ = 0;
};

// Elementwise log mass of unit boxes centered at v under N(mu, sigma).
Var normal_log_mass(Graph& g, Var v, Var mu, Var sigma);

// Negative Laplace log-likelihood summed over all elements:
//   sum |x - mean| * lambda - log(lambda / 2).
Var laplace_nll(Graph& g, Var x, Var mean, double lambda);

// Plain evaluation of sum_i [log(lambda/2) - lambda |x_i - mean_i|].
double frame_log_likelihood(const Tensor& x, const Tensor& mean, double lambda);

// Recurrent state carried by the LSTM prior during coding.
struct PriorState {
  ad::LstmState lstm;
};

struct SegmentTerms {
  Var distortion;  // nats, -log p(x | f, z)
  Var rate_f;      // nats, -log p(f)   (absent for local-only models)
  Var rate_z;      // nats, -log p(z_{1:T})
  Var z_hat;       // [T, dim_z] encoder means
  Var f_hat;       // [dim_f] encoder means (absent for local-only models)
  Var recon;       // [T, C, H, W]
};

class VideoModel {
 public:
  VideoModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const FactorizedDensity& prior_f() const { return prior_f_; }
  const FactorizedDensity& prior_z1() const { return prior_z1_; }

  // ---- graph builders -------------------------------------------------
  // frames: [T, C, H, W] in [0, 1]
  Var encode_local(Graph& g, Var frames) const;   // -> [T, dim_z]
  Var encode_global(Graph& g, Var frames) const;  // -> [dim_f]
  // z: [N, dim_z]; f: [dim_f] or invalid Var for local-only models.
  Var decode(Graph& g, Var z, Var f) const;  // -> [N, C, H, W]
  // Conditional prior for rows 2..T of z ([T, dim_z]): {mu, sigma}, each
  // [T-1, dim_z].
  std::pair<Var, Var> conditional_prior(Graph& g, Var z) const;

  // Distortion and rate terms of one segment with box-posterior noise.
  // noise_z is [T, dim_z], noise_f is [dim_f] (ignored for local-only).
  SegmentTerms segment_terms(Graph& g, const Tensor& frames, const Tensor& noise_z,
                             const Tensor& noise_f, double lambda) const;

  // ---- tensor-level operations ---------------------------------------
  Tensor encode_local(const Tensor& frame) const;    // [C,H,W] -> [dim_z]
  Tensor encode_local_all(const Tensor& frames) const;  // [T,C,H,W] -> [T,dim_z]
  Tensor encode_global(const Tensor& frames) const;  // [T,C,H,W] -> [dim_f]
  Tensor decode_frame(const Tensor& z, const Tensor* f) const;  // -> [C,H,W]
  Tensor decode_all(const Tensor& z, const Tensor* f) const;    // [T,dim_z] -> [T,C,H,W]

  double factorized_cdf_f(std::size_t dim, double v) const;
  double factorized_cdf_z1(std::size_t dim, double v) const;

  PriorState initial_prior_state() const;
  // LSTM prior: consume z_{t-1}, return the state and the prior for z_t.
  std::pair<PriorState, PriorStep> lstm_prior_step(const PriorState& state,
                                                   const Tensor& z_prev) const;
  // One-step prior: depends on z_{t-1} only.
  PriorStep kf_prior_step(const Tensor& z_prev) const;
  // Dispatches on the configured variant.
  std::pair<PriorState, PriorStep> prior_step(const PriorState& state,
                                              const Tensor& z_prev) const;

 private:
  struct ConvStack {
    std::vector<ad::Conv2d> layers;
    Var operator()(Graph& g, Var x) const;
  };

  ModelConfig config_;
  ParamStore store_;
  ConvStack local_convs_;
  ad::Dense local_fc1_, local_fc2_;
  ConvStack global_convs_;
  ad::BiLstm global_rnn_;
  ad::Dense global_fc1_, global_fc2_;
  ad::Dense dec_fc1_, dec_fc2_;
  std::vector<ad::Deconv2d> dec_deconvs_;
  FactorizedDensity prior_f_, prior_z1_;
  ad::LstmCell prior_lstm_;
  ad::Dense prior_lstm_out_;
  ad::Dense kf_fc1_, kf_fc2_, kf_fc3_;
};

}  // namespace dgvc::model
