#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "dgvc/model.hpp"

namespace dgvc::train {

using model::VideoModel;
using ad::Tensor;

struct TrainHyper {
  double beta = 0.1;
  double lambda = 1.0;  // Laplace scale
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 8;
  std::size_t steps = 5000;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
  std::size_t log_every = 50;
  std::size_t checkpoint_every = 500;

  void validate() const;
};

// Per-segment means, all in nats.
struct LossTerms {
  double loss = 0.0;
  double distortion = 0.0;
  double rate_f = 0.0;
  double rate_z = 0.0;
  double rate() const { return rate_f + rate_z; }
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// loss = distortion + beta * (rate_f + rate_z) with box-posterior noise drawn
// from rng, averaged over the batch. Frames are [T, C, H, W] in [0, 1].
// When backprop is set, gradients of the mean loss are added to the model's
// parameter gradients (segments processed in order).
LossTerms elbo_loss(VideoModel& model, std::span<const Tensor> batch, const TrainHyper& hyper,
                    std::mt19937_64& rng, bool backprop);

struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;
};

AdamState adam_init(const ad::ParamStore& store);
// One bias-corrected Adam update from the gradients currently in the store.
void adam_step(ad::ParamStore& store, AdamState& state, const TrainHyper& hyper);

// Scales the gradients down to max_norm when their global norm exceeds it;
// returns the norm before clipping.
double clip_gradients(ad::ParamStore& store, double max_norm);

struct TrainOptions {
  std::filesystem::path checkpoint;  // written periodically and at the end
  std::ostream* log = nullptr;       // JSON lines
};

struct TrainResult {
  std::size_t steps = 0;
  LossTerms first;  // mean over the first logging window
  LossTerms last;   // mean over the last logging window
  std::vector<double> losses;  // per step
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fixed-budget Adam training on random minibatches of `segments`. On a
// non-finite loss the last good parameters are written to the checkpoint and
// TrainingDiverged is thrown.
TrainResult train(VideoModel& model, std::span<const Tensor> segments, const TrainHyper& hyper,
                  const TrainOptions& options);

// Cross-entropy of the segment's latents in bits per pixel from nats.
double nats_to_bpp(double nats, const model::ModelConfig& config);

}  // namespace dgvc::train
