#include "dgvc/train.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "dgvc/checkpoint.hpp"
#include "dgvc/coding.hpp"

namespace dgvc::train {

using ad::Graph;
using ad::Shape;
using ad::Var;

void TrainHyper::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (!(beta >= 0.0)) bad("beta must be >= 0");
  if (!(lambda > 0.0)) bad("lambda must be > 0");
  if (!(lr > 0.0)) bad("lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("Adam betas must be in [0, 1)");
  if (!(eps > 0.0)) bad("eps must be > 0");
  if (batch == 0) bad("batch must be positive");
}

namespace {

Tensor uniform_noise(Shape shape, std::mt19937_64& rng) {
  Tensor zeros(std::move(shape));
  const auto noisy = coding::inject_noise(zeros.data(), rng);
  return Tensor(zeros.shape(), noisy);
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NonFiniteLoss(std::string("non-finite ") + term + " term in loss");
}

}  // namespace

LossTerms elbo_loss(VideoModel& model, std::span<const Tensor> batch, const TrainHyper& hyper,
                    std::mt19937_64& rng, bool backprop) {
  if (batch.empty()) throw std::invalid_argument("elbo_loss: empty batch");
  const auto& cfg = model.config();
  const double n = static_cast<double>(batch.size());
  LossTerms mean;
  for (const Tensor& frames : batch) {
    // Noise is drawn z first, then f, so runs are reproducible per seed.
    const Tensor noise_z = uniform_noise(Shape{cfg.frames, cfg.dim_z}, rng);
    const Tensor noise_f =
        model::has_global(cfg.arch) ? uniform_noise(Shape{cfg.dim_f}, rng) : Tensor();
    Graph g = backprop ? Graph(&model.params()) : Graph(std::as_const(model.params()));
    const auto terms = model.segment_terms(g, frames, noise_z, noise_f, hyper.lambda);
    const double d = g.value(terms.distortion).item();
    const double rf = terms.rate_f.valid() ? g.value(terms.rate_f).item() : 0.0;
    const double rz = g.value(terms.rate_z).item();
    check_finite(d, "distortion");
    check_finite(rf, "rate_f");
    check_finite(rz, "rate_z");
    mean.distortion += d / n;
    mean.rate_f += rf / n;
    mean.rate_z += rz / n;
    if (backprop) {
      Var rate = terms.rate_z;
      if (terms.rate_f.valid()) rate = g.add(terms.rate_f, rate);
      const Var loss = g.scale(g.add(terms.distortion, g.scale(rate, hyper.beta)), 1.0 / n);
      g.backward(loss);
    }
  }
  mean.loss = mean.distortion + hyper.beta * (mean.rate_f + mean.rate_z);
  check_finite(mean.loss, "total");
  return mean;
}

AdamState adam_init(const ad::ParamStore& store) {
  AdamState s;
  for (const auto& p : store.all()) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

void adam_step(ad::ParamStore& store, AdamState& state, const TrainHyper& hyper) {
  if (state.m.size() != store.size()) throw std::invalid_argument("adam state does not match store");
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  auto& params = store.all();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value.data();
    const auto grad = std::as_const(params[i].grad).data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    if (grad.size() != value.size()) throw std::invalid_argument("gradient shape mismatch");
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * grad[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * grad[j] * grad[j];
      value[j] -= hyper.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + hyper.eps);
    }
  }
}

double clip_gradients(ad::ParamStore& store, double max_norm) {
  const double norm = store.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) store.scale_grad(max_norm / norm);
  return norm;
}

double nats_to_bpp(double nats, const model::ModelConfig& config) {
  return nats / std::log(2.0) / (static_cast<double>(config.frames) * config.pixels_per_frame());
}

TrainResult train(VideoModel& model, std::span<const Tensor> segments, const TrainHyper& hyper,
                  const TrainOptions& options) {
  hyper.validate();
  if (segments.empty()) throw std::invalid_argument("train: empty dataset");
  std::mt19937_64 rng(hyper.seed);
  std::uniform_int_distribution<std::size_t> pick(0, segments.size() - 1);
  AdamState adam = adam_init(model.params());
  TrainResult result;
  LossTerms window;
  std::size_t window_n = 0;
  bool logged_once = false;
  std::vector<Tensor> batch(hyper.batch);

  auto write_checkpoint = [&] {
    if (!options.checkpoint.empty()) save_checkpoint(options.checkpoint, model);
  };

  for (std::size_t step = 1; step <= hyper.steps; ++step) {
    for (auto& b : batch) b = segments[pick(rng)];
    model.params().zero_grad();
    LossTerms terms;
    double norm = 0.0;
    try {
      terms = elbo_loss(model, batch, hyper, rng, true);
      norm = clip_gradients(model.params(), hyper.clip_norm);
      if (!std::isfinite(norm)) throw NonFiniteLoss("non-finite gradient norm");
    } catch (const NonFiniteLoss& e) {
      // Parameters have not been touched this step: they are the last good ones.
      write_checkpoint();
      throw TrainingDiverged("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    adam_step(model.params(), adam, hyper);
    result.losses.push_back(terms.loss);
    result.steps = step;

    window.loss += terms.loss;
    window.distortion += terms.distortion;
    window.rate_f += terms.rate_f;
    window.rate_z += terms.rate_z;
    ++window_n;
    const bool log_now = hyper.log_every != 0 && (step % hyper.log_every == 0 || step == hyper.steps);
    if (log_now) {
      const double k = static_cast<double>(window_n);
      const LossTerms avg{window.loss / k, window.distortion / k, window.rate_f / k, window.rate_z / k};
      if (!logged_once) result.first = avg;
      logged_once = true;
      result.last = avg;
      if (options.log) {
        *options.log << "{\"step\":" << step << ",\"loss\":" << avg.loss << ",\"distortion\":"
                     << avg.distortion << ",\"rate_f\":" << avg.rate_f << ",\"rate_z\":" << avg.rate_z
                     << ",\"rate_bpp\":" << nats_to_bpp(avg.rate(), model.config())
                     << ",\"grad_norm\":" << norm << "}\n";
        options.log->flush();
      }
      window = {};
      window_n = 0;
    }
    if (hyper.checkpoint_every != 0 && step % hyper.checkpoint_every == 0) write_checkpoint();
  }
  write_checkpoint();
  return result;
}

}  // namespace dgvc::train
