#include <benchmark/benchmark.h>

#include <random>

#include "dgvc/codec.hpp"
#include "dgvc/coding.hpp"
#include "dgvc/data.hpp"
#include "dgvc/layers.hpp"
#include "dgvc/train.hpp"

using namespace dgvc;

namespace {

std::vector<std::uint32_t> draw(std::size_t n, const std::vector<double>& pmf) {
  std::mt19937_64 rng(1);
  std::discrete_distribution<std::uint32_t> d(pmf.begin(), pmf.end());
  std::vector<std::uint32_t> s(n);
  for (auto& x : s) x = d(rng);
  return s;
}

std::vector<double> geometric_pmf(std::size_t alphabet) {
  std::vector<double> p(alphabet);
  double total = 0.0;
  for (std::size_t i = 0; i < alphabet; ++i) total += p[i] = std::pow(0.8, static_cast<double>(i));
  for (double& x : p) x /= total;
  return p;
}

void BM_RangeEncode(benchmark::State& state) {
  const auto pmf = geometric_pmf(static_cast<std::size_t>(state.range(0)));
  const auto table = coding::build_cdf_table(pmf);
  const coding::TableProvider provider = [&](std::span<const std::uint32_t>) { return table; };
  const auto symbols = draw(1 << 16, pmf);
  for (auto _ : state) benchmark::DoNotOptimize(coding::ac_encode(symbols, provider));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(symbols.size()));
}
BENCHMARK(BM_RangeEncode)->Arg(2)->Arg(129);

void BM_RangeDecode(benchmark::State& state) {
  const auto pmf = geometric_pmf(static_cast<std::size_t>(state.range(0)));
  const auto table = coding::build_cdf_table(pmf);
  const coding::TableProvider provider = [&](std::span<const std::uint32_t>) { return table; };
  const auto symbols = draw(1 << 16, pmf);
  const auto bytes = coding::ac_encode(symbols, provider);
  for (auto _ : state) benchmark::DoNotOptimize(coding::ac_decode(bytes, symbols.size(), provider));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(symbols.size()));
}
BENCHMARK(BM_RangeDecode)->Arg(2)->Arg(129);

void BM_BuildCdfTable(benchmark::State& state) {
  const auto pmf = geometric_pmf(129);
  for (auto _ : state) benchmark::DoNotOptimize(coding::build_cdf_table(pmf));
}
BENCHMARK(BM_BuildCdfTable);

// First encoder convolution of the default model on one 32x32 frame batch.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  ad::ParamStore store;
  const auto conv = ad::Conv2d::create(store, "c", 3, 16, 4, 2, 1, rng);
  ad::Tensor x(ad::Shape{10, 3, 32, 32});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : x.data()) v = u(rng);
  for (auto _ : state) {
    ad::Graph g(&store);
    const auto y = conv(g, g.input(x));
    const auto loss = g.sum(y);
    g.backward(loss);
    benchmark::DoNotOptimize(g.value(loss).item());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Unit(benchmark::kMillisecond);

model::ModelConfig bench_config(model::ArchVariant arch) {
  model::ModelConfig c;
  c.conv_channels = {16, 32, 64, 64};
  c.hidden = 64;
  c.mlp_hidden = 128;
  c.arch = arch;
  if (arch == model::ArchVariant::LstmpL) c.dim_f = 0;
  return c;
}

std::vector<data::VideoSegment> clips(std::size_t n) {
  std::vector<data::VideoSegment> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(data::gen_sprite_video(data::SpriteSceneSpec::random(i + 1, 32, 32), 10, 32, 32));
  }
  return out;
}

// One training step (loss, gradients, Adam) at batch 4.
void BM_ElboStep(benchmark::State& state) {
  const auto arch = static_cast<model::ArchVariant>(state.range(0));
  model::VideoModel m(bench_config(arch), 1);
  std::vector<ad::Tensor> batch;
  for (const auto& c : clips(4)) batch.push_back(c.to_tensor());
  train::TrainHyper h;
  auto adam = train::adam_init(m.params());
  std::mt19937_64 rng(3);
  for (auto _ : state) {
    m.params().zero_grad();
    benchmark::DoNotOptimize(train::elbo_loss(m, batch, h, rng, true).loss);
    train::clip_gradients(m.params(), h.clip_norm);
    train::adam_step(m.params(), adam, h);
  }
  state.SetLabel(std::string(model::arch_name(arch)));
}
BENCHMARK(BM_ElboStep)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_Compress(benchmark::State& state) {
  const model::VideoModel m(bench_config(model::ArchVariant::LstmpLg), 1);
  const codec::Codec codec(m);
  const auto video = clips(1).front();
  for (auto _ : state) benchmark::DoNotOptimize(codec.compress(video).bytes);
}
BENCHMARK(BM_Compress)->Unit(benchmark::kMillisecond);

void BM_Decompress(benchmark::State& state) {
  const model::VideoModel m(bench_config(model::ArchVariant::LstmpLg), 1);
  const codec::Codec codec(m);
  const auto bytes = codec.compress(clips(1).front()).bytes;
  for (auto _ : state) benchmark::DoNotOptimize(codec.decompress(bytes).video.pixels);
}
BENCHMARK(BM_Decompress)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
