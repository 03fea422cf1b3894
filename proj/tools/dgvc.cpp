// dgvc: train, run and evaluate the sequential-VAE video codec.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "dgvc/checkpoint.hpp"
#include "dgvc/codec.hpp"
#include "dgvc/data.hpp"
#include "dgvc/sweep.hpp"
#include "dgvc/train.hpp"
#include "run_config.hpp"

namespace {

using namespace dgvc;
using nlohmann::json;

struct Flags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::string> checkpoint, input, output, manifest, split, log, work_dir, data_dir, arch;
  std::optional<double> beta;
  std::optional<std::size_t> steps, limit, batch;
  std::optional<std::uint64_t> seed;
  std::vector<double> betas;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("-c,--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.overrides, "Override a config key: section.key=value")->take_all();
  cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint path (paths.checkpoint)");
  cmd->add_option("-i,--input", f.input, "Input file (paths.input)");
  cmd->add_option("-o,--output", f.output, "Output file (paths.output)");
  cmd->add_option("--manifest", f.manifest, "Dataset manifest (data.manifest)");
  cmd->add_option("--split", f.split, "Dataset split (data.split)");
  cmd->add_option("--limit", f.limit, "Use at most this many segments, 0 = all (data.limit)");
  cmd->add_option("--data-dir", f.data_dir, "Dataset directory (data.dir)");
  cmd->add_option("--log", f.log, "Training log, JSON lines (paths.log)");
  cmd->add_option("--work-dir", f.work_dir, "Sweep working directory (paths.work_dir)");
  cmd->add_option("--arch", f.arch, "LSTMP-LG, KFP-LG or LSTMP-L (model.arch)");
  cmd->add_option("--beta", f.beta, "Rate weight (train.beta)");
  cmd->add_option("--betas", f.betas, "Sweep betas (sweep.betas)")->delimiter(',');
  cmd->add_option("--steps", f.steps, "Training steps (train.steps)");
  cmd->add_option("--batch", f.batch, "Segments per step (train.batch)");
  cmd->add_option("--seed", f.seed, "Training seed (train.seed)");
}

json resolve(const Flags& f) {
  json cfg = f.config.empty() ? cli::default_config() : cli::load_config(f.config);
  for (const auto& o : f.overrides) cli::apply_override(cfg, o);
  auto set = [&](const char* key, const auto& opt) {
    if (opt) cli::set_value(cfg, key, *opt);
  };
  set("paths.checkpoint", f.checkpoint);
  set("paths.input", f.input);
  set("paths.output", f.output);
  set("paths.log", f.log);
  set("paths.work_dir", f.work_dir);
  set("data.manifest", f.manifest);
  set("data.split", f.split);
  set("data.limit", f.limit);
  set("data.dir", f.data_dir);
  set("model.arch", f.arch);
  set("train.beta", f.beta);
  set("train.steps", f.steps);
  set("train.batch", f.batch);
  set("train.seed", f.seed);
  if (!f.betas.empty()) cli::set_value(cfg, "sweep.betas", f.betas);
  return cfg;
}

std::string require_path(const json& cfg, const std::string& key, const char* flag) {
  const std::string p = cli::path_value(cfg, key);
  if (p.empty()) throw std::invalid_argument(std::string("missing ") + flag + " (paths." + key + ")");
  return p;
}

std::vector<data::VideoSegment> load_segments(const json& cfg, const std::string& split) {
  return data::load_split(cli::path_value(cfg, "manifest"), split,
                          cfg.at("data").at("limit").get<std::size_t>());
}

// Writes to the configured output file, or stdout when it is empty.
template <typename F>
void with_output(const json& cfg, F&& write) {
  const std::string out = cli::path_value(cfg, "output");
  if (out.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream file(out, std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write " + out);
  write(file);
}

int cmd_gen_data(const json& cfg) {
  const auto manifest = data::generate_dataset(cli::path_value(cfg, "dir"), cli::dataset_spec(cfg));
  std::cout << manifest.string() << '\n';
  return 0;
}

int cmd_train(const json& cfg) {
  const auto config = cli::model_config(cfg);
  const auto hyper = cli::train_hyper(cfg);
  const auto segments = load_segments(cfg, "train");
  std::vector<ad::Tensor> tensors;
  for (const auto& s : segments) tensors.push_back(s.to_tensor());
  model::VideoModel model(config, hyper.seed);
  const std::string log_path = cli::path_value(cfg, "log");
  std::ofstream log_file;
  if (!log_path.empty()) log_file.open(log_path, std::ios::trunc);
  const std::string ckpt = require_path(cfg, "checkpoint", "--checkpoint");
  std::cerr << "training " << model::arch_name(config.arch) << " (" << model.params().scalar_count()
            << " parameters) on " << tensors.size() << " segments, beta " << hyper.beta << '\n';
  const auto result = train::train(model, tensors, hyper,
                                   {ckpt, log_path.empty() ? &std::cout : &log_file});
  std::cerr << "done: " << result.steps << " steps, loss " << result.first.loss << " -> "
            << result.last.loss << ", model hash " << model_hash(model) << '\n';
  return 0;
}

int cmd_compress(const json& cfg) {
  const auto model = load_checkpoint(require_path(cfg, "checkpoint", "--checkpoint"));
  const codec::Codec codec(model);
  const auto video = data::load_raw(require_path(cfg, "input", "--input"));
  const auto res = codec.compress(video);
  data::write_file(require_path(cfg, "output", "--output"), res.bytes);
  const auto& r = res.report;
  std::cerr << std::fixed << std::setprecision(4) << "bytes " << r.bytes << "  bpp " << r.bpp
            << "  estimate " << r.rate_estimate_bpp << " bpp  psnr " << r.psnr_db << " dB  ms-ssim "
            << r.ms_ssim << "\nbits: header " << r.bits_header << "  f " << r.bits_f << "  z";
  for (double b : r.bits_z) std::cerr << ' ' << b;
  std::cerr << "  flush " << r.bits_flush << '\n';
  return 0;
}

int cmd_decompress(const json& cfg) {
  const auto model = load_checkpoint(require_path(cfg, "checkpoint", "--checkpoint"));
  const codec::Codec codec(model);
  const auto bytes = data::read_file(require_path(cfg, "input", "--input"));
  const auto res = codec.decompress(bytes);
  data::save_raw(require_path(cfg, "output", "--output"), res.video);
  return 0;
}

int cmd_evaluate(const json& cfg) {
  const auto model = load_checkpoint(require_path(cfg, "checkpoint", "--checkpoint"));
  const codec::Codec codec(model);
  const auto segments = load_segments(cfg, cli::path_value(cfg, "split"));
  const auto ev = codec::evaluate(codec, segments);
  with_output(cfg, [&](std::ostream& out) { codec::write_evaluation_csv(out, ev); });
  std::cerr << std::fixed << std::setprecision(4) << segments.size() << " segments: bpp " << ev.mean.bpp
            << "  estimate " << ev.mean.rate_estimate_bpp << "  psnr " << ev.mean.psnr_db
            << " dB  ms-ssim " << ev.mean.ms_ssim << '\n';
  return 0;
}

int cmd_rd_sweep(const json& cfg) {
  const auto config = cli::model_config(cfg);
  const auto hyper = cli::train_hyper(cfg);
  const auto betas = cli::sweep_betas(cfg);
  const auto train_set = load_segments(cfg, "train");
  std::vector<ad::Tensor> tensors;
  for (const auto& s : train_set) tensors.push_back(s.to_tensor());
  const auto test = load_segments(cfg, cli::path_value(cfg, "split"));
  const std::filesystem::path work = require_path(cfg, "work_dir", "--work-dir");
  std::filesystem::create_directories(work);
  const auto points = train::rd_sweep(config, hyper, tensors, test, betas, {work, &std::cerr});
  with_output(cfg, [&](std::ostream& out) { train::write_rd_csv(out, points); });
  return 0;
}

int cmd_latent_stats(const json& cfg) {
  const auto model = load_checkpoint(require_path(cfg, "checkpoint", "--checkpoint"));
  const auto segments = load_segments(cfg, cli::path_value(cfg, "split"));
  const auto stats = codec::latent_stats(model, segments);
  with_output(cfg, [&](std::ostream& out) {
    codec::write_latent_stats_csv(out, stats, model.config().alphabet_bound);
  });
  double tv_f = 0.0, tv_z = 0.0;
  std::size_t nf = 0, nz = 0;
  for (const auto& h : stats) {
    (h.latent == 'f' ? tv_f : tv_z) += h.total_variation();
    ++(h.latent == 'f' ? nf : nz);
  }
  std::cerr << "mean total variation: f " << (nf ? tv_f / nf : 0.0) << "  z1 " << (nz ? tv_z / nz : 0.0)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential-VAE neural video codec"};
  app.require_subcommand(1);
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const json&);
  };
  const Command commands[] = {
      {"gen-data", "Generate the synthetic sprite dataset and its manifest", cmd_gen_data},
      {"train", "Train a model on the train split", cmd_train},
      {"compress", "Compress a DGVC-RAW segment into a bitstream", cmd_compress},
      {"decompress", "Decode a bitstream into a DGVC-RAW segment", cmd_decompress},
      {"evaluate", "Compress and decompress a split; per-segment CSV", cmd_evaluate},
      {"rd-sweep", "Train one model per beta and evaluate each", cmd_rd_sweep},
      {"latent-stats", "Histogram of quantized latents against the stationary priors", cmd_latent_stats},
  };
  Flags flags;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, flags);
    subs.emplace_back(sub, &c);
  }
  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) return cmd->run(resolve(flags));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
