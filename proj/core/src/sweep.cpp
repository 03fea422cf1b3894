#include "dgvc/sweep.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "dgvc/checkpoint.hpp"
#include "dgvc/codec.hpp"

namespace dgvc::train {

void write_rd_csv(std::ostream& out, const std::vector<RdPoint>& points) {
  out << kRdCsvHeader << '\n' << std::setprecision(17);
  for (const auto& p : points) {
    out << p.beta << ',' << p.bpp << ',' << p.psnr_db << ',' << p.ms_ssim << ','
        << p.rate_estimate_bpp << '\n';
  }
}

std::vector<RdPoint> read_rd_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRdCsvHeader) {
    throw std::runtime_error("rd csv: expected header '" + std::string(kRdCsvHeader) + "'");
  }
  std::vector<RdPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    RdPoint p;
    char c1, c2, c3, c4;
    if (!(ss >> p.beta >> c1 >> p.bpp >> c2 >> p.psnr_db >> c3 >> p.ms_ssim >> c4 >> p.rate_estimate_bpp) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw std::runtime_error("rd csv: malformed row '" + line + "'");
    }
    out.push_back(p);
  }
  return out;
}

std::uint32_t data_fingerprint(std::span<const ad::Tensor> segments) {
  std::uint32_t acc = 0;
  for (const auto& t : segments) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.ptr());
    const std::uint32_t c = crc32({p, t.size() * sizeof(double)});
    acc = crc32({reinterpret_cast<const std::uint8_t*>(&c), sizeof c}) ^ (acc * 31u);
  }
  return acc;
}

std::string run_key(const model::ModelConfig& c, const TrainHyper& h,
                    std::span<const ad::Tensor> segments) {
  std::ostringstream k;
  k << std::setprecision(17) << "arch=" << model::arch_name(c.arch) << " frame=" << c.frames << 'x'
    << c.frame_c << 'x' << c.frame_h << 'x' << c.frame_w << " z=" << c.dim_z << " f=" << c.dim_f
    << " hidden=" << c.hidden << " mlp=" << c.mlp_hidden << " conv=";
  for (auto ch : c.conv_channels) k << ch << '/';
  k << " L=" << c.alphabet_bound << " K=" << int{c.flow_layers} << " beta=" << h.beta
    << " lambda=" << h.lambda << " lr=" << h.lr << " b1=" << h.beta1 << " b2=" << h.beta2
    << " eps=" << h.eps << " batch=" << h.batch << " steps=" << h.steps << " seed=" << h.seed
    << " clip=" << h.clip_norm << " segments=" << segments.size() << " data=" << data_fingerprint(segments);
  return k.str();
}

model::VideoModel train_or_load(const model::ModelConfig& config, const TrainHyper& hyper,
                                std::span<const ad::Tensor> segments,
                                const std::filesystem::path& path, std::ostream* log) {
  const std::string key = run_key(config, hyper, segments);
  auto key_path = path;
  key_path += ".key";
  if (std::filesystem::exists(path) && std::filesystem::exists(key_path)) {
    std::ifstream in(key_path);
    std::string stored;
    std::getline(in, stored);
    if (stored == key) return load_checkpoint(path);
  }
  std::filesystem::remove(key_path);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  model::VideoModel m(config, hyper.seed);
  train(m, segments, hyper, TrainOptions{path, log});
  std::ofstream(key_path) << key << '\n';
  return m;
}

std::vector<RdPoint> rd_sweep(const model::ModelConfig& config, const TrainHyper& base,
                              std::span<const ad::Tensor> train_segments,
                              std::span<const data::VideoSegment> test,
                              std::span<const double> betas, const SweepOptions& options) {
  if (betas.size() < 2) throw std::invalid_argument("rd_sweep needs at least two beta values");
  std::vector<RdPoint> points;
  for (double beta : betas) {
    TrainHyper h = base;
    h.beta = beta;
    std::ostringstream name;
    name << "model_" << model::arch_name(config.arch) << "_beta" << beta;
    const auto ckpt = options.work_dir / (name.str() + ".ckpt");
    std::ofstream log(options.work_dir / (name.str() + ".log.jsonl"), std::ios::app);
    if (options.progress) *options.progress << "beta " << beta << ": training / loading " << ckpt << '\n';
    const model::VideoModel m = train_or_load(config, h, train_segments, ckpt, &log);
    const codec::Codec codec(m);
    const auto ev = codec::evaluate(codec, test);
    points.push_back({beta, ev.mean.bpp, ev.mean.psnr_db, ev.mean.ms_ssim, ev.mean.rate_estimate_bpp});
    if (options.progress) {
      *options.progress << "beta " << beta << ": bpp " << ev.mean.bpp << " psnr " << ev.mean.psnr_db
                        << " ms-ssim " << ev.mean.ms_ssim << '\n';
    }
  }
  return points;
}

}  // namespace dgvc::train
