#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dgvc/data.hpp"
#include "dgvc/model.hpp"
#include "dgvc/train.hpp"

namespace dgvc::train {

struct RdPoint {
  double beta = 0.0;
  double bpp = 0.0;
  double psnr_db = 0.0;
  double ms_ssim = 0.0;
  double rate_estimate_bpp = 0.0;
  bool operator==(const RdPoint&) const = default;
};

inline constexpr const char* kRdCsvHeader = "beta,bpp,psnr_db,ms_ssim,rate_estimate_bpp";
void write_rd_csv(std::ostream& out, const std::vector<RdPoint>& points);
std::vector<RdPoint> read_rd_csv(std::istream& in);

// Order-sensitive checksum of the training tensors.
std::uint32_t data_fingerprint(std::span<const ad::Tensor> segments);

// Text key identifying a training run: config, hyperparameters and data.
std::string run_key(const model::ModelConfig& config, const TrainHyper& hyper,
                    std::span<const ad::Tensor> segments);

// Loads `path` when its sidecar key (path + ".key") matches this run,
// otherwise trains from scratch with the seed in `hyper` and saves both.
model::VideoModel train_or_load(const model::ModelConfig& config, const TrainHyper& hyper,
                                std::span<const ad::Tensor> segments,
                                const std::filesystem::path& path, std::ostream* log);

struct SweepOptions {
  std::filesystem::path work_dir;  // checkpoints and logs
  std::ostream* progress = nullptr;
};

// One model per beta, each evaluated with real compression on `test`.
std::vector<RdPoint> rd_sweep(const model::ModelConfig& config, const TrainHyper& base,
                              std::span<const ad::Tensor> train_segments,
                              std::span<const data::VideoSegment> test,
                              std::span<const double> betas, const SweepOptions& options);

}  // namespace dgvc::train
