#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emsift/cwt.hpp"
#include "emsift/matrix.hpp"

namespace emsift {

struct FeatureExtractorConfig {
  int input_h = 224;
  int input_w = 224;
  int n_stages = 3;
  // One entry per stage; the last entry equals feature_dim.
  std::vector<int> filters_per_stage = {8, 32, 512};
  int feature_dim = 512;
  int kernel_size = 3;  // odd, so zero padding preserves the spatial size
  int pool_stride = 2;
  std::uint64_t weight_seed = 0x5eed;
};

void validate_extractor_config(const FeatureExtractorConfig& cfg);

struct FeatureVector {
  std::vector<double> values;
  std::string trace_id;
};

// Bilinear interpolation with corner alignment: same-size output reproduces
// the input exactly.
Matrix bilinear_resize(const Matrix& m, int out_h, int out_w);

// Mean of all entries of one channel map.
double global_average_pool(const Matrix& m);

// Bilinear resize to (H, W), then log1p compression, then per-image min-max
// to [0,1]. A constant image maps to all zeros.
Matrix resize_scalogram(const Scalogram& s, int out_h, int out_w);

// Fixed seeded random convolutional filter bank standing in for a pretrained
// backbone: n_stages of {conv(k, stride 1, zero pad same) -> ReLU ->
// average-pool(pool_stride)}, then global average pooling per channel.
// Weights are drawn once from weight_seed (zero biases, fan-in scaled
// gaussians); extraction is deterministic and never trains.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureExtractorConfig& cfg);

  FeatureVector extract(const Matrix& img, const std::string& trace_id) const;

  const FeatureExtractorConfig& config() const { return cfg_; }

 private:
  FeatureExtractorConfig cfg_;
  // weights_[stage][oc * in_ch * k * k + ic * k * k + ky * k + kx]
  std::vector<std::vector<double>> weights_;
};

// CSV with a trace_id column followed by feature_dim value columns. Import
// enforces rectangular rows; a header line is detected and skipped.
std::vector<FeatureVector> import_external_features(const std::filesystem::path& path);
void export_features_csv(const std::vector<FeatureVector>& features,
                         const std::filesystem::path& path);

}  // namespace emsift
