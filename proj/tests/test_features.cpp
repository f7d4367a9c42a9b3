#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "emsift/errors.hpp"
#include "emsift/features.hpp"
#include "emsift/rng.hpp"

using emsift::FeatureExtractor;
using emsift::FeatureExtractorConfig;
using emsift::FeatureVector;
using emsift::Matrix;

namespace {

FeatureExtractorConfig tiny_config() {
  FeatureExtractorConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.n_stages = 2;
  cfg.filters_per_stage = {4, 6};
  cfg.feature_dim = 6;
  cfg.kernel_size = 3;
  cfg.pool_stride = 2;
  cfg.weight_seed = 1234;
  return cfg;
}

Matrix random_image(int h, int w, std::uint64_t seed) {
  emsift::Rng rng(seed);
  Matrix m(h, w);
  for (double& v : m.data) v = rng.uniform01();
  return m;
}

}  // namespace

TEST_CASE("features: same-size bilinear resize is the identity") {
  Matrix m = random_image(7, 9, 31);
  Matrix out = emsift::bilinear_resize(m, 7, 9);
  CHECK(out.data == m.data);
}

TEST_CASE("features: 2x2 upsample to 3x3 interpolates the midpoints") {
  Matrix m(2, 2);
  m.at(0, 0) = 0.0;
  m.at(0, 1) = 1.0;
  m.at(1, 0) = 1.0;
  m.at(1, 1) = 2.0;
  Matrix out = emsift::bilinear_resize(m, 3, 3);
  CHECK(out.at(0, 0) == doctest::Approx(0.0));
  CHECK(out.at(0, 2) == doctest::Approx(1.0));
  CHECK(out.at(2, 0) == doctest::Approx(1.0));
  CHECK(out.at(2, 2) == doctest::Approx(2.0));
  CHECK(out.at(1, 1) == doctest::Approx(1.0));
  CHECK(out.at(0, 1) == doctest::Approx(0.5));
  CHECK(out.at(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("features: global average pool is the mean") {
  Matrix m(2, 3);
  m.data = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  CHECK(emsift::global_average_pool(m) == doctest::Approx(3.5));
}

TEST_CASE("features: scalogram preprocessing maps into [0,1], constants to zero") {
  emsift::Scalogram s;
  s.trace_id = "s";
  s.scales = {1.0, 2.0};
  s.freqs = {2.0, 1.0};
  s.magnitudes = Matrix(2, 4);
  for (std::size_t i = 0; i < 8; ++i) s.magnitudes.data[i] = static_cast<double>(i);

  Matrix img = emsift::resize_scalogram(s, 4, 4);
  double lo = 1e300, hi = -1e300;
  for (double v : img.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.0));

  emsift::Scalogram flat = s;
  for (double& v : flat.magnitudes.data) v = 5.0;
  Matrix zeros = emsift::resize_scalogram(flat, 4, 4);
  for (double v : zeros.data) CHECK(v == 0.0);
}

TEST_CASE("features: extraction is deterministic in config and seed") {
  FeatureExtractorConfig cfg = tiny_config();
  Matrix img = random_image(16, 16, 77);
  FeatureVector a = FeatureExtractor(cfg).extract(img, "t");
  FeatureVector b = FeatureExtractor(cfg).extract(img, "t");
  CHECK(a.values == b.values);
  REQUIRE(a.values.size() == 6);

  cfg.weight_seed = 4321;
  FeatureVector c = FeatureExtractor(cfg).extract(img, "t");
  CHECK(a.values != c.values);
}

TEST_CASE("features: zero image yields zero features") {
  Matrix zeros(16, 16);
  FeatureVector f = FeatureExtractor(tiny_config()).extract(zeros, "z");
  for (double v : f.values) CHECK(v == 0.0);
}

TEST_CASE("features: the stack is positively homogeneous") {
  // conv is linear, ReLU and pooling are positively homogeneous, so scaling
  // the image by c > 0 scales every feature by c.
  FeatureExtractor extractor(tiny_config());
  Matrix img = random_image(16, 16, 78);
  Matrix scaled = img;
  for (double& v : scaled.data) v *= 2.5;

  FeatureVector f1 = extractor.extract(img, "t");
  FeatureVector f2 = extractor.extract(scaled, "t");
  REQUIRE(f1.values.size() == f2.values.size());
  for (std::size_t i = 0; i < f1.values.size(); ++i)
    CHECK(f2.values[i] == doctest::Approx(2.5 * f1.values[i]).epsilon(1e-12));
}

TEST_CASE("features: invalid extractor configs are rejected") {
  FeatureExtractorConfig cfg = tiny_config();
  SUBCASE("even kernel") {
    cfg.kernel_size = 4;
    CHECK_THROWS_AS(emsift::validate_extractor_config(cfg), emsift::config_error);
  }
  SUBCASE("stage/filter mismatch") {
    cfg.filters_per_stage = {4};
    CHECK_THROWS_AS(emsift::validate_extractor_config(cfg), emsift::config_error);
  }
  SUBCASE("feature_dim must equal the last filter count") {
    cfg.feature_dim = 8;
    CHECK_THROWS_AS(emsift::validate_extractor_config(cfg), emsift::config_error);
  }
  SUBCASE("non-positive sizes") {
    cfg.input_h = 0;
    CHECK_THROWS_AS(emsift::validate_extractor_config(cfg), emsift::config_error);
  }
  SUBCASE("pool stride below 1") {
    cfg.pool_stride = 0;
    CHECK_THROWS_AS(emsift::validate_extractor_config(cfg), emsift::config_error);
  }
}

TEST_CASE("features: wrong input size is rejected at extraction") {
  CHECK_THROWS_AS(FeatureExtractor(tiny_config()).extract(Matrix(8, 16), "t"),
                  emsift::config_error);
}

TEST_CASE("features: CSV export/import round trip and ragged rejection") {
  auto dir = std::filesystem::temp_directory_path() / "emsift_test_features";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  std::vector<FeatureVector> features = {{{1.5, -2.25, 0.125}, "a"},
                                         {{0.0, 3.5, -1.0}, "b"}};
  auto path = dir / "features.csv";
  emsift::export_features_csv(features, path);
  std::vector<FeatureVector> back = emsift::import_external_features(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].trace_id == "a");
  CHECK(back[0].values == features[0].values);
  CHECK(back[1].values == features[1].values);

  {
    std::ofstream f(dir / "ragged.csv");
    f << "id,f0,f1\nx,1.0,2.0\ny,1.0\n";
  }
  CHECK_THROWS_AS(emsift::import_external_features(dir / "ragged.csv"), emsift::parse_error);
  CHECK_THROWS_AS(emsift::import_external_features(dir / "missing.csv"), emsift::io_error);
}
