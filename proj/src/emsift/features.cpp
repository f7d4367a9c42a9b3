#include "emsift/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "emsift/errors.hpp"
#include "emsift/rng.hpp"

namespace emsift {

namespace {

// Spatial sizes after each pooling stage; floor division drops the tail.
int pooled_size(int size, int stride) { return size / stride; }

}  // namespace

void validate_extractor_config(const FeatureExtractorConfig& cfg) {
  if (cfg.input_h < 1 || cfg.input_w < 1)
    throw config_error("extractor: input size must be positive");
  if (cfg.n_stages < 1) throw config_error("extractor: n_stages must be >= 1");
  if (cfg.feature_dim < 1) throw config_error("extractor: feature_dim must be >= 1");
  if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0)
    throw config_error("extractor: kernel_size must be odd and >= 1");
  if (cfg.pool_stride < 1) throw config_error("extractor: pool_stride must be >= 1");
  if (static_cast<int>(cfg.filters_per_stage.size()) != cfg.n_stages)
    throw config_error("extractor: filters_per_stage must have n_stages entries");
  for (int f : cfg.filters_per_stage)
    if (f < 1) throw config_error("extractor: filter counts must be >= 1");
  if (cfg.filters_per_stage.back() != cfg.feature_dim)
    throw config_error("extractor: last stage filter count must equal feature_dim");
  int h = cfg.input_h;
  int w = cfg.input_w;
  for (int s = 0; s < cfg.n_stages; ++s) {
    h = pooled_size(h, cfg.pool_stride);
    w = pooled_size(w, cfg.pool_stride);
    if (h < 1 || w < 1)
      throw config_error("extractor: spatial size collapses below 1x1 after pooling");
  }
}

Matrix bilinear_resize(const Matrix& m, int out_h, int out_w) {
  if (m.rows == 0 || m.cols == 0) throw config_error("resize: empty input");
  if (out_h < 1 || out_w < 1) throw config_error("resize: target dimensions must be positive");

  Matrix out(out_h, out_w);
  // Corner-aligned sample positions; a single row/column maps everywhere to it.
  const double sy = out_h > 1 ? static_cast<double>(m.rows - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(m.cols - 1) / (out_w - 1) : 0.0;
  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, m.rows - 1);
    const double wy = fy - static_cast<double>(y0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, m.cols - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = m.at(y0, x0) * (1.0 - wx) + m.at(y0, x1) * wx;
      const double bottom = m.at(y1, x0) * (1.0 - wx) + m.at(y1, x1) * wx;
      out.at(y, x) = top * (1.0 - wy) + bottom * wy;
    }
  }
  return out;
}

double global_average_pool(const Matrix& m) {
  if (m.data.empty()) throw config_error("gap: empty input");
  double sum = 0.0;
  for (double v : m.data) sum += v;
  return sum / static_cast<double>(m.data.size());
}

Matrix resize_scalogram(const Scalogram& s, int out_h, int out_w) {
  Matrix img = bilinear_resize(s.magnitudes, out_h, out_w);
  for (double& v : img.data) v = std::log1p(v);
  auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi - lo > 0.0) {
    const double inv = 1.0 / (hi - lo);
    for (double& v : img.data) v = (v - lo) * inv;
  } else {
    std::fill(img.data.begin(), img.data.end(), 0.0);
  }
  return img;
}

FeatureExtractor::FeatureExtractor(const FeatureExtractorConfig& cfg) : cfg_(cfg) {
  validate_extractor_config(cfg);
  const Rng root(cfg.weight_seed);
  const int k = cfg.kernel_size;
  weights_.resize(cfg.n_stages);
  int in_ch = 1;
  for (int s = 0; s < cfg.n_stages; ++s) {
    const int out_ch = cfg.filters_per_stage[s];
    // Fan-in scaled gaussians keep activation variance roughly constant
    // through ReLU stages.
    const double sigma = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
    Rng rng = root.fork(static_cast<std::uint64_t>(s));
    std::vector<double>& w = weights_[s];
    w.resize(static_cast<std::size_t>(out_ch) * in_ch * k * k);
    for (double& v : w) v = sigma * rng.gaussian();
    in_ch = out_ch;
  }
}

FeatureVector FeatureExtractor::extract(const Matrix& img, const std::string& trace_id) const {
  if (static_cast<int>(img.rows) != cfg_.input_h || static_cast<int>(img.cols) != cfg_.input_w)
    throw config_error("extractor: image size does not match input_size");

  const int k = cfg_.kernel_size;
  const int half = k / 2;

  // Channel-major activations: maps[c] is one spatial channel.
  std::vector<Matrix> maps(1, img);
  for (int s = 0; s < cfg_.n_stages; ++s) {
    const int in_ch = static_cast<int>(maps.size());
    const int out_ch = cfg_.filters_per_stage[s];
    const int h = static_cast<int>(maps[0].rows);
    const int w = static_cast<int>(maps[0].cols);
    const std::vector<double>& weights = weights_[s];

    std::vector<Matrix> conv(out_ch);
    for (int oc = 0; oc < out_ch; ++oc) {
      Matrix acc(h, w);
      for (int ic = 0; ic < in_ch; ++ic) {
        const Matrix& src = maps[ic];
        const double* wbase =
            weights.data() + (static_cast<std::size_t>(oc) * in_ch + ic) * k * k;
        for (int y = 0; y < h; ++y) {
          double* out_row = acc.row(y);
          for (int ky = 0; ky < k; ++ky) {
            const int sy = y + ky - half;
            if (sy < 0 || sy >= h) continue;  // zero padding
            const double* src_row = src.row(sy);
            const double* wrow = wbase + static_cast<std::size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) {
              const int off = kx - half;
              const double wv = wrow[kx];
              if (wv == 0.0) continue;
              const int x_lo = std::max(0, -off);
              const int x_hi = std::min(w, w - off);
              for (int x = x_lo; x < x_hi; ++x) out_row[x] += wv * src_row[x + off];
            }
          }
        }
      }
      // ReLU.
      for (double& v : acc.data) v = v > 0.0 ? v : 0.0;
      // Non-overlapping average pooling.
      const int ph = h / cfg_.pool_stride;
      const int pw = w / cfg_.pool_stride;
      Matrix pooled(ph, pw);
      const double inv_area = 1.0 / (static_cast<double>(cfg_.pool_stride) * cfg_.pool_stride);
      for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
          double sum = 0.0;
          for (int dy = 0; dy < cfg_.pool_stride; ++dy) {
            const double* row = acc.row(static_cast<std::size_t>(y) * cfg_.pool_stride + dy);
            for (int dx = 0; dx < cfg_.pool_stride; ++dx)
              sum += row[static_cast<std::size_t>(x) * cfg_.pool_stride + dx];
          }
          pooled.at(y, x) = sum * inv_area;
        }
      }
      conv[oc] = std::move(pooled);
    }
    maps = std::move(conv);
  }

  FeatureVector out;
  out.trace_id = trace_id;
  out.values.resize(maps.size());
  for (std::size_t c = 0; c < maps.size(); ++c) out.values[c] = global_average_pool(maps[c]);
  return out;
}

std::vector<FeatureVector> import_external_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open feature file: " + path.string());

  std::vector<FeatureVector> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;

    FeatureVector fv;
    std::size_t start = 0;
    std::size_t col = 0;
    bool numeric_ok = true;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i != line.size() && line[i] != ',') continue;
      std::string_view cell(line.data() + start, i - start);
      if (col == 0) {
        fv.trace_id = std::string(cell);
      } else {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size()) {
          numeric_ok = false;
          break;
        }
        fv.values.push_back(v);
      }
      ++col;
      start = i + 1;
    }
    if (!numeric_ok) {
      // The first line may be a header; anything later is malformed.
      if (line_no == 1 && out.empty()) continue;
      throw parse_error(path.string() + ":" + std::to_string(line_no) +
                        ": non-numeric feature cell");
    }
    if (fv.values.empty())
      throw parse_error(path.string() + ":" + std::to_string(line_no) +
                        ": row has no feature values");
    if (expected_cols == 0) {
      expected_cols = fv.values.size();
    } else if (fv.values.size() != expected_cols) {
      throw parse_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(expected_cols) + " feature columns, got " +
                        std::to_string(fv.values.size()));
    }
    out.push_back(std::move(fv));
  }
  if (out.empty()) throw parse_error(path.string() + ": no feature rows found");
  return out;
}

void export_features_csv(const std::vector<FeatureVector>& features,
                         const std::filesystem::path& path) {
  if (features.empty()) throw config_error("export features: empty list");
  std::ofstream out(path);
  if (!out) throw io_error("cannot write feature file: " + path.string());
  out << "trace_id";
  for (std::size_t i = 0; i < features.front().values.size(); ++i) out << ",f" << i;
  out << '\n';
  char buf[32];
  for (const FeatureVector& fv : features) {
    out << fv.trace_id;
    for (double v : fv.values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace emsift
