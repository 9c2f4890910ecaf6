#include "xaikit/lime.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "xaikit/error.hpp"
#include "xaikit/random.hpp"

using nlohmann::json;

namespace xaikit {

namespace {

constexpr std::uint64_t kMaskStream = 0x11ED;
constexpr int kKmeansIterations = 10;

Tensor intensity_of(const Tensor& image) {
  if (image.rank() == 2) return image;
  if (image.rank() != 3) throw DimensionError("segment_superpixels expects [C,H,W] or [H,W]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out({h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = image.data() + ch * h * w;
    for (std::size_t i = 0; i < h * w; ++i) out[i] += plane[i];
  }
  for (std::size_t i = 0; i < h * w; ++i) out[i] /= static_cast<double>(c);
  return out;
}

struct Center {
  double intensity, x, y;
  double sum_i = 0.0, sum_x = 0.0, sum_y = 0.0;
  long count = 0;
};

// Relabels to contiguous ids in row-major first-appearance order.
void compact_labels(SuperpixelMap& map) {
  std::vector<int> remap(map.region_count >= 0 ? static_cast<std::size_t>(map.region_count) + 1 : 1, -1);
  int next = 0;
  for (int& label : map.labels) {
    if (label >= static_cast<int>(remap.size())) remap.resize(label + 1, -1);
    if (remap[label] < 0) remap[label] = next++;
    label = remap[label];
  }
  map.region_count = next;
}

// Keeps the largest 4-connected component of every label (first in row-major
// order on ties) and merges the rest into adjacent surviving regions.
void enforce_connectivity(SuperpixelMap& map) {
  const std::size_t h = map.height, w = map.width;
  const std::size_t n = h * w;
  std::vector<int> component(n, -1);
  std::vector<int> comp_label;
  std::vector<long> comp_size;

  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < n; ++start) {
    if (component[start] >= 0) continue;
    const int comp = static_cast<int>(comp_label.size());
    comp_label.push_back(map.labels[start]);
    comp_size.push_back(0);
    component[start] = comp;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      ++comp_size[comp];
      const std::size_t y = p / w, x = p % w;
      const std::size_t neighbors[4] = {p >= w ? p - w : p, x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p,
                                        y + 1 < h ? p + w : p};
      for (std::size_t q : neighbors) {
        if (q != p && component[q] < 0 && map.labels[q] == map.labels[start]) {
          component[q] = comp;
          queue.push_back(q);
        }
      }
    }
  }

  // Pick the surviving component per label.
  std::vector<int> best_comp;
  for (std::size_t c = 0; c < comp_label.size(); ++c) {
    const int label = comp_label[c];
    if (label >= static_cast<int>(best_comp.size())) best_comp.resize(label + 1, -1);
    if (best_comp[label] < 0 || comp_size[c] > comp_size[best_comp[label]]) best_comp[label] = static_cast<int>(c);
  }

  std::vector<bool> orphan(n, false);
  for (std::size_t p = 0; p < n; ++p) orphan[p] = component[p] != best_comp[map.labels[p]];

  // Sweep until every orphan has been absorbed by an adjacent kept region.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t p = 0; p < n; ++p) {
      if (!orphan[p]) continue;
      const std::size_t y = p / w, x = p % w;
      const std::size_t neighbors[4] = {p >= w ? p - w : p, x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p,
                                        y + 1 < h ? p + w : p};
      for (std::size_t q : neighbors) {
        if (q != p && !orphan[q]) {
          map.labels[p] = map.labels[q];
          orphan[p] = false;
          changed = true;
          break;
        }
      }
    }
  }
  compact_labels(map);
}

}  // namespace

SuperpixelMap segment_superpixels(const Tensor& image, int num_regions, std::uint64_t seed) {
  (void)seed;  // the procedure is deterministic; the seed is part of the interface
  const Tensor intensity = intensity_of(image);
  const std::size_t h = intensity.dim(0), w = intensity.dim(1);
  if (h < 1 || w < 1) throw ContractError("segment_superpixels: degenerate image");
  if (num_regions < 1 || static_cast<std::size_t>(num_regions) > h * w) {
    throw ContractError("segment_superpixels: region count must be in [1, pixel count]");
  }

  SuperpixelMap map;
  map.height = h;
  map.width = w;
  map.labels.assign(h * w, 0);
  if (num_regions == 1) {
    map.region_count = 1;
    return map;
  }

  // Grid init: cell edges at i*W/gx so the cells tile the image exactly.
  const double spacing = std::sqrt(static_cast<double>(h) * static_cast<double>(w) / num_regions);
  const std::size_t gx = std::min(w, static_cast<std::size_t>(
                                         std::max(1.0, std::ceil(std::sqrt(num_regions * static_cast<double>(w) /
                                                                           static_cast<double>(h))))));
  const std::size_t gy = std::min(h, static_cast<std::size_t>(std::max(
                                         1.0, std::ceil(static_cast<double>(num_regions) / static_cast<double>(gx)))));
  const std::size_t k = gx * gy;

  std::vector<Center> centers(k);
  for (std::size_t p = 0; p < h * w; ++p) {
    const std::size_t y = p / w, x = p % w;
    const std::size_t cx = std::min(gx - 1, x * gx / w);
    const std::size_t cy = std::min(gy - 1, y * gy / h);
    map.labels[p] = static_cast<int>(cy * gx + cx);
  }
  const double intensity_scale = spacing;

  for (int iter = 0; iter <= kKmeansIterations; ++iter) {
    for (auto& c : centers) {
      c.sum_i = c.sum_x = c.sum_y = 0.0;
      c.count = 0;
    }
    for (std::size_t p = 0; p < h * w; ++p) {
      Center& c = centers[map.labels[p]];
      c.sum_i += intensity[p];
      c.sum_x += static_cast<double>(p % w);
      c.sum_y += static_cast<double>(p / w);
      ++c.count;
    }
    for (auto& c : centers) {
      if (c.count > 0) {
        c.intensity = c.sum_i / c.count;
        c.x = c.sum_x / c.count;
        c.y = c.sum_y / c.count;
      }
    }
    if (iter == kKmeansIterations) break;

    // Local assignment: each pixel considers centers within a 2*spacing box.
    const double window = 2.0 * spacing;
    for (std::size_t p = 0; p < h * w; ++p) {
      const double px = static_cast<double>(p % w), py = static_cast<double>(p / w);
      double best = -1.0;
      int best_label = map.labels[p];
      for (std::size_t c = 0; c < k; ++c) {
        if (centers[c].count == 0) continue;
        if (std::abs(centers[c].x - px) > window || std::abs(centers[c].y - py) > window) continue;
        const double di = (intensity[p] - centers[c].intensity) * intensity_scale;
        const double dx = px - centers[c].x;
        const double dy = py - centers[c].y;
        const double dist = di * di + dx * dx + dy * dy;
        if (best < 0.0 || dist < best) {
          best = dist;
          best_label = static_cast<int>(c);
        }
      }
      map.labels[p] = best_label;
    }
  }

  map.region_count = static_cast<int>(k);
  enforce_connectivity(map);
  return map;
}

Tensor apply_mask(const Tensor& image, const SuperpixelMap& segments, std::span<const std::uint8_t> mask,
                  double fill_value) {
  if (mask.size() != static_cast<std::size_t>(segments.region_count)) {
    throw ContractError("mask length does not match the region count");
  }
  const std::size_t hw = segments.height * segments.width;
  const std::size_t channels = image.rank() == 3 ? image.dim(0) : 1;
  if (image.numel() != channels * hw) throw DimensionError("image does not match the superpixel map");

  Tensor out = image;
  for (std::size_t p = 0; p < hw; ++p) {
    if (mask[segments.labels[p]]) continue;
    for (std::size_t c = 0; c < channels; ++c) out[c * hw + p] = fill_value;
  }
  return out;
}

double mask_distance(std::span<const std::uint8_t> mask) {
  std::size_t ones = 0;
  for (std::uint8_t bit : mask) ones += bit ? 1 : 0;
  if (ones == 0) return 1.0;
  // cosine(mask, all-ones) = sqrt(k/R) for a binary mask with k ones
  return 1.0 - std::sqrt(static_cast<double>(ones) / static_cast<double>(mask.size()));
}

LimeExplanation fit_surrogate(const std::vector<std::vector<std::uint8_t>>& masks, std::span<const double> responses,
                              std::span<const double> distances, double kernel_width, double ridge_lambda) {
  const std::size_t s = masks.size();
  if (s == 0) throw ContractError("fit_surrogate needs at least one sample");
  if (responses.size() != s || distances.size() != s) {
    throw ContractError("fit_surrogate: responses/distances do not match the sample count");
  }
  if (!(kernel_width > 0.0)) throw ContractError("fit_surrogate: kernel width must be positive");
  if (ridge_lambda < 0.0) throw ContractError("fit_surrogate: ridge lambda must be nonnegative");
  const std::size_t r = masks.front().size();
  for (const auto& m : masks) {
    if (m.size() != r) throw ContractError("fit_surrogate: masks differ in length");
  }

  // Weighted normal equations over [1 | mask bits]; the intercept column is
  // left out of the ridge penalty.
  const std::size_t dim = r + 1;
  std::vector<double> normal(dim * dim, 0.0);
  std::vector<double> rhs(dim, 0.0);
  std::vector<double> weights(s);
  std::vector<double> row(dim);
  for (std::size_t i = 0; i < s; ++i) {
    weights[i] = std::exp(-(distances[i] * distances[i]) / (kernel_width * kernel_width));
    row[0] = 1.0;
    for (std::size_t j = 0; j < r; ++j) row[j + 1] = masks[i][j] ? 1.0 : 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      if (row[a] == 0.0) continue;
      const double wa = weights[i] * row[a];
      for (std::size_t b = 0; b < dim; ++b) normal[a * dim + b] += wa * row[b];
      rhs[a] += wa * responses[i];
    }
  }
  for (std::size_t j = 1; j < dim; ++j) normal[j * dim + j] += ridge_lambda;

  // Gaussian elimination with partial pivoting.
  std::vector<double> beta = rhs;
  std::vector<std::size_t> perm(dim);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t col = 0; col < dim; ++col) {
    std::size_t pivot = col;
    for (std::size_t i = col + 1; i < dim; ++i) {
      if (std::abs(normal[perm[i] * dim + col]) > std::abs(normal[perm[pivot] * dim + col])) pivot = i;
    }
    std::swap(perm[col], perm[pivot]);
    const double diag = normal[perm[col] * dim + col];
    if (std::abs(diag) < 1e-12) {
      throw SolverError("ridge system is singular: rank defect at coefficient " + std::to_string(col) +
                        " (lambda = " + std::to_string(ridge_lambda) + ")");
    }
    for (std::size_t i = col + 1; i < dim; ++i) {
      const double factor = normal[perm[i] * dim + col] / diag;
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < dim; ++j) normal[perm[i] * dim + j] -= factor * normal[perm[col] * dim + j];
      beta[perm[i]] -= factor * beta[perm[col]];
    }
  }
  std::vector<double> coef(dim);
  for (std::size_t col = dim; col-- > 0;) {
    double acc = beta[perm[col]];
    for (std::size_t j = col + 1; j < dim; ++j) acc -= normal[perm[col] * dim + j] * coef[j];
    coef[col] = acc / normal[perm[col] * dim + col];
  }

  LimeExplanation exp;
  exp.intercept = coef[0];
  exp.region_weights.reserve(r);
  for (std::size_t j = 0; j < r; ++j) exp.region_weights.push_back({static_cast<int>(j), coef[j + 1]});
  std::stable_sort(exp.region_weights.begin(), exp.region_weights.end(),
                   [](const RegionWeight& a, const RegionWeight& b) { return std::abs(a.weight) > std::abs(b.weight); });

  // Weighted R^2 of the surrogate fit.
  double wsum = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    wsum += weights[i];
    ybar += weights[i] * responses[i];
  }
  ybar /= wsum;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    double fitted = coef[0];
    for (std::size_t j = 0; j < r; ++j) {
      if (masks[i][j]) fitted += coef[j + 1];
    }
    ss_res += weights[i] * (responses[i] - fitted) * (responses[i] - fitted);
    ss_tot += weights[i] * (responses[i] - ybar) * (responses[i] - ybar);
  }
  exp.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res > 0.0 ? 0.0 : 1.0);
  return exp;
}

LimeResult explain_lime(const PredictFn& model, const Tensor& image, int target_class, const LimeConfig& config) {
  if (config.num_samples < 1) throw ContractError("explain_lime: num_samples must be positive");
  if (target_class < 0) throw ContractError("explain_lime: bad class index");

  LimeResult result;
  result.segments = segment_superpixels(image, config.num_regions, config.seed);
  const std::size_t r = static_cast<std::size_t>(result.segments.region_count);

  const std::size_t n = static_cast<std::size_t>(config.num_samples);
  std::vector<std::vector<std::uint8_t>> masks;
  masks.reserve(n);
  masks.emplace_back(r, std::uint8_t{1});  // all-ones anchor
  for (std::size_t i = 1; i < n; ++i) {
    Rng rng(derive_seed(config.seed, kMaskStream, i));
    std::vector<std::uint8_t> mask(r);
    for (auto& bit : mask) bit = rng.uniform() < 0.5 ? 0 : 1;
    masks.push_back(std::move(mask));
  }

  std::vector<double> responses(n), distances(n);
  constexpr std::size_t kChunk = 8;
  const std::size_t c = image.rank() == 3 ? image.dim(0) : 1;
  const std::size_t hw = result.segments.height * result.segments.width;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    Tensor batch({end - begin, c, result.segments.height, result.segments.width});
    for (std::size_t i = begin; i < end; ++i) {
      const Tensor masked = apply_mask(image, result.segments, masks[i], config.fill_value);
      std::copy(masked.data(), masked.data() + c * hw, batch.data() + (i - begin) * c * hw);
    }
    const Tensor probs = model(batch);
    if (probs.rank() != 2 || probs.dim(0) != end - begin ||
        static_cast<std::size_t>(target_class) >= probs.dim(1)) {
      throw ContractError("explain_lime: black box returned unexpected probabilities");
    }
    for (std::size_t i = begin; i < end; ++i) {
      responses[i] = probs(i - begin, static_cast<std::size_t>(target_class));
    }
  }
  for (std::size_t i = 0; i < n; ++i) distances[i] = mask_distance(masks[i]);

  const double kw = config.kernel_width > 0.0 ? config.kernel_width : 0.25 * std::sqrt(static_cast<double>(r));
  result.explanation = fit_surrogate(masks, responses, distances, kw, config.ridge_lambda);
  return result;
}

void write_lime_sidecar(const std::string& path, const LimeExplanation& explanation, const LimeConfig& config) {
  json regions = json::array();
  for (const auto& rw : explanation.region_weights) {
    regions.push_back(json{{"id", rw.region}, {"weight", rw.weight}});
  }
  const json doc{{"regions", regions},
                 {"intercept", explanation.intercept},
                 {"r2", explanation.r2},
                 {"config",
                  {{"num_regions", config.num_regions},
                   {"num_samples", config.num_samples},
                   {"kernel_width", config.kernel_width},
                   {"ridge_lambda", config.ridge_lambda},
                   {"top_regions", config.top_regions},
                   {"fill_value", config.fill_value},
                   {"seed", config.seed}}}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write sidecar JSON " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace xaikit
