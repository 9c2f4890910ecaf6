#include "xaikit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <unordered_map>

#include "json.hpp"

#include "xaikit/image.hpp"
#include "xaikit/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace xaikit {

namespace {

void load_class_dir(const fs::path& dir, int label, std::size_t target_h, std::size_t target_w,
                    std::vector<ImageSample>& out) {
  if (!fs::is_directory(dir)) throw IngestError("missing class directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IngestError("class directory is empty: " + dir.string());
  for (const auto& file : files) {
    Tensor pixels = load_image(file.string());
    if (pixels.dim(1) != target_h || pixels.dim(2) != target_w) {
      pixels = resize_bilinear(pixels, target_h, target_w);
    }
    out.push_back(ImageSample{std::move(pixels), label, file.string()});
  }
}

}  // namespace

std::vector<ImageSample> load_dataset_dir(const std::string& root, std::size_t target_h, std::size_t target_w) {
  std::vector<ImageSample> samples;
  load_class_dir(fs::path(root) / "no", 0, target_h, target_w, samples);
  load_class_dir(fs::path(root) / "yes", 1, target_h, target_w, samples);
  return samples;
}

SplitCounts split_counts(std::size_t class_size, const SplitRatios& ratios) {
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ContractError("split ratios must sum to 1");
  }
  const double n = static_cast<double>(class_size);
  // Tiny epsilon keeps exact multiples (0.8*155 = 124, 0.1*155 = 15.5) from
  // drifting across the floor/half boundaries in floating point.
  const auto train = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
  const auto validation = static_cast<std::size_t>(std::ceil(ratios.validation * n - 0.5 - 1e-9));
  if (train + validation > class_size) throw ContractError("split ratios leave no room for the test part");
  return SplitCounts{train, validation, class_size - train - validation};
}

DatasetSplit split_dataset(const std::vector<ImageSample>& samples, const SplitRatios& ratios, std::uint64_t seed) {
  if (samples.empty()) throw ContractError("cannot split an empty dataset");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].label].push_back(i);
  for (const auto& [label, idx] : by_class) {
    if (idx.empty()) throw ContractError("class " + std::to_string(label) + " has no samples");
  }

  DatasetSplit split;
  split.seed = seed;
  for (auto& [label, idx] : by_class) {
    Rng rng(derive_seed(seed, 1017 + static_cast<std::uint64_t>(label)));
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    const SplitCounts counts = split_counts(idx.size(), ratios);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const ImageSample& s = samples[idx[i]];
      if (i < counts.train) {
        split.train.push_back(s);
      } else if (i < counts.train + counts.validation) {
        split.validation.push_back(s);
      } else {
        split.test.push_back(s);
      }
    }
  }
  return split;
}

namespace {

json paths_of(const std::vector<ImageSample>& part) {
  json arr = json::array();
  for (const auto& s : part) arr.push_back(s.source_path);
  return arr;
}

void fill_from_paths(const json& arr, const std::unordered_map<std::string, const ImageSample*>& by_path,
                     std::vector<ImageSample>& out, const std::string& manifest_path) {
  for (const auto& p : arr) {
    const auto it = by_path.find(p.get<std::string>());
    if (it == by_path.end()) {
      throw IngestError("split manifest " + manifest_path + " names unknown sample " + p.get<std::string>());
    }
    out.push_back(*it->second);
  }
}

}  // namespace

void write_split_manifest(const std::string& path, const DatasetSplit& split, const SplitRatios& ratios) {
  json doc{{"seed", split.seed},
           {"ratios", {ratios.train, ratios.validation, ratios.test}},
           {"train", paths_of(split.train)},
           {"validation", paths_of(split.validation)},
           {"test", paths_of(split.test)}};
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write split manifest " + path);
  out << doc.dump(2) << "\n";
}

DatasetSplit load_split_manifest(const std::string& path, const std::vector<ImageSample>& samples) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot read split manifest " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IngestError("malformed split manifest " + path + ": " + e.what());
  }
  std::unordered_map<std::string, const ImageSample*> by_path;
  for (const auto& s : samples) by_path[s.source_path] = &s;

  DatasetSplit split;
  split.seed = doc.value("seed", 0ULL);
  fill_from_paths(doc.at("train"), by_path, split.train, path);
  fill_from_paths(doc.at("validation"), by_path, split.validation, path);
  fill_from_paths(doc.at("test"), by_path, split.test, path);
  return split;
}

}  // namespace xaikit
