// xaikit: train, evaluate and explain the brain-tumor detection CNN.
//
// Subcommands mirror the pipeline: `train` ingests a yes/no dataset
// directory, checks class balance, picks the standard or cost-sensitive
// branch and writes a checkpoint; `evaluate` reports the five metrics plus
// AUC; `explain` renders heatmap overlays for any of the eight explanation
// methods; `report` collates metrics files into a comparison CSV.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xaikit/cam.hpp"
#include "xaikit/dataset.hpp"
#include "xaikit/image.hpp"
#include "xaikit/lime.hpp"
#include "xaikit/loss.hpp"
#include "xaikit/metrics.hpp"
#include "xaikit/model.hpp"
#include "xaikit/overlay.hpp"
#include "xaikit/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xaikit;

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Atomic write: the manifest appears complete or not at all.
void write_manifest(const std::string& primary_artifact, const std::string& command, const json& config,
                    std::uint64_t seed, const std::string& dataset_root, const std::vector<std::string>& artifacts,
                    double wall_seconds) {
  const json doc{{"command", command},     {"config", config},       {"seed", seed},
                 {"dataset_root", dataset_root}, {"artifacts", artifacts}, {"wall_time_seconds", wall_seconds}};
  const std::string path = primary_artifact + ".manifest.json";
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write manifest " + tmp);
    out << doc.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

std::optional<ClassWeights> parse_weights(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ContractError("--weights expects w0,w1");
  try {
    const ClassWeights w{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    validate(w);
    return w;
  } catch (const std::invalid_argument&) {
    throw ContractError("--weights expects two numbers, got '" + text + "'");
  }
}

DatasetSplit make_split(const std::vector<ImageSample>& samples, std::uint64_t seed,
                        const std::string& manifest_path) {
  if (!manifest_path.empty()) return load_split_manifest(manifest_path, samples);
  return split_dataset(samples, SplitRatios{}, seed);
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data_dir, out, report, weights_text, split_manifest, write_split_manifest;
  int epochs = 7;
  int batch_size = 50;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool cost_sensitive = false;
  bool standard = false;
  std::size_t input_size = 224;
  std::vector<std::size_t> conv_filters{32, 64};
  std::size_t dense_units = 256;
};

int run_train(const TrainArgs& args) {
  Stopwatch watch;
  const auto samples = load_dataset_dir(args.data_dir, args.input_size, args.input_size);
  long positives = 0, negatives = 0;
  for (const auto& s : samples) (s.label == 1 ? positives : negatives)++;

  // Balance check decides the branch unless an explicit flag overrides it.
  const bool balanced = positives == negatives;
  bool cost_sensitive = args.cost_sensitive;
  if (!args.cost_sensitive && !args.standard) cost_sensitive = !balanced;
  if (args.standard) cost_sensitive = false;
  std::printf("dataset: %ld tumor / %ld no-tumor (%s)\n", positives, negatives,
              balanced ? "balanced" : "imbalanced");
  std::printf("branch: %s\n", cost_sensitive ? "cost-sensitive" : "standard");

  const DatasetSplit split = make_split(samples, args.seed, args.split_manifest);
  if (!args.write_split_manifest.empty()) write_split_manifest(args.write_split_manifest, split, SplitRatios{});

  ModelConfig config;
  config.input_height = config.input_width = args.input_size;
  config.conv_filters = args.conv_filters;
  config.dense_units = args.dense_units;
  CnnModel model = CnnModel::build(config, args.seed);

  TrainConfig tc;
  tc.epochs = args.epochs;
  tc.batch_size = args.batch_size;
  tc.learning_rate = args.lr;
  tc.cost_sensitive = cost_sensitive;
  tc.weights = parse_weights(args.weights_text);
  tc.seed = args.seed;

  const TrainReport report = train(model, split, tc);
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    std::printf("epoch %zu/%d  train_loss %.6f  train_acc %.4f  val_loss %.6f  val_acc %.4f\n", e + 1, args.epochs,
                report.train_loss[e], report.train_accuracy[e], report.val_loss[e], report.val_accuracy[e]);
  }

  model.save_checkpoint(args.out);
  std::vector<std::string> artifacts{args.out};
  if (!args.report.empty()) {
    write_train_report_csv(args.report, report);
    artifacts.push_back(args.report);
  }
  if (!args.write_split_manifest.empty()) artifacts.push_back(args.write_split_manifest);

  const json config_snapshot{{"data_dir", args.data_dir},
                             {"epochs", args.epochs},
                             {"batch_size", args.batch_size},
                             {"lr", args.lr},
                             {"cost_sensitive", cost_sensitive},
                             {"weights", args.weights_text},
                             {"input_size", args.input_size},
                             {"conv_filters", args.conv_filters},
                             {"dense_units", args.dense_units}};
  write_manifest(args.out, "train", config_snapshot, args.seed, args.data_dir, artifacts, watch.seconds());
  return 0;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string model, data_dir, split = "test", out, roc, split_manifest;
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

int run_evaluate(const EvaluateArgs& args) {
  Stopwatch watch;
  const CnnModel model = CnnModel::load_checkpoint(args.model);
  const auto samples =
      load_dataset_dir(args.data_dir, model.config().input_height, model.config().input_width);
  const DatasetSplit split = make_split(samples, args.seed, args.split_manifest);

  const std::vector<ImageSample>* part = nullptr;
  if (args.split == "train") {
    part = &split.train;
  } else if (args.split == "val" || args.split == "validation") {
    part = &split.validation;
  } else if (args.split == "test") {
    part = &split.test;
  } else {
    throw ContractError("--split must be train, val or test");
  }

  const EvaluationResult result = evaluate(model, *part, args.threshold);
  std::printf("samples: %zu\n", part->size());
  std::printf("accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f  specificity %.4f  auc %.4f\n",
              result.metrics.accuracy, result.metrics.precision, result.metrics.recall, result.metrics.f1,
              result.metrics.specificity, result.roc.auc);

  write_metrics_json(args.out, result, args.threshold);
  const std::string roc_path = args.roc.empty() ? args.out + ".roc.csv" : args.roc;
  write_roc_csv(roc_path, result.roc);

  const json config_snapshot{{"model", args.model},
                             {"data_dir", args.data_dir},
                             {"split", args.split},
                             {"threshold", args.threshold}};
  write_manifest(args.out, "evaluate", config_snapshot, args.seed, args.data_dir, {args.out, roc_path},
                 watch.seconds());
  return 0;
}

// ---- explain ---------------------------------------------------------------

struct ExplainArgs {
  std::string model, image, method = "grad-cam", target_class = "auto", layer, out;
  double alpha = 0.5;
  bool panel = false;
  CamConfig cam;
  LimeConfig lime;
  std::uint64_t seed = 0;
};

const std::vector<std::string> kAllMethods{"saliency",  "smoothgrad",      "grad-cam", "grad-cam++",
                                           "score-cam", "faster-score-cam", "lime",     "class-model"};

std::string sidecar_path(const std::string& png_path) {
  const fs::path p(png_path);
  fs::path side = p;
  side.replace_extension(".json");
  return side.string();
}

Tensor run_one_method(const std::string& method, const CnnModel& model, const Tensor& image, int cls,
                      const std::string& layer, const ExplainArgs& args, const std::string& out_path) {
  const CnnGradientView grad_view(model);
  const CnnForwardView fwd_view(model);

  if (method == "lime") {
    const PredictFn predict = [&](const Tensor& batch) { return model.forward(batch, false, 0); };
    const LimeResult lime = explain_lime(predict, image, cls, args.lime);
    const Tensor overlay = render_lime_overlay(image, lime.segments, lime.explanation, args.lime.top_regions);
    write_png(out_path, overlay);
    write_lime_sidecar(sidecar_path(out_path), lime.explanation, args.lime);
    return overlay;
  }
  if (method == "class-model") {
    const Tensor synth = class_model_visualization(grad_view, cls, image.shape(), args.cam);
    write_png(out_path, synth);
    Heatmap hm;  // sidecar for the synthesized image reuses the heatmap schema
    hm.method = method;
    hm.target_class = cls;
    hm.raw_min = synth.min();
    hm.raw_max = synth.max();
    write_heatmap_sidecar(sidecar_path(out_path), hm, "", args.cam);
    return synth;
  }

  Heatmap hm;
  if (method == "saliency") {
    hm = vanilla_saliency(grad_view, image, cls);
  } else if (method == "smoothgrad") {
    hm = smoothgrad(grad_view, image, cls, args.cam);
  } else if (method == "grad-cam") {
    hm = grad_cam(grad_view, image, cls, layer);
  } else if (method == "grad-cam++") {
    hm = grad_cam_pp(grad_view, image, cls, layer);
  } else if (method == "score-cam") {
    hm = score_cam(fwd_view, image, cls, layer);
  } else if (method == "faster-score-cam") {
    // clamp the default top-k to the layer's channel count on small models
    const auto names = model.conv_layer_names();
    int channels = args.cam.scorecam_top_k;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == layer) channels = static_cast<int>(model.config().conv_filters[i]);
    }
    hm = faster_score_cam(fwd_view, image, cls, layer, std::min(args.cam.scorecam_top_k, channels));
  } else {
    throw ContractError("unknown method '" + method + "'");
  }
  const Tensor overlay = render_overlay(image, hm, args.alpha);
  write_png(out_path, overlay);
  write_heatmap_sidecar(sidecar_path(out_path), hm, layer, args.cam);
  return overlay;
}

int run_explain(ExplainArgs args) {
  Stopwatch watch;
  const CnnModel model = CnnModel::load_checkpoint(args.model);
  Tensor image = load_image(args.image);
  if (image.dim(1) != model.config().input_height || image.dim(2) != model.config().input_width) {
    image = resize_bilinear(image, model.config().input_height, model.config().input_width);
  }
  args.cam.seed = args.seed;
  args.lime.seed = args.seed;

  const std::string layer = args.layer.empty() ? model.last_conv_layer() : args.layer;
  args.cam.target_layer = layer;

  int cls;
  if (args.target_class == "auto") {
    const Tensor probs = model.forward(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}), false, 0);
    cls = probs(0, std::size_t{0}) >= probs(0, std::size_t{1}) ? 0 : 1;  // argmax, ties to the lower index
    std::printf("auto class: %d (p0 %.4f, p1 %.4f)\n", cls, probs(0, std::size_t{0}), probs(0, std::size_t{1}));
  } else {
    cls = std::stoi(args.target_class);
    if (cls < 0 || cls >= static_cast<int>(model.config().num_classes)) {
      throw ContractError("--class out of range");
    }
  }

  std::vector<std::string> artifacts;
  if (args.method == "all") {
    const fs::path out(args.out);
    const fs::path stem = out.parent_path() / out.stem();
    std::vector<Tensor> panels{image};
    for (const std::string& method : kAllMethods) {
      const std::string path = stem.string() + "_" + method + ".png";
      panels.push_back(run_one_method(method, model, image, cls, layer, args, path));
      artifacts.push_back(path);
      artifacts.push_back(sidecar_path(path));
      std::printf("wrote %s\n", path.c_str());
    }
    if (args.panel) {
      write_png(args.out, compose_panel(panels));
      artifacts.push_back(args.out);
      std::printf("wrote %s\n", args.out.c_str());
    }
  } else {
    run_one_method(args.method, model, image, cls, layer, args, args.out);
    artifacts.push_back(args.out);
    artifacts.push_back(sidecar_path(args.out));
    std::printf("wrote %s\n", args.out.c_str());
  }

  const json config_snapshot{{"model", args.model}, {"image", args.image},   {"method", args.method},
                             {"class", cls},        {"layer", layer},        {"alpha", args.alpha},
                             {"panel", args.panel}, {"num_samples", args.lime.num_samples}};
  write_manifest(args.out, "explain", config_snapshot, args.seed, "", artifacts, watch.seconds());
  return 0;
}

// ---- report ----------------------------------------------------------------

int run_report(const std::vector<std::string>& inputs, const std::string& out) {
  Stopwatch watch;
  std::ofstream csv(out);
  if (!csv) throw Error("cannot write report CSV " + out);
  csv << "model,accuracy,precision,recall,f1,specificity,auc\n";
  for (const std::string& path : inputs) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read metrics JSON " + path);
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw Error("malformed metrics JSON " + path + ": " + e.what());
    }
    try {
      csv << fs::path(path).stem().string() << "," << doc.at("accuracy").get<double>() << ","
          << doc.at("precision").get<double>() << "," << doc.at("recall").get<double>() << ","
          << doc.at("f1").get<double>() << "," << doc.at("specificity").get<double>() << ","
          << doc.at("auc").get<double>() << "\n";
    } catch (const json::exception& e) {
      throw Error("malformed metrics JSON " + path + ": " + e.what());
    }
  }
  csv.close();
  write_manifest(out, "report", json{{"inputs", inputs}}, 0, "", {out}, watch.seconds());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"from-scratch CNN training and explainability toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train the CNN on a yes/no dataset directory");
  train_cmd->add_option("--data-dir", train_args.data_dir, "dataset root with yes/ and no/")->required();
  train_cmd->add_option("--out", train_args.out, "checkpoint output path")->required();
  train_cmd->add_option("--epochs", train_args.epochs);
  train_cmd->add_option("--batch-size", train_args.batch_size);
  train_cmd->add_option("--lr", train_args.lr);
  train_cmd->add_option("--seed", train_args.seed);
  train_cmd->add_flag("--cost-sensitive", train_args.cost_sensitive, "force the cost-sensitive branch");
  train_cmd->add_flag("--standard", train_args.standard, "force the standard branch");
  train_cmd->add_option("--weights", train_args.weights_text, "class weights w0,w1");
  train_cmd->add_option("--report", train_args.report, "per-epoch TrainReport CSV path");
  train_cmd->add_option("--input-size", train_args.input_size, "model input height/width");
  train_cmd->add_option("--conv-filters", train_args.conv_filters, "conv stage widths");
  train_cmd->add_option("--dense-units", train_args.dense_units);
  train_cmd->add_option("--split-manifest", train_args.split_manifest, "replay a split manifest");
  train_cmd->add_option("--write-split-manifest", train_args.write_split_manifest);

  EvaluateArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset split");
  eval_cmd->add_option("--model", eval_args.model)->required();
  eval_cmd->add_option("--data-dir", eval_args.data_dir)->required();
  eval_cmd->add_option("--split", eval_args.split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "validation", "test"}));
  eval_cmd->add_option("--seed", eval_args.seed, "seed used to regenerate the split");
  eval_cmd->add_option("--out", eval_args.out, "metrics JSON path")->required();
  eval_cmd->add_option("--roc", eval_args.roc, "ROC CSV path (default <out>.roc.csv)");
  eval_cmd->add_option("--threshold", eval_args.threshold);
  eval_cmd->add_option("--split-manifest", eval_args.split_manifest, "replay a split manifest");

  ExplainArgs explain_args;
  CLI::App* explain_cmd = app.add_subcommand("explain", "render an explanation overlay for one image");
  explain_cmd->add_option("--model", explain_args.model)->required();
  explain_cmd->add_option("--image", explain_args.image)->required();
  explain_cmd
      ->add_option("--method", explain_args.method,
                   "saliency|smoothgrad|grad-cam|grad-cam++|score-cam|faster-score-cam|lime|class-model|all")
      ->check(CLI::IsMember({"saliency", "smoothgrad", "grad-cam", "grad-cam++", "score-cam", "faster-score-cam",
                             "lime", "class-model", "all"}));
  explain_cmd->add_option("--class", explain_args.target_class, "auto|0|1")->check(CLI::IsMember({"auto", "0", "1"}));
  explain_cmd->add_option("--layer", explain_args.layer, "target conv layer (default: last)");
  explain_cmd->add_option("--out", explain_args.out, "overlay PNG path")->required();
  explain_cmd->add_option("--alpha", explain_args.alpha, "overlay blend factor");
  explain_cmd->add_flag("--panel", explain_args.panel, "with --method all: compose a side-by-side panel");
  explain_cmd->add_option("--seed", explain_args.seed);
  explain_cmd->add_option("--smoothgrad-samples", explain_args.cam.smoothgrad_samples);
  explain_cmd->add_option("--sigma-fraction", explain_args.cam.smoothgrad_sigma_fraction);
  explain_cmd->add_option("--top-k", explain_args.cam.scorecam_top_k);
  explain_cmd->add_option("--steps", explain_args.cam.classmodel_steps);
  explain_cmd->add_option("--lambda", explain_args.cam.classmodel_lambda);
  explain_cmd->add_option("--step-size", explain_args.cam.classmodel_step_size);
  explain_cmd->add_option("--num-regions", explain_args.lime.num_regions);
  explain_cmd->add_option("--num-samples", explain_args.lime.num_samples);
  explain_cmd->add_option("--kernel-width", explain_args.lime.kernel_width);
  explain_cmd->add_option("--ridge-lambda", explain_args.lime.ridge_lambda);
  explain_cmd->add_option("--top-regions", explain_args.lime.top_regions);
  explain_cmd->add_option("--fill-value", explain_args.lime.fill_value);

  std::vector<std::string> report_inputs;
  std::string report_out;
  CLI::App* report_cmd = app.add_subcommand("report", "collate metrics JSONs into a comparison CSV");
  report_cmd->add_option("--inputs", report_inputs, "metrics JSON files")->required()->expected(-1);
  report_cmd->add_option("--out", report_out, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2; --help exits 0
  }

  try {
    if (train_cmd->parsed()) return run_train(train_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
    if (explain_cmd->parsed()) return run_explain(explain_args);
    if (report_cmd->parsed()) return run_report(report_inputs, report_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
