// docgrid command-line tool: data generation, training, evaluation,
// augmentation preview, introspection and architecture tables.
//
// Exit codes: 0 ok, 2 usage or configuration error, 3 I/O or file format
// error, 4 numeric divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "docgrid/config.hpp"
#include "docgrid/introspection.hpp"
#include "docgrid/synthdoc.hpp"

namespace fs = std::filesystem;
using namespace docgrid;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// -------------------------------------------------------------- gen-data

struct GenArgs {
  int classes = 4;
  int per_class = 100;
  int size = 64;
  std::uint64_t seed = 0;
  std::string out;
  bool tint = false;
  double noise = SynthOptions{}.noise_sigma;
};

int cmd_gen_data(const GenArgs& a) {
  SynthOptions o;
  o.tint = a.tint;
  o.noise_sigma = a.noise;
  const fs::path manifest = generate_dataset(a.per_class, a.classes, a.seed, a.size, a.out, o);
  std::cout << "wrote " << a.classes * a.per_class << " images\nmanifest " << manifest.string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string manifest;
  long updates = 0;
  bool dump_config = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = load_experiment(a.config);
  if (a.seed) set_seed(cfg, *a.seed);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (a.updates > 0) cfg.train.total_updates = a.updates;
  cfg.validate();
  if (a.dump_config) {
    std::cout << dump_experiment(cfg);
    return 0;
  }
  const Manifest m = read_manifest(cfg.manifest);
  const ImageSet train_split = load_split(m, "train");
  const ImageSet val_split = load_split(m, "val");
  const Model init = init_params(cfg.arch_spec(m.num_classes()), cfg.seed);
  Model model = init;
  const fs::path out(cfg.output_dir);
  make_dir(out);
  write_text(out / "config.json", dump_experiment(cfg));
  TrainHooks hooks;
  if (!a.quiet)
    hooks.on_record = [](const TrainRecord& r) {
      std::printf("update %ld loss %.6f val_accuracy %.6f\n", r.update, r.loss, r.val_accuracy);
      std::fflush(stdout);
    };
  const TrainResult r = cfg.train.scales.empty() ? train(model, train_split, val_split, cfg.train, hooks)
                                                 : train_multiscale(model, train_split, val_split, cfg.train, hooks);
  write_text(out / "train.csv", r.log.csv());
  save_checkpoint(r.best, out / "best.ckpt");
  std::printf("best_update=%ld\nbest_val_accuracy=%.6f\n", r.log.best_update, r.best.meta.val_accuracy);
  std::cout << "checkpoint " << (out / "best.ckpt").string() << "\n";
  return 0;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string mode = "single";
  int views = 10;
  std::string view_kind = "none";
  std::vector<int> sizes;
  std::string config;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  EvalOptions opt;
  if (!a.config.empty()) opt = load_experiment(a.config).eval;
  opt.mode = parse_eval_mode(a.mode);
  opt.views = a.views;
  if (a.view_kind != "none" || a.config.empty()) {
    try {
      opt.view_spec.kind = parse_transform_kind(a.view_kind);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("--view-kind: ") + e.what());
    }
  }
  if (!a.sizes.empty()) opt.sizes = a.sizes;
  if (opt.views < 1) throw ConfigError("--views must be >= 1");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Preprocess pp = checkpoint_preprocess(ck);
  const Manifest m = read_manifest(a.manifest);
  const ImageSet set = load_split(m, a.split);
  if (set.empty()) throw ConfigError("split '" + a.split + "' is empty in " + a.manifest);
  const PredictionReport r = evaluate(ck.model, set, pp, opt);
  if (!a.out.empty()) {
    const fs::path out(a.out);
    make_dir(out);
    write_text(out / "predictions.csv", r.per_image_csv());
    write_text(out / "confusion.csv", r.confusion_csv());
    write_text(out / "summary.txt", r.summary());
  }
  std::cout << r.summary();
  return 0;
}

// ------------------------------------------------------- augment-preview

struct PreviewArgs {
  std::string input;
  std::string kind = "shear";
  std::optional<double> theta;
  std::string axis = "both";
  int count = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_augment_preview(const PreviewArgs& a) {
  TransformSpec spec;
  try {
    spec.kind = parse_transform_kind(a.kind);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("--kind: ") + e.what());
  }
  if (a.theta) {
    spec.shear_deg = {*a.theta, *a.theta};
    spec.rotation_deg = {*a.theta, *a.theta};
  }
  if (a.axis == "horizontal") spec.shear_axis = ShearAxis::horizontal;
  else if (a.axis == "vertical") spec.shear_axis = ShearAxis::vertical;
  else if (a.axis == "both") spec.shear_axis = ShearAxis::both;
  else throw ConfigError("--axis must be horizontal, vertical or both");
  spec.validate();
  if (a.count < 1) throw ConfigError("--count must be >= 1");

  const Tensor img = to_tensor(read_image(a.input));
  std::mt19937_64 rng(a.seed);
  std::vector<Tensor> tiles;
  for (int i = 0; i < a.count; ++i) tiles.push_back(apply_transform(img, sample_transform(spec, rng)));
  const Tensor result = a.count == 1 ? tiles.front() : tile_grid(tiles, std::min(a.count, 4), 2);
  fs::path out = a.out;
  if (out.empty()) out = fs::path(a.input).stem().string() + "_" + a.kind + ".png";
  if (out.has_parent_path()) make_dir(out.parent_path());
  write_image(to_raw(result), out);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

// ------------------------------------------------------------ introspect

struct IntrospectArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "val";
  std::string neuron;
  int topk = 9;
  std::string maps;
  std::string out = "introspect";
};

int cmd_introspect(const IntrospectArgs& a) {
  if (a.topk < 1) throw ConfigError("--topk must be >= 1");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Preprocess pp = checkpoint_preprocess(ck);
  const Manifest m = read_manifest(a.manifest);
  const ImageSet set = load_split(m, a.split);
  if (set.empty()) throw ConfigError("split '" + a.split + "' is empty in " + a.manifest);
  NeuronRef n;
  try {
    n = parse_neuron(ck.model.spec, a.neuron);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("--neuron: ") + e.what());
  }

  std::vector<Tensor> inputs(set.size()), display(set.size());
  std::vector<std::string> ids(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    display[i] = prepare_views(*set.image(i), pp).front();
    inputs[i] = finish(display[i], pp);
    ids[i] = set.id(i);
  }
  const fs::path out(a.out);
  make_dir(out);
  const auto records = top_k_patches(ck.model, inputs, ids, n, a.topk, &display);
  write_text(out / "patches.csv", patch_records_csv(records));
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(records.size()))));
  write_image(to_raw(patch_grid(records, cols)), out / "patches.png");

  std::vector<Tensor> saliency;
  for (const auto& r : records) {
    NeuronRef at = n;
    if (inputs[r.image_index].rank() == 3 && n.position == std::nullopt &&
        propagate_shapes(ck.model.spec, inputs[r.image_index].dim(1), inputs[r.image_index].dim(2))
                [static_cast<std::size_t>(n.layer)].output.size() == 3)
      at.position = std::pair{r.y, r.x};
    const Tensor s = saliency_image(deconv_visualize(ck.model, inputs[r.image_index], at));
    saliency.push_back(detail::crop(s, r.field));
  }
  write_image(to_raw(tile_grid(saliency, cols)), out / "deconv.png");

  if (!a.maps.empty()) {
    int layer = 0;
    try {
      layer = layer_index(ck.model.spec, a.maps);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("--maps: ") + e.what());
    }
    write_image(to_raw(response_map_grid(spatial_response_map(ck.model, inputs, layer))), out / "maps.png");
  }
  std::cout << patch_records_csv(records) << "wrote " << out.string() << "\n";
  return 0;
}

// -------------------------------------------------------------- arch-show

struct ArchArgs {
  int input = 227;
  int depth = 5;
  double width = 1.0;
  std::optional<double> conv_width, fc_width;
  std::vector<int> spp;
  int channels = 1;
  int classes = 16;
  bool bn = false;
  bool table = false;
  std::string config;
};

std::string shape_text(const Shape& s) {
  std::string t;
  for (std::size_t i = 0; i < s.size(); ++i) t += (i ? "x" : "") + std::to_string(s[i]);
  return t;
}

int cmd_arch_show(const ArchArgs& a) {
  if (a.table) {
    std::printf("%-6s %-14s %-6s %-8s %-6s %-6s %-6s %-6s %s\n", "input", "conv1(k/s/p)", "pool1", "conv2_k",
                "pool2", "pool5", "convw", "fcw", "final");
    for (const auto& g : geometry_table()) {
      const int f = front_end_extent(g, g.input);
      std::printf("%-6d %2d/%d/%-9d %d/%-4d %-8d %d/%-4d %d/%-4d %-6.3g %-6.3g %dx%d\n", g.input, g.conv1.kernel_h,
                  g.conv1.stride, g.conv1.pad, g.pool1.window, g.pool1.stride, g.conv2_kernel, g.pool2.window,
                  g.pool2.stride, g.pool5.window, g.pool5.stride, g.conv_width, g.fc_width, f, f);
    }
    return 0;
  }
  ArchSpec spec;
  if (!a.config.empty()) {
    const ExperimentConfig cfg = load_experiment(a.config);
    spec = cfg.arch_spec(a.classes);
  } else {
    ArchFlags f;
    f.in_channels = a.channels;
    f.classes = a.classes;
    f.use_bn = a.bn;
    f.spp_levels = a.spp;
    try {
      spec = build_alexnet(a.input, a.conv_width.value_or(a.width), a.fc_width.value_or(a.width), a.depth, f);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  const auto shapes = propagate_shapes(spec);
  std::printf("input %dx%dx%d\n", spec.channels, spec.height, spec.width);
  std::printf("%-10s %-10s %-14s %s\n", "layer", "kind", "output", "geometry");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    std::string geom;
    if (l.kind == LayerKind::conv)
      geom = "k" + std::to_string(l.conv.kernel_h) + " s" + std::to_string(l.conv.stride) + " p" + std::to_string(l.conv.pad);
    else if (l.kind == LayerKind::maxpool)
      geom = "w" + std::to_string(l.pool.window) + " s" + std::to_string(l.pool.stride);
    else if (l.kind == LayerKind::spp) {
      geom = "levels";
      for (int v : l.spp_levels) geom += " " + std::to_string(v);
    }
    std::printf("%-10s %-10s %-14s %s\n", l.name.c_str(), to_string(l.kind).c_str(), shape_text(shapes[i].output).c_str(),
                geom.c_str());
  }
  const auto [fh, fw] = final_conv_map(spec, spec.height, spec.width);
  std::printf("final conv map %dx%d\n", fh, fw);
  std::printf("fc input %d\n", fc_input_length(spec, spec.height, spec.width));
  std::printf("parameters %zu\n", parameter_count(zero_params(spec)));
  return 0;
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> v;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse size list '" + text + "'");
    }
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"docgrid: CNN toolkit for document image classification"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: DOCGRID_THREADS or hardware)")->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic document dataset");
  gen_cmd->add_option("--classes", gen.classes, "number of layout classes (1-4)")->check(CLI::Range(1, 4));
  gen_cmd->add_option("--per-class", gen.per_class, "images per class")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--size", gen.size, "image side in pixels")->check(CLI::Range(32, 4096));
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_flag("--tint", gen.tint, "render tinted RGB pages");
  gen_cmd->add_option("--noise", gen.noise, "scan noise sigma")->check(CLI::Range(0.0, 1.0));

  TrainArgs tr;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "train a network from an experiment config");
  train_cmd->add_option("config", tr.config, "experiment config (JSON)")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "override the config seed");
  train_cmd->add_option("--out", tr.out, "override the output directory");
  train_cmd->add_option("--manifest", tr.manifest, "override the dataset manifest");
  train_cmd->add_option("--updates", tr.updates, "override the number of updates")->check(CLI::PositiveNumber);
  train_cmd->add_flag("--dump-config", tr.dump_config, "print the effective config and exit");
  train_cmd->add_flag("--quiet", tr.quiet, "no progress lines");

  EvalArgs ev;
  std::string eval_sizes;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "dataset manifest")->required();
  eval_cmd->add_option("--split", ev.split, "split to evaluate");
  eval_cmd->add_option("--mode", ev.mode, "single|1x, multiview|10x or multiscale");
  eval_cmd->add_option("--views", ev.views, "views per image in multiview mode");
  eval_cmd->add_option("--view-kind", ev.view_kind, "transform kind for multiview views");
  eval_cmd->add_option("--sizes", eval_sizes, "comma-separated sizes for multiscale mode");
  eval_cmd->add_option("--config", ev.config, "take evaluation settings from an experiment config");
  eval_cmd->add_option("--out", ev.out, "directory for predictions.csv, confusion.csv, summary.txt");

  PreviewArgs pv;
  double theta = 0;
  auto* preview_cmd = app.add_subcommand("augment-preview", "write transformed copies of an image as PNG");
  preview_cmd->add_option("input", pv.input, "input image (PGM/PPM/PNG)")->required();
  preview_cmd->add_option("--kind", pv.kind, "transform kind");
  auto* theta_opt = preview_cmd->add_option("--theta", theta, "fixed angle in degrees (shear, rotation)");
  preview_cmd->add_option("--axis", pv.axis, "shear axis: horizontal, vertical or both");
  preview_cmd->add_option("--count", pv.count, "number of samples (tiled when > 1)");
  preview_cmd->add_option("--seed", pv.seed, "sampling seed");
  preview_cmd->add_option("--out", pv.out, "output PNG");

  IntrospectArgs in;
  auto* intro_cmd = app.add_subcommand("introspect", "top-k patches, deconv views and response maps");
  intro_cmd->add_option("--checkpoint", in.checkpoint, "checkpoint file")->required();
  intro_cmd->add_option("--manifest", in.manifest, "dataset manifest")->required();
  intro_cmd->add_option("--split", in.split, "split to scan");
  intro_cmd->add_option("--neuron", in.neuron, "layer:channel, e.g. conv5:12")->required();
  intro_cmd->add_option("--topk", in.topk, "number of patches");
  intro_cmd->add_option("--maps", in.maps, "layer whose mean response maps are written");
  intro_cmd->add_option("--out", in.out, "output directory");

  ArchArgs ar;
  std::string arch_spp;
  double conv_width = 0, fc_width = 0;
  auto* arch_cmd = app.add_subcommand("arch-show", "print the layer table of a network");
  arch_cmd->add_option("--input", ar.input, "square input size");
  arch_cmd->add_option("--depth", ar.depth, "number of conv layers");
  arch_cmd->add_option("--width", ar.width, "width factor for conv and fc layers");
  auto* cw_opt = arch_cmd->add_option("--conv-width", conv_width, "conv width factor");
  auto* fw_opt = arch_cmd->add_option("--fc-width", fc_width, "fc width factor");
  arch_cmd->add_option("--spp", arch_spp, "comma-separated SPP levels");
  arch_cmd->add_option("--channels", ar.channels, "input channels");
  arch_cmd->add_option("--classes", ar.classes, "output classes");
  arch_cmd->add_flag("--bn", ar.bn, "batch normalization after conv layers");
  arch_cmd->add_flag("--table", ar.table, "print the input-size geometry table");
  arch_cmd->add_option("--config", ar.config, "take the architecture from an experiment config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (threads > 0) set_num_threads(threads);
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) {
      if (*seed_opt) tr.seed = train_seed;
      return cmd_train(tr);
    }
    if (*eval_cmd) {
      if (!eval_sizes.empty()) ev.sizes = parse_sizes(eval_sizes);
      return cmd_eval(ev);
    }
    if (*preview_cmd) {
      if (*theta_opt) pv.theta = theta;
      return cmd_augment_preview(pv);
    }
    if (*intro_cmd) return cmd_introspect(in);
    if (*arch_cmd) {
      if (*cw_opt) ar.conv_width = conv_width;
      if (*fw_opt) ar.fc_width = fc_width;
      if (!arch_spp.empty()) ar.spp = parse_sizes(arch_spp);
      return cmd_arch_show(ar);
    }
  } catch (const DivergedTraining& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CorruptCheckpoint& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
