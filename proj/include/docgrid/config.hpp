#ifndef DOCGRID_CONFIG_HPP
#define DOCGRID_CONFIG_HPP

// Declarative experiment description read by the command-line tool.
//
//   {
//     "manifest": "data/manifest.csv",
//     "output_dir": "runs/shear",
//     "seed": 1,
//     "preprocess": {"representation": "G", "ar_policy": {"kind": "warp"}, "input": [64, 64]},
//     "arch": {"depth": 2, "conv_width": 0.1, "fc_width": 0.1, "spp_levels": []},
//     "train": {"batch_size": 32, "total_updates": 2000, "base_lr": 0.01, ...},
//     "eval": {"mode": "single"}
//   }
//
// Every section and key is optional except "manifest"; unknown keys are
// rejected. Errors name the offending field path.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "docgrid/arch.hpp"
#include "docgrid/inference.hpp"
#include "docgrid/trainer.hpp"

namespace docgrid {

NLOHMANN_JSON_SERIALIZE_ENUM(EvalMode, {{EvalMode::single, "single"},
                                        {EvalMode::multiview, "multiview"},
                                        {EvalMode::multiscale, "multiscale"}})

// Accepts the table-column spellings 1x and 10x too.
inline EvalMode parse_eval_mode(const std::string& s) {
  if (s == "single" || s == "1x") return EvalMode::single;
  if (s == "multiview" || s == "10x") return EvalMode::multiview;
  if (s == "multiscale") return EvalMode::multiscale;
  throw ConfigError("unknown evaluation mode '" + s + "' (single/1x, multiview/10x, multiscale)");
}

inline void to_json(nlohmann::json& j, const EvalOptions& o) {
  j = {{"mode", o.mode}, {"views", o.views}, {"view_transform", o.view_spec}, {"sizes", o.sizes}};
}

struct ArchParams {
  int depth = 5;
  double conv_width = 1.0;
  double fc_width = 1.0;
  bool lrn = true;
  bool batchnorm = false;
  bool dropout = true;
  float keep_prob = 0.5f;
  std::vector<int> spp_levels;
  int classes = 0;  // 0: taken from the manifest

  bool operator==(const ArchParams&) const = default;
};

inline void to_json(nlohmann::json& j, const ArchParams& a) {
  j = {{"depth", a.depth},         {"conv_width", a.conv_width}, {"fc_width", a.fc_width},
       {"lrn", a.lrn},             {"batchnorm", a.batchnorm},   {"dropout", a.dropout},
       {"keep_prob", a.keep_prob}, {"spp_levels", a.spp_levels}, {"classes", a.classes}};
}

struct ExperimentConfig {
  std::string manifest;
  std::string output_dir = "runs/experiment";
  std::uint64_t seed = 0;
  Preprocess preprocess;
  ArchParams arch;
  TrainConfig train;  // preprocess and seed mirror the fields above
  EvalOptions eval;

  bool operator==(const ExperimentConfig& o) const {
    return manifest == o.manifest && output_dir == o.output_dir && seed == o.seed && preprocess == o.preprocess &&
           arch == o.arch && train == o.train && eval.mode == o.eval.mode && eval.views == o.eval.views &&
           eval.view_spec == o.eval.view_spec && eval.sizes == o.eval.sizes;
  }

  ArchSpec arch_spec(int classes) const {
    ArchFlags f;
    f.use_lrn = arch.lrn;
    f.use_bn = arch.batchnorm;
    f.use_dropout = arch.dropout;
    f.keep_prob = arch.keep_prob;
    f.spp_levels = arch.spp_levels;
    f.in_channels = preprocess.channels();
    f.classes = arch.classes > 0 ? arch.classes : classes;
    return build_alexnet(preprocess.input_h, arch.conv_width, arch.fc_width, arch.depth, f);
  }

  // Field and cross-field checks; ConfigError names the fields involved.
  void validate() const {
    if (manifest.empty()) throw ConfigError("manifest: required");
    if (preprocess.input_h != preprocess.input_w)
      throw ConfigError("preprocess.input: the network builder needs a square input");
    try {
      preprocess.representation.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("preprocess.representation: ") + e.what());
    }
    if (arch.classes < 0) throw ConfigError("arch.classes must be >= 0");
    const bool spp = !arch.spp_levels.empty();
    if (preprocess.ar.kind == ARKind::variable && !spp)
      throw ConfigError("preprocess.ar_policy.kind=variable requires arch.spp_levels (variable input sizes need SPP)");
    if (!train.scales.empty() && !spp)
      throw ConfigError("train.scales requires arch.spp_levels (multi-scale training needs SPP)");
    if (eval.mode == EvalMode::multiscale) {
      if (!spp) throw ConfigError("eval.mode=multiscale requires arch.spp_levels");
      if (eval.sizes.empty()) throw ConfigError("eval.sizes: multiscale evaluation needs sizes");
    }
    if (eval.views < 1) throw ConfigError("eval.views must be >= 1");
    try {
      eval.view_spec.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("eval.view_transform: ") + e.what());
    }
    try {
      train.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("train.") + e.what());
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("train.") + e.what());
    }
    try {
      (void)propagate_shapes(arch_spec(2));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("arch: ") + e.what());
    }
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json pp = c.preprocess;
  pp.erase("channel_means");
  nlohmann::json train = c.train;
  train.erase("seed");
  j = {{"manifest", c.manifest}, {"output_dir", c.output_dir}, {"seed", c.seed}, {"preprocess", pp},
       {"arch", c.arch},         {"train", train},             {"eval", c.eval}};
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError((where.empty() ? "" : where + ".") + k + ": unknown key");
}

// Reads j[key] into `field` when present, naming the field path on failure.
template <class T>
void read_field(const nlohmann::json& j, const std::string& where, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(field);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, "", {"manifest", "output_dir", "seed", "preprocess", "arch", "train", "eval"});
  ExperimentConfig c;
  detail::read_field(j, "config", "manifest", c.manifest);
  detail::read_field(j, "config", "output_dir", c.output_dir);
  detail::read_field(j, "config", "seed", c.seed);

  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    detail::reject_unknown(p, "preprocess", {"representation", "surf_grid", "ar_policy", "input"});
    std::string rep = c.preprocess.representation.str();
    int grid = c.preprocess.representation.surf_grid;
    detail::read_field(p, "preprocess", "representation", rep);
    detail::read_field(p, "preprocess", "surf_grid", grid);
    try {
      c.preprocess.representation = RepresentationSpec::parse(rep, grid);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("preprocess.representation: ") + e.what());
    }
    detail::read_field(p, "preprocess", "ar_policy", c.preprocess.ar);
    if (p.contains("input")) {
      const auto& in = p.at("input");
      if (in.is_number_integer()) {
        c.preprocess.input_h = c.preprocess.input_w = in.get<int>();
      } else if (in.is_array() && in.size() == 2 && in[0].is_number_integer() && in[1].is_number_integer()) {
        c.preprocess.input_h = in[0].get<int>();
        c.preprocess.input_w = in[1].get<int>();
      } else {
        throw ConfigError("preprocess.input: expected a size or [height, width]");
      }
    }
  }

  if (j.contains("arch")) {
    const auto& a = j.at("arch");
    detail::reject_unknown(a, "arch", {"depth", "conv_width", "fc_width", "width", "lrn", "batchnorm", "dropout",
                                       "keep_prob", "spp_levels", "classes"});
    if (a.contains("width")) {
      detail::read_field(a, "arch", "width", c.arch.conv_width);
      c.arch.fc_width = c.arch.conv_width;
    }
    detail::read_field(a, "arch", "depth", c.arch.depth);
    detail::read_field(a, "arch", "conv_width", c.arch.conv_width);
    detail::read_field(a, "arch", "fc_width", c.arch.fc_width);
    detail::read_field(a, "arch", "lrn", c.arch.lrn);
    detail::read_field(a, "arch", "batchnorm", c.arch.batchnorm);
    detail::read_field(a, "arch", "dropout", c.arch.dropout);
    detail::read_field(a, "arch", "keep_prob", c.arch.keep_prob);
    detail::read_field(a, "arch", "spp_levels", c.arch.spp_levels);
    detail::read_field(a, "arch", "classes", c.arch.classes);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(t, "train", {"batch_size", "total_updates", "base_lr", "lr_step", "lr_decay", "momentum",
                                        "weight_decay", "augmentation", "scales", "fraction", "val_interval"});
    auto& tc = c.train;
    detail::read_field(t, "train", "batch_size", tc.batch_size);
    detail::read_field(t, "train", "total_updates", tc.total_updates);
    detail::read_field(t, "train", "base_lr", tc.base_lr);
    detail::read_field(t, "train", "lr_step", tc.lr_step);
    detail::read_field(t, "train", "lr_decay", tc.lr_decay);
    detail::read_field(t, "train", "momentum", tc.momentum);
    detail::read_field(t, "train", "weight_decay", tc.weight_decay);
    detail::read_field(t, "train", "augmentation", tc.augmentation);
    detail::read_field(t, "train", "scales", tc.scales);
    detail::read_field(t, "train", "fraction", tc.fraction);
    detail::read_field(t, "train", "val_interval", tc.val_interval);
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::reject_unknown(e, "eval", {"mode", "views", "view_transform", "sizes"});
    std::string mode = "single";
    detail::read_field(e, "eval", "mode", mode);
    try {
      c.eval.mode = parse_eval_mode(mode);
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("eval.mode: ") + ex.what());
    }
    detail::read_field(e, "eval", "views", c.eval.views);
    detail::read_field(e, "eval", "view_transform", c.eval.view_spec);
    detail::read_field(e, "eval", "sizes", c.eval.sizes);
  }

  c.train.preprocess = c.preprocess;
  c.train.seed = c.seed;
  c.validate();
  return c;
}

inline ExperimentConfig parse_experiment(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return experiment_from_json(j);
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read config " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return parse_experiment(s.str());
}

inline std::string dump_experiment(const ExperimentConfig& c) { return nlohmann::json(c).dump(2) + "\n"; }

// Keeps the seed copies in sync after a command-line override.
inline void set_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.train.seed = seed;
}

}  // namespace docgrid

#endif  // DOCGRID_CONFIG_HPP
