#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "docgrid/config.hpp"

using namespace docgrid;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(DOCGRID_SOURCE_DIR) / "configs";

std::string error_of(const std::string& text) {
  try {
    parse_experiment(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool mentions(const std::string& msg, const std::string& what) { return msg.find(what) != std::string::npos; }

}  // namespace

TEST(ExperimentConfig, MinimalConfigTakesDefaults) {
  const auto c = parse_experiment(R"({"manifest": "m.csv"})");
  EXPECT_EQ(c.manifest, "m.csv");
  EXPECT_EQ(c.arch.depth, 5);
  EXPECT_EQ(c.eval.mode, EvalMode::single);
  EXPECT_EQ(c.train.batch_size, TrainConfig{}.batch_size);
}

TEST(ExperimentConfig, DumpReloadsToEqualConfig) {
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    SCOPED_TRACE(entry.path().string());
    const auto c = load_experiment(entry.path());
    const auto again = parse_experiment(dump_experiment(c));
    EXPECT_EQ(again, c);
    EXPECT_EQ(dump_experiment(again), dump_experiment(c));
  }
}

TEST(ExperimentConfig, NonDefaultFieldsSurviveRoundTrip) {
  const auto c = parse_experiment(R"({
    "manifest": "x/m.csv", "output_dir": "o", "seed": 42,
    "preprocess": {"representation": "S", "surf_grid": 8, "ar_policy": {"kind": "variable", "pixel_budget": 4096}, "input": [96, 96]},
    "arch": {"depth": 3, "conv_width": 0.5, "fc_width": 0.25, "lrn": false, "batchnorm": true, "dropout": false, "spp_levels": [1, 2], "classes": 7},
    "train": {"batch_size": 4, "total_updates": 9, "base_lr": 0.1, "lr_step": 3, "lr_decay": 0.5, "momentum": 0.5,
              "weight_decay": 0, "fraction": 0.5, "val_interval": 2, "scales": [64, 96],
              "augmentation": {"transforms": [{"kind": "rotation", "rotation_deg": [-5, 5]}, {"kind": "shear", "shear_axis": "vertical"}], "combine": true}},
    "eval": {"mode": "multiscale", "sizes": [64, 96, 128], "views": 3, "view_transform": {"kind": "crop"}}
  })");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.train.preprocess, c.preprocess);
  EXPECT_EQ(c.arch.spp_levels, (std::vector<int>{1, 2}));
  EXPECT_EQ(c.train.augmentation.transforms.size(), 2u);
  EXPECT_EQ(c.eval.sizes, (std::vector<int>{64, 96, 128}));
  EXPECT_EQ(parse_experiment(dump_experiment(c)), c);
}

TEST(ExperimentConfig, WidthSetsBothFactors) {
  const auto c = parse_experiment(R"({"manifest": "m", "arch": {"width": 0.3}})");
  EXPECT_DOUBLE_EQ(c.arch.conv_width, 0.3);
  EXPECT_DOUBLE_EQ(c.arch.fc_width, 0.3);
}

TEST(ExperimentConfig, ScalarInputMeansSquare) {
  const auto c = parse_experiment(R"({"manifest": "m", "preprocess": {"input": 100}})");
  EXPECT_EQ(c.preprocess.input_h, 100);
  EXPECT_EQ(c.preprocess.input_w, 100);
}

TEST(ExperimentConfig, VariableAspectWithoutSppNamesBothFields) {
  const auto msg = error_of(R"({"manifest": "m", "preprocess": {"ar_policy": {"kind": "variable"}}})");
  EXPECT_TRUE(mentions(msg, "ar_policy")) << msg;
  EXPECT_TRUE(mentions(msg, "spp_levels")) << msg;
}

TEST(ExperimentConfig, MultiscaleWithoutSppNamesBothFields) {
  auto msg = error_of(R"({"manifest": "m", "train": {"scales": [48, 64]}})");
  EXPECT_TRUE(mentions(msg, "train.scales")) << msg;
  EXPECT_TRUE(mentions(msg, "spp_levels")) << msg;
  msg = error_of(R"({"manifest": "m", "eval": {"mode": "multiscale", "sizes": [48, 64, 96]}})");
  EXPECT_TRUE(mentions(msg, "eval.mode")) << msg;
  EXPECT_TRUE(mentions(msg, "spp_levels")) << msg;
}

TEST(ExperimentConfig, ErrorsCarryFieldPaths) {
  EXPECT_TRUE(mentions(error_of(R"({"manifest": "m", "train": {"batch_size": "big"}})"), "train.batch_size"));
  EXPECT_TRUE(mentions(error_of(R"({"manifest": "m", "train": {"base_lr": -1}})"), "train.base_lr"));
  EXPECT_TRUE(mentions(error_of(R"({"manifest": "m", "arch": {"depth": 1}})"), "arch"));
  EXPECT_TRUE(mentions(error_of(R"({"manifest": "m", "eval": {"mode": "20x"}})"), "eval.mode"));
  EXPECT_TRUE(mentions(error_of(R"({"manifest": "m", "preprocess": {"ar_policy": {"kind": "fold"}}})"), "preprocess.ar_policy"));
  EXPECT_TRUE(mentions(error_of(R"({"seed": 1})"), "manifest"));
}

TEST(ExperimentConfig, UnknownKeysRejected) {
  EXPECT_TRUE(mentions(error_of(R"({"manifest": "m", "learning_rate": 0.1})"), "learning_rate"));
  EXPECT_TRUE(mentions(error_of(R"({"manifest": "m", "train": {"lr": 0.1}})"), "train.lr"));
  EXPECT_TRUE(mentions(error_of(R"({"manifest": "m", "arch": {"deep": 3}})"), "arch.deep"));
}

TEST(ExperimentConfig, MalformedJsonIsConfigError) {
  EXPECT_THROW(parse_experiment("{\"manifest\": "), ConfigError);
  EXPECT_THROW(parse_experiment("[]"), ConfigError);
}

TEST(ExperimentConfig, MissingFileIsIoError) {
  EXPECT_THROW(load_experiment("/nonexistent/cfg.json"), IoError);
}

TEST(ExperimentConfig, SetSeedUpdatesTrainSeed) {
  auto c = parse_experiment(R"({"manifest": "m", "seed": 3})");
  set_seed(c, 11);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.train.seed, 11u);
}

TEST(ExperimentConfig, ArchSpecUsesManifestClassesUnlessPinned) {
  auto c = parse_experiment(R"({"manifest": "m", "preprocess": {"input": 64}, "arch": {"depth": 2, "width": 0.1}})");
  EXPECT_EQ(c.arch_spec(4).layers.back().name, "prob");
  EXPECT_EQ(propagate_shapes(c.arch_spec(4)).back().output, (Shape{4}));
  c.arch.classes = 9;
  EXPECT_EQ(propagate_shapes(c.arch_spec(4)).back().output, (Shape{9}));
}

TEST(ShippedProfiles, RvlCdipMatchesQuotedSchedule) {
  const auto c = load_experiment(kConfigs / "rvlcdip.cfg");
  EXPECT_EQ(c.train.batch_size, 32);
  EXPECT_EQ(c.train.total_updates, 500000);
  EXPECT_DOUBLE_EQ(c.train.base_lr, 0.003);
  EXPECT_EQ(c.train.lr_step, 150000);
  EXPECT_DOUBLE_EQ(c.train.lr_decay, 0.1);
}

TEST(ShippedProfiles, AndocMatchesQuotedSchedule) {
  const auto c = load_experiment(kConfigs / "andoc.cfg");
  EXPECT_EQ(c.train.batch_size, 128);
  EXPECT_EQ(c.train.total_updates, 250000);
  EXPECT_DOUBLE_EQ(c.train.base_lr, 0.005);
  EXPECT_EQ(c.train.lr_step, 100000);
  EXPECT_DOUBLE_EQ(c.train.lr_decay, 0.1);
}

TEST(ShippedProfiles, MultiscaleProfileAveragesThreeSizes) {
  const auto c = load_experiment(kConfigs / "rvlcdip-multiscale.cfg");
  EXPECT_EQ(c.eval.mode, EvalMode::multiscale);
  EXPECT_EQ(c.eval.sizes, (std::vector<int>{320, 384, 512}));
  EXPECT_FALSE(c.arch.spp_levels.empty());
}

TEST(ShippedProfiles, SynthShearIsDeskScale) {
  const auto c = load_experiment(kConfigs / "synth-shear.cfg");
  EXPECT_EQ(c.arch.depth, 2);
  EXPECT_DOUBLE_EQ(c.arch.conv_width, 0.1);
  EXPECT_EQ(c.preprocess.input_h, 64);
  EXPECT_EQ(c.train.total_updates, 2000);
  ASSERT_EQ(c.train.augmentation.transforms.size(), 1u);
  EXPECT_EQ(c.train.augmentation.transforms[0].kind, TransformKind::shear);
}
