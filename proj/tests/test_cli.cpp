#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "docgrid/config.hpp"
#include "docgrid/imaging.hpp"

using namespace docgrid;
namespace fs = std::filesystem;

namespace {

const std::string kCli = DOCGRID_CLI;
const fs::path kConfigs = fs::path(DOCGRID_SOURCE_DIR) / "configs";

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  FILE* p = popen((kCli + " " + args + " 2>&1").c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small dataset and a short training run shared by the tests of one process.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("docgrid_cli_" + std::to_string(getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    ASSERT_EQ(run("gen-data --classes 4 --per-class 20 --size 64 --seed 5 --out " + q(root_ / "data")).code, 0);
    manifest_ = root_ / "data" / "manifest.csv";
    config_ = root_ / "small.cfg";
    spit(config_, R"({
      "manifest": ")" + manifest_.string() + R"(",
      "seed": 2,
      "preprocess": {"input": 64},
      "arch": {"depth": 2, "width": 0.1},
      "train": {"batch_size": 8, "total_updates": 20, "base_lr": 0.01, "lr_step": 1000, "val_interval": 5}
    })");
    ASSERT_EQ(run("--threads 1 train --quiet " + q(config_) + " --out " + q(root_ / "run")).code, 0);
    checkpoint_ = root_ / "run" / "best.ckpt";
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static inline fs::path root_, manifest_, config_, checkpoint_;
};

std::string tree_digest(const fs::path& dir) {
  std::string all;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + slurp(f);
  return all;
}

}  // namespace

TEST_F(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run("").code, 2); }

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run("--help").code, 0); }

TEST_F(Cli, GenDataWritesManifestAndImages) {
  const auto lines = slurp(manifest_);
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 81);
}

TEST_F(Cli, GenDataMissingOutIsUsageError) {
  EXPECT_EQ(run("gen-data --classes 4 --per-class 2").code, 2);
}

TEST_F(Cli, GenDataRerunGivesIdenticalTree) {
  ASSERT_EQ(run("gen-data --classes 2 --per-class 3 --size 48 --seed 9 --out " + q(root_ / "g1")).code, 0);
  ASSERT_EQ(run("gen-data --classes 2 --per-class 3 --size 48 --seed 9 --out " + q(root_ / "g2")).code, 0);
  EXPECT_EQ(tree_digest(root_ / "g1"), tree_digest(root_ / "g2"));
}

TEST_F(Cli, TrainWritesCheckpointLogAndConfig) {
  EXPECT_TRUE(fs::exists(checkpoint_));
  EXPECT_TRUE(fs::exists(root_ / "run" / "config.json"));
  const auto log = slurp(root_ / "run" / "train.csv");
  EXPECT_EQ(log.rfind("update,loss,val_accuracy\n", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 5);
}

TEST_F(Cli, TrainIsByteReproducibleWithOneThread) {
  ASSERT_EQ(run("--threads 1 train --quiet " + q(config_) + " --out " + q(root_ / "again")).code, 0);
  EXPECT_EQ(slurp(root_ / "again" / "train.csv"), slurp(root_ / "run" / "train.csv"));
  EXPECT_EQ(slurp(root_ / "again" / "best.ckpt"), slurp(checkpoint_));
}

TEST_F(Cli, TrainPrintsProgress) {
  const auto r = run("--threads 1 train " + q(config_) + " --out " + q(root_ / "loud") + " --updates 10");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("update 5 loss"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("best_val_accuracy="), std::string::npos) << r.out;
}

TEST_F(Cli, SeedFlagOverridesConfig) {
  const auto r = run("train " + q(config_) + " --seed 77 --dump-config");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(parse_experiment(r.out).seed, 77u);
  EXPECT_EQ(parse_experiment(r.out).train.seed, 77u);
}

TEST_F(Cli, DumpConfigReloadsToEqualConfig) {
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    SCOPED_TRACE(entry.path().string());
    const auto r = run("train " + q(entry.path()) + " --dump-config");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(parse_experiment(r.out), load_experiment(entry.path()));
    spit(root_ / "dumped.cfg", r.out);
    EXPECT_EQ(run("train " + q(root_ / "dumped.cfg") + " --dump-config").out, r.out);
  }
}

TEST_F(Cli, InvalidConfigNamesFieldsAndExitsTwo) {
  spit(root_ / "bad.cfg", R"({"manifest": "m.csv", "preprocess": {"ar_policy": {"kind": "variable"}}})");
  auto r = run("train " + q(root_ / "bad.cfg"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("ar_policy"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("spp_levels"), std::string::npos) << r.out;
  spit(root_ / "bad2.cfg", R"({"manifest": "m.csv", "train": {"batch_size": 0}})");
  r = run("train " + q(root_ / "bad2.cfg"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("train.batch_size"), std::string::npos) << r.out;
}

TEST_F(Cli, MissingConfigIsIoError) { EXPECT_EQ(run("train " + q(root_ / "nope.cfg")).code, 3); }

TEST_F(Cli, DivergenceExitsFour) {
  const auto r = run("train --quiet " + q(config_) + " --out " + q(root_ / "div") + " --updates 200 --lr 1e12");
  EXPECT_EQ(r.code, 2);  // unknown flag
  auto cfg = load_experiment(config_);
  cfg.train.base_lr = 1e12;
  cfg.train.total_updates = 200;
  spit(root_ / "div.cfg", dump_experiment(cfg));
  const auto d = run("train --quiet " + q(root_ / "div.cfg") + " --out " + q(root_ / "div"));
  EXPECT_EQ(d.code, 4) << d.out;
}

TEST_F(Cli, EvalPrintsAccuracyAndWritesReports) {
  const auto r = run("eval --checkpoint " + q(checkpoint_) + " --manifest " + q(manifest_) + " --out " + q(root_ / "ev"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("accuracy=", 0), 0u) << r.out;
  for (const char* f : {"predictions.csv", "confusion.csv", "summary.txt"}) EXPECT_TRUE(fs::exists(root_ / "ev" / f)) << f;
}

TEST_F(Cli, EvalSingleAndIdentityTenViewAgree) {
  const auto base = "eval --checkpoint " + q(checkpoint_) + " --manifest " + q(manifest_);
  const auto one = run(base + " --mode 1x");
  const auto ten = run(base + " --mode 10x --view-kind none");
  ASSERT_EQ(one.code, 0);
  ASSERT_EQ(ten.code, 0);
  EXPECT_EQ(one.out.substr(0, one.out.find('\n')), ten.out.substr(0, ten.out.find('\n')));
}

TEST_F(Cli, EvalMultiscaleWithoutSppExitsTwo) {
  EXPECT_EQ(run("eval --checkpoint " + q(checkpoint_) + " --manifest " + q(manifest_) + " --mode multiscale --sizes 48,64,96").code, 2);
}

TEST_F(Cli, EvalBadCheckpointExitsThree) {
  EXPECT_EQ(run("eval --checkpoint " + q(root_ / "none.ckpt") + " --manifest " + q(manifest_)).code, 3);
  auto bytes = slurp(checkpoint_);
  bytes[bytes.size() / 2] ^= 0x5a;
  spit(root_ / "corrupt.ckpt", bytes);
  EXPECT_EQ(run("eval --checkpoint " + q(root_ / "corrupt.ckpt") + " --manifest " + q(manifest_)).code, 3);
}

TEST_F(Cli, AugmentPreviewWritesShearedPng) {
  const auto input = root_ / "data" / "letter" / "letter_00000.pgm";
  const auto out = root_ / "sheared.png";
  ASSERT_EQ(run("augment-preview --kind shear --theta 10 " + q(input) + " --out " + q(out)).code, 0);
  const auto a = read_image(input), b = read_image(out);
  EXPECT_EQ(b.height, a.height);
  EXPECT_EQ(b.width, a.width);
  EXPECT_NE(b.samples, a.samples);
  EXPECT_EQ(run("augment-preview --kind twirl " + q(input)).code, 2);
}

TEST_F(Cli, IntrospectWritesTopNineGrid) {
  const auto r = run("introspect --checkpoint " + q(checkpoint_) + " --manifest " + q(manifest_) +
                     " --split train --neuron conv2:1 --topk 9 --maps relu2 --out " + q(root_ / "intro"));
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"patches.png", "patches.csv", "deconv.png", "maps.png"})
    EXPECT_TRUE(fs::exists(root_ / "intro" / f)) << f;
  const auto csv = slurp(root_ / "intro" / "patches.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
  const auto grid = read_image(root_ / "intro" / "patches.png");
  int cell_h = 0, cell_w = 0;
  std::stringstream rows(csv);
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::vector<int> v;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) v.push_back(std::atoi(cell.c_str()));
    cell_h = std::max(cell_h, v.at(7));
    cell_w = std::max(cell_w, v.at(8));
  }
  EXPECT_EQ(grid.height, 1 + 3 * (cell_h + 1));
  EXPECT_EQ(grid.width, 1 + 3 * (cell_w + 1));
  EXPECT_EQ(run("introspect --checkpoint " + q(checkpoint_) + " --manifest " + q(manifest_) +
                " --neuron conv9:1 --out " + q(root_ / "intro2"))
                .code,
            2);
}

TEST_F(Cli, ArchShowPrintsSixBySixFinalMap) {
  for (int input : {227, 384, 512, 64}) {
    const auto r = run("arch-show --input " + std::to_string(input));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("final conv map 6x6"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("conv5"), std::string::npos);
  }
  const auto t = run("arch-show --table");
  ASSERT_EQ(t.code, 0);
  EXPECT_EQ(std::count(t.out.begin(), t.out.end(), '\n'), 1 + static_cast<long>(geometry_table().size()));
  EXPECT_EQ(run("arch-show --input 0").code, 2);
}

TEST_F(Cli, ShippedShearConfigTrainsToCompletion) {
  const auto r = run("train --quiet " + q(kConfigs / "synth-shear.cfg") + " --manifest " + q(manifest_) + " --out " +
                     q(root_ / "shear"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(root_ / "shear" / "best.ckpt"));
  const auto log = slurp(root_ / "shear" / "train.csv");
  EXPECT_NE(log.find("\n2000,"), std::string::npos);
}
