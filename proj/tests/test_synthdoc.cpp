#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "docgrid/synthdoc.hpp"

using namespace docgrid;

namespace {

int full_width_dark_rows(const Tensor& img) {
  int rows = 0;
  for (int y = 0; y < img.dim(1); ++y) {
    bool dark = true;
    for (int x = 0; x < img.dim(2) && dark; ++x) dark = img.at(0, y, x) < 0.5f;
    rows += dark;
  }
  return rows;
}

double mean(const Tensor& t) {
  double s = 0;
  for (float v : t.vec()) s += v;
  return s / static_cast<double>(t.size());
}

double distance(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (static_cast<double>(a[i]) - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(GenerateSample, BitDeterministic) {
  for (const auto& c : synth_class_names()) {
    EXPECT_TRUE(bit_identical(generate_sample(c, 5, 64).image, generate_sample(c, 5, 64).image)) << c;
    EXPECT_FALSE(bit_identical(generate_sample(c, 5, 64).image, generate_sample(c, 6, 64).image)) << c;
  }
}

TEST(GenerateSample, FormsHaveRuledRowsLettersDoNot) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    EXPECT_GE(full_width_dark_rows(generate_sample("form", s, 64).image), 3) << s;
    EXPECT_EQ(full_width_dark_rows(generate_sample("letter", s, 64).image), 0) << s;
  }
}

TEST(GenerateSample, MostlyWhitePages) {
  for (const auto& c : synth_class_names())
    for (std::uint64_t s = 0; s < 50; ++s) {
      const SynthSample smp = generate_sample(c, s, 64);
      const double m = mean(smp.image);
      EXPECT_GT(m, 0.6) << c << " " << s;
      EXPECT_LT(m, 0.99) << c << " " << s;
      for (float v : smp.image.vec()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    }
}

TEST(GenerateSample, Errors) {
  EXPECT_THROW(generate_sample("invoice", 1, 64), InvalidArgument);
  EXPECT_THROW(generate_sample("letter", 1, 31), InvalidArgument);
}

TEST(GenerateSample, TintGivesThreeChannels) {
  SynthOptions o;
  o.tint = true;
  const auto smp = generate_sample("memo", 3, 48, o);
  EXPECT_EQ(smp.image.shape(), (Shape{3, 48, 48}));
}

TEST(GenerateSample, InterClassDistanceExceedsIntraClass) {
  std::vector<std::vector<Tensor>> imgs(4);
  for (int c = 0; c < 4; ++c)
    for (std::uint64_t s = 0; s < 50; ++s)
      imgs[static_cast<std::size_t>(c)].push_back(generate_sample(synth_class_names()[static_cast<std::size_t>(c)], s, 64).image);
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b)
      for (std::size_t i = 0; i < 50; i += 5)
        for (std::size_t j = 1; j < 50; j += 5) {
          const double d = distance(imgs[static_cast<std::size_t>(a)][i], imgs[static_cast<std::size_t>(b)][j]);
          (a == b ? intra : inter) += d;
          ++(a == b ? n_intra : n_inter);
        }
  EXPECT_GT(inter / n_inter, intra / n_intra);
}

TEST(GenerateDataset, SplitsAndFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "docgrid_synth_a";
  std::filesystem::remove_all(dir);
  const auto manifest_path = generate_dataset(100, 4, 7, 32, dir);
  const Manifest m = read_manifest(manifest_path);
  ASSERT_EQ(m.entries.size(), 400u);
  std::map<std::string, std::map<int, int>> per_split;
  for (const auto& e : m.entries) {
    EXPECT_TRUE(std::filesystem::exists(m.resolve(e))) << e.path;
    ++per_split[e.split][e.label];
  }
  EXPECT_EQ(m.split("train").size(), 320u);
  EXPECT_EQ(m.split("val").size(), 40u);
  EXPECT_EQ(m.split("test").size(), 40u);
  for (auto& [split, counts] : per_split) {
    ASSERT_EQ(counts.size(), 4u) << split;
    for (auto [label, n] : counts) EXPECT_EQ(n, counts.begin()->second) << split;
  }
  const auto img = read_image(m.resolve(m.entries.front()));
  EXPECT_EQ(img.width, 32);
  EXPECT_EQ(img.channels, 1);
  std::filesystem::remove_all(dir);
}

TEST(GenerateDataset, SameSeedSameTree) {
  const auto a = std::filesystem::temp_directory_path() / "docgrid_synth_b";
  const auto b = std::filesystem::temp_directory_path() / "docgrid_synth_c";
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
  generate_dataset(10, 2, 3, 40, a);
  generate_dataset(10, 2, 3, 40, b);
  EXPECT_EQ(slurp(a / "manifest.csv"), slurp(b / "manifest.csv"));
  for (const auto& e : read_manifest(a / "manifest.csv").entries) EXPECT_EQ(slurp(a / e.path), slurp(b / e.path));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(GenerateDataset, UnwritableDirectory) {
  EXPECT_THROW(generate_dataset(1, 1, 0, 32, "/proc/docgrid_nope"), IoError);
}
