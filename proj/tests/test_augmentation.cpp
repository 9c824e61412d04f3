#include <gtest/gtest.h>

#include <map>
#include <random>

#include "docgrid/augmentation.hpp"
#include "oracles.hpp"

using namespace docgrid;

namespace {

TransformSpec spec_of(TransformKind k) {
  TransformSpec s;
  s.kind = k;
  return s;
}

std::vector<float> sorted_column(const Tensor& t, int x) {
  std::vector<float> v;
  for (int y = 0; y < t.dim(1); ++y) v.push_back(t.at(0, y, x));
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(SampleTransform, NoneIsIdentity) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(sample_transform(spec_of(TransformKind::none), rng), ConcreteTransform::identity());
}

TEST(SampleTransform, ShearDrawsUniformInRange) {
  std::mt19937_64 rng(2);
  const auto spec = spec_of(TransformKind::shear);
  double sum = 0;
  int vertical = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto t = sample_transform(spec, rng);
    ASSERT_GE(t.angle_deg, -10.0);
    ASSERT_LE(t.angle_deg, 10.0);
    sum += t.angle_deg;
    vertical += t.vertical;
  }
  EXPECT_LE(std::abs(sum / n), 0.2);
  EXPECT_NEAR(vertical / static_cast<double>(n), 0.5, 0.01);
}

TEST(SampleTransform, SeedReproducible) {
  for (auto k : all_transform_kinds()) {
    std::mt19937_64 a(9), b(9);
    EXPECT_EQ(sample_transform(spec_of(k), a), sample_transform(spec_of(k), b)) << to_string(k);
  }
}

TEST(SampleTransform, SpecValidation) {
  TransformSpec s = spec_of(TransformKind::rotation);
  s.rotation_deg = {-50, 10};
  EXPECT_THROW(s.validate(), ConfigError);
  s = spec_of(TransformKind::crop);
  s.crop_fraction = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = spec_of(TransformKind::shear);
  s.shear_deg = {5, -5};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(SampleTransform, JsonRoundTrip) {
  TransformSpec s = spec_of(TransformKind::shear);
  s.shear_deg = {-20, 20};
  s.shear_axis = ShearAxis::vertical;
  EXPECT_EQ(nlohmann::json(s).get<TransformSpec>(), s);
  EXPECT_EQ(nlohmann::json::parse(R"({"kind":"blur"})").is_object(), true);
  EXPECT_THROW(nlohmann::json::parse(R"({"kind":"blur"})").get<TransformSpec>(), InvalidArgument);
}

TEST(ApplyTransform, ShearZeroIsIdentity) {
  Tensor img = oracle::random_tensor({1, 12, 15}, 1, 0, 1);
  ConcreteTransform t;
  t.kind = TransformKind::shear;
  EXPECT_TRUE(bit_identical(apply_transform(img, t), img));
  t.vertical = true;
  EXPECT_TRUE(bit_identical(apply_transform(img, t), img));
}

TEST(ApplyTransform, HorizontalShear45MovesDot) {
  Tensor img({1, 4, 4}, 1.0f);
  img.at(0, 1, 0) = 0.0f;  // dot at (x=0, y=1)
  ConcreteTransform t;
  t.kind = TransformKind::shear;
  t.angle_deg = 45;
  Tensor out = apply_transform(img, t);
  EXPECT_NEAR(out.at(0, 1, 1), 0.0f, 1e-6);
  EXPECT_NEAR(out.at(0, 1, 0), 1.0f, 1e-6);  // white fill shifted in
}

TEST(ApplyTransform, MirrorIsInvolution) {
  Tensor img = oracle::random_tensor({3, 5, 8}, 2, 0, 1);
  ConcreteTransform t;
  t.kind = TransformKind::mirror;
  EXPECT_FALSE(bit_identical(apply_transform(img, t), img));
  EXPECT_TRUE(bit_identical(apply_transform(apply_transform(img, t), t), img));
}

TEST(ApplyTransform, VerticalShearPreservesColumns) {
  Tensor img({1, 20, 20}, 1.0f);
  for (int y = 5; y < 15; ++y) img.at(0, y, 5) = 0.0f;
  ConcreteTransform t;
  t.kind = TransformKind::shear;
  t.vertical = true;
  t.angle_deg = 45;  // integer per-column shifts
  Tensor out = apply_transform(img, t);
  for (int x = 0; x < 20; ++x)
    if (x <= 5) EXPECT_EQ(sorted_column(out, x), sorted_column(img, x)) << "column " << x;
  EXPECT_NEAR(out.at(0, 10, 5), 0.0f, 1e-6);
}

TEST(ApplyTransform, ZeroMagnitudeParametersAreIdentity) {
  Tensor img = oracle::random_tensor({2, 9, 11}, 3, 0, 1);
  std::vector<ConcreteTransform> ts(8);
  ts[0].kind = TransformKind::rotation;
  ts[1].kind = TransformKind::color_jitter;
  ts[2].kind = TransformKind::gaussian_blur;
  ts[3].kind = TransformKind::gaussian_noise;
  ts[4].kind = TransformKind::crop;
  ts[5].kind = TransformKind::perspective;
  ts[6].kind = TransformKind::elastic;
  ts[7].kind = TransformKind::salt_pepper;
  for (const auto& t : ts) EXPECT_TRUE(bit_identical(apply_transform(img, t), img)) << to_string(t.kind);
}

TEST(ApplyTransform, DeterministicAndInUnitRange) {
  Tensor img = oracle::random_tensor({1, 24, 20}, 4, 0, 1);
  std::mt19937_64 rng(5);
  for (auto k : all_transform_kinds()) {
    const auto t = sample_transform(spec_of(k), rng);
    Tensor a = apply_transform(img, t), b = apply_transform(img, t);
    EXPECT_TRUE(bit_identical(a, b)) << to_string(k);
    EXPECT_EQ(a.shape(), img.shape());
    for (float v : a.vec()) {
      ASSERT_GE(v, 0.0f) << to_string(k);
      ASSERT_LE(v, 1.0f) << to_string(k);
    }
  }
}

TEST(ApplyTransform, RotationFillsCornersWhite) {
  Tensor img({1, 21, 21}, 0.0f);
  ConcreteTransform t;
  t.kind = TransformKind::rotation;
  t.angle_deg = 30;
  Tensor out = apply_transform(img, t);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(out.at(0, 10, 10), 0.0f);
}

TEST(ApplyTransform, SmallPerspectiveKeepsCentre) {
  Tensor img = oracle::random_tensor({1, 30, 30}, 6, 0, 1);
  ConcreteTransform t;
  t.kind = TransformKind::perspective;
  t.corners = {0.02, 0.02, -0.02, 0.02, -0.02, -0.02, 0.02, -0.02};  // symmetric inward pull
  Tensor out = apply_transform(img, t);
  EXPECT_NEAR(out.at(0, 15, 15), img.at(0, 15, 15), 0.3);
  EXPECT_FALSE(bit_identical(out, img));
}

TEST(ApplyTransform, SaltPepperRate) {
  Tensor img({1, 200, 200}, 0.5f);
  ConcreteTransform t;
  t.kind = TransformKind::salt_pepper;
  t.rate = 0.02;
  t.seed = 3;
  Tensor out = apply_transform(img, t);
  int hits = 0;
  for (float v : out.vec()) hits += v != 0.5f;
  EXPECT_NEAR(hits / 40000.0, 0.02, 0.004);
}

TEST(ArPolicy, SquareInputEqualsPlainResize) {
  Tensor img = oracle::random_tensor({1, 40, 40}, 7, 0, 1);
  const Tensor plain = resize_bilinear(img, 20, 20);
  for (auto k : {ARKind::warp, ARKind::pad, ARKind::variable}) {
    ARPolicy p;
    p.kind = k;
    auto v = apply_ar_policy(img, p, 20, 20);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_TRUE(bit_identical(v[0], plain));
  }
}

TEST(ArPolicy, Crop3OffsetsOnLandscape) {
  Tensor img({1, 50, 100});
  for (int x = 0; x < 100; ++x)
    for (int y = 0; y < 50; ++y) img.at(0, y, x) = static_cast<float>(x);
  auto plan = plan_ar_views(50, 100, {ARKind::crop3}, 100, 100);
  ASSERT_EQ(plan.size(), 3u);
  EXPECT_EQ(plan[0].resize_h, 100);
  EXPECT_EQ(plan[0].resize_w, 200);
  EXPECT_EQ(plan[0].offset_x, 0);
  EXPECT_EQ(plan[1].offset_x, 50);
  EXPECT_EQ(plan[2].offset_x, 100);
  auto views = apply_ar_policy(img, {ARKind::crop3}, 100, 100);
  ASSERT_EQ(views.size(), 3u);
  const Tensor resized = resize_bilinear(img, 100, 200);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(views[static_cast<std::size_t>(i)].shape(), (Shape{1, 100, 100}));
    EXPECT_EQ(views[static_cast<std::size_t>(i)].at(0, 0, 0), resized.at(0, 0, 50 * i));
  }
}

TEST(ArPolicy, PadLandscapeHasHalfHeightBands) {
  Tensor img({1, 50, 100}, 0.0f);
  ARPolicy p{ARKind::pad, 1.0f, 0};
  Tensor out = apply_ar_policy(img, p, 100, 100)[0];
  int fill_rows = 0;
  for (int y = 0; y < 100; ++y) fill_rows += out.at(0, y, 50) == 1.0f;
  EXPECT_EQ(fill_rows, 50);
  EXPECT_EQ(out.at(0, 0, 50), 1.0f);
  EXPECT_EQ(out.at(0, 99, 50), 1.0f);
  EXPECT_EQ(out.at(0, 50, 50), 0.0f);
}

TEST(ArPolicy, VariableRespectsBudgetAndAspect) {
  for (auto [h, w] : {std::pair{50, 100}, {300, 200}, {17, 301}, {64, 64}}) {
    auto v = plan_ar_views(h, w, {ARKind::variable}, 64, 64);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_LE(v[0].out_h * v[0].out_w, 64 * 64);
    EXPECT_NEAR(static_cast<double>(v[0].out_w) / v[0].out_h, static_cast<double>(w) / h,
                0.05 * w / h + 1.0 / v[0].out_h);
  }
  EXPECT_THROW(ARPolicy({ARKind::pad, 1.5f, 0}).validate(), ConfigError);
}

TEST(MakeViews, IdentityFirstAndReproducible) {
  const auto spec = spec_of(TransformKind::rotation);
  EXPECT_EQ(make_views("a.pgm", spec, 1), std::vector<ConcreteTransform>{ConcreteTransform::identity()});
  const auto v = make_views("a.pgm", spec, 10);
  ASSERT_EQ(v.size(), 10u);
  EXPECT_EQ(v[0], ConcreteTransform::identity());
  EXPECT_EQ(v, make_views("a.pgm", spec, 10));
  EXPECT_NE(v, make_views("b.pgm", spec, 10));
  for (const auto& t : make_views("x", spec_of(TransformKind::none), 10)) EXPECT_EQ(t, ConcreteTransform::identity());
  EXPECT_THROW(make_views("x", spec, 0), InvalidArgument);
}

TEST(SampleScale, UniformOverSizes) {
  std::mt19937_64 rng(11);
  const std::vector<int> sizes{320, 384, 512};
  std::map<int, int> counts;
  for (int i = 0; i < 100000; ++i) ++counts[sample_scale(sizes, rng)];
  ASSERT_EQ(counts.size(), 3u);
  for (auto [s, c] : counts) {
    EXPECT_GE(c / 1e5, 0.30) << s;
    EXPECT_LE(c / 1e5, 0.37) << s;
  }
  EXPECT_EQ(sample_scale({64}, rng), 64);
  std::mt19937_64 a(3), b(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_scale(sizes, a), sample_scale(sizes, b));
}
