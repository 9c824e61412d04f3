#ifndef DOCGRID_PIPELINE_HPP
#define DOCGRID_PIPELINE_HPP

// Image loading and preprocessing shared by training and evaluation:
// aspect-ratio policy -> representation stack -> augmentation -> mean
// subtraction.

#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "docgrid/augmentation.hpp"
#include "docgrid/imaging.hpp"
#include "docgrid/parallel.hpp"

namespace docgrid {

struct Preprocess {
  RepresentationSpec representation;
  ARPolicy ar;
  int input_h = 227;
  int input_w = 227;
  std::vector<float> channel_means;  // empty until computed from the training split

  int channels() const { return representation.total_channels(); }
  bool operator==(const Preprocess&) const = default;
};

inline void to_json(nlohmann::json& j, const Preprocess& p) {
  j = {{"representation", p.representation.str()},
       {"surf_grid", p.representation.surf_grid},
       {"ar_policy", p.ar},
       {"input", {p.input_h, p.input_w}},
       {"channel_means", p.channel_means}};
}

inline void from_json(const nlohmann::json& j, Preprocess& p) {
  p.representation = RepresentationSpec::parse(j.at("representation").get<std::string>(),
                                               j.value("surf_grid", 227));
  p.ar = j.at("ar_policy").get<ARPolicy>();
  const auto in = j.at("input");
  p.input_h = in.at(0).get<int>();
  p.input_w = in.at(1).get<int>();
  p.channel_means = j.value("channel_means", std::vector<float>{});
}

// Labeled images of one split, decoded on first use and kept in memory.
class ImageSet {
 public:
  ImageSet() = default;
  ImageSet(const Manifest& m, std::vector<ManifestEntry> entries) : root_(m.root), entries_(std::move(entries)) {
    images_.resize(entries_.size());
    locks_ = std::make_unique<std::mutex[]>(entries_.size() ? entries_.size() : 1);
  }
  // In-memory images (ids are used for view seeding).
  ImageSet(std::vector<Tensor> images, std::vector<int> labels, std::vector<std::string> ids = {}) {
    if (images.size() != labels.size()) throw InvalidArgument("image and label counts differ");
    for (std::size_t i = 0; i < images.size(); ++i) {
      entries_.push_back({i < ids.size() ? ids[i] : "image" + std::to_string(i), labels[i], "train"});
      images_.push_back(std::make_shared<const Tensor>(std::move(images[i])));
    }
    locks_ = std::make_unique<std::mutex[]>(entries_.size() ? entries_.size() : 1);
  }
  ImageSet(const ImageSet& o) : root_(o.root_), entries_(o.entries_), images_(o.images_) {
    locks_ = std::make_unique<std::mutex[]>(entries_.size() ? entries_.size() : 1);
  }
  ImageSet& operator=(const ImageSet& o) {
    if (this != &o) {
      ImageSet tmp(o);
      std::swap(root_, tmp.root_);
      std::swap(entries_, tmp.entries_);
      std::swap(images_, tmp.images_);
      std::swap(locks_, tmp.locks_);
    }
    return *this;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const ManifestEntry& entry(std::size_t i) const { return entries_.at(i); }
  int label(std::size_t i) const { return entries_.at(i).label; }
  const std::string& id(std::size_t i) const { return entries_.at(i).path; }

  // Original image as C x H x W in [0, 1].
  std::shared_ptr<const Tensor> image(std::size_t i) const {
    std::lock_guard<std::mutex> g(locks_[i]);
    if (!images_[i]) {
      const std::filesystem::path p(entries_[i].path);
      images_[i] = std::make_shared<const Tensor>(to_tensor(read_image(p.is_absolute() ? p : root_ / p)));
    }
    return images_[i];
  }

  ImageSet subset(const std::vector<std::size_t>& idx) const {
    ImageSet s;
    s.root_ = root_;
    for (std::size_t i : idx) {
      s.entries_.push_back(entries_.at(i));
      s.images_.push_back(images_.at(i));
    }
    s.locks_ = std::make_unique<std::mutex[]>(s.entries_.size() ? s.entries_.size() : 1);
    return s;
  }

  int num_classes() const {
    int m = -1;
    for (const auto& e : entries_) m = std::max(m, e.label);
    return m + 1;
  }

 private:
  std::filesystem::path root_;
  std::vector<ManifestEntry> entries_;
  mutable std::vector<std::shared_ptr<const Tensor>> images_;
  std::unique_ptr<std::mutex[]> locks_;
};

inline ImageSet load_split(const Manifest& m, const std::string& split) { return ImageSet(m, m.split(split)); }

/**
 * Representation stacks of every AR view of `img` at target_h x target_w,
 * before augmentation and mean subtraction. S is computed on the original
 * image over the same lattice the policy resizes to, then cut like the
 * pixel channels (padding uses the zero descriptor).
 */
inline std::vector<Tensor> prepare_views(const Tensor& img, const Preprocess& pp, int target_h, int target_w) {
  std::vector<Tensor> out;
  const auto& rep = pp.representation;
  for (const auto& v : plan_ar_views(img.dim(1), img.dim(2), pp.ar, target_h, target_w)) {
    const Tensor pixels = cut_view(resize_bilinear(img, v.resize_h, v.resize_w), v, pp.ar.pad_fill);
    if (rep.uses_surf()) {
      const Tensor s = cut_view(surf_to_unit(dense_surf_grid(img, v.resize_h, v.resize_w)), v, 0.5f);
      out.push_back(pixel_representations(pixels, rep, &s));
    } else {
      out.push_back(pixel_representations(pixels, rep));
    }
  }
  return out;
}

inline std::vector<Tensor> prepare_views(const Tensor& img, const Preprocess& pp) {
  return prepare_views(img, pp, pp.input_h, pp.input_w);
}

inline Tensor finish(const Tensor& view, const Preprocess& pp) {
  return pp.channel_means.empty() ? view : normalize(view, pp.channel_means);
}

// Per-channel means over every AR view of every image, in set order.
inline std::vector<float> compute_channel_means(const ImageSet& set, const Preprocess& pp) {
  if (set.empty()) throw InvalidArgument("cannot compute channel means of an empty split");
  std::vector<std::vector<Tensor>> views(set.size());
  parallel_for(0, set.size(), [&](std::size_t i) { views[i] = prepare_views(*set.image(i), pp); });
  ChannelMeanAccumulator acc;
  for (const auto& vs : views)
    for (const auto& v : vs) acc.add(v);
  return acc.means();
}

// How training samples are perturbed: one transform per sample drawn
// from `transforms`, or all of them in sequence when `combine` is set.
struct Augmentation {
  std::vector<TransformSpec> transforms;
  bool combine = false;

  bool active() const {
    return std::any_of(transforms.begin(), transforms.end(), [](const auto& t) { return t.kind != TransformKind::none; });
  }
  bool operator==(const Augmentation&) const = default;
};

inline void to_json(nlohmann::json& j, const Augmentation& a) {
  j = {{"transforms", a.transforms}, {"combine", a.combine}};
}
inline void from_json(const nlohmann::json& j, Augmentation& a) {
  a = Augmentation{};
  if (j.contains("transforms")) a.transforms = j.at("transforms").get<std::vector<TransformSpec>>();
  a.combine = j.value("combine", false);
}

template <class Rng>
Tensor augment(const Tensor& view, const Augmentation& aug, Rng& rng) {
  if (aug.transforms.empty()) return view;
  if (aug.combine) {
    Tensor t = view;
    for (const auto& spec : aug.transforms) t = apply_transform(t, sample_transform(spec, rng));
    return t;
  }
  const auto& spec = aug.transforms.size() == 1
                         ? aug.transforms.front()
                         : aug.transforms[std::uniform_int_distribution<std::size_t>(0, aug.transforms.size() - 1)(rng)];
  return apply_transform(view, sample_transform(spec, rng));
}

// Seed for one sample of one update, independent of thread scheduling.
inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t update, std::uint64_t slot) {
  std::uint64_t x = seed ^ (update * 0x9e3779b97f4a7c15ull) ^ (slot * 0xc2b2ae3d27d4eb4full);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// One randomly chosen AR view, augmented and normalized.
inline Tensor training_sample(const Tensor& img, const Preprocess& pp, const Augmentation& aug, int target_h,
                              int target_w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto views = prepare_views(img, pp, target_h, target_w);
  const std::size_t pick = views.size() == 1 ? 0 : std::uniform_int_distribution<std::size_t>(0, views.size() - 1)(rng);
  return finish(augment(views[pick], aug, rng), pp);
}

}  // namespace docgrid

#endif  // DOCGRID_PIPELINE_HPP
