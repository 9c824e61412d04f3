#ifndef DOCGRID_INFERENCE_HPP
#define DOCGRID_INFERENCE_HPP

// Single-view, multi-view and multi-scale prediction plus accuracy and
// confusion reporting. Views are averaged in probability space.

#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "docgrid/model.hpp"
#include "docgrid/pipeline.hpp"

namespace docgrid {

// Maps an N x C x H x W batch to N x K probabilities.
using Predictor = std::function<Tensor(const Tensor&)>;

inline Predictor model_predictor(const Model& m) {
  return [&m](const Tensor& batch) { return predict_batch(m, batch); };
}

/**
 * Probabilities for each tensor in `items` (each C x H x W), batching
 * consecutive runs of equal shape up to `max_batch` items.
 */
inline std::vector<Tensor> predict_each(const Predictor& pred, const std::vector<Tensor>& items, std::size_t max_batch = 64) {
  std::vector<Tensor> out(items.size());
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i + 1;
    while (j < items.size() && j - i < max_batch && items[j].shape() == items[i].shape()) ++j;
    const Tensor probs = pred(stack_batch(std::span<const Tensor>(items.data() + i, j - i)));
    const int K = probs.dim(1);
    for (std::size_t k = i; k < j; ++k) {
      Tensor row({K});
      std::copy_n(probs.data() + (k - i) * static_cast<std::size_t>(K), K, row.data());
      out[k] = std::move(row);
    }
    i = j;
  }
  return out;
}

// Arithmetic mean of probability vectors, accumulated in order.
inline Tensor average_probabilities(const std::vector<Tensor>& probs) {
  if (probs.empty()) throw InvalidArgument("nothing to average");
  if (probs.size() == 1) return probs.front();
  std::vector<double> acc(probs.front().size(), 0.0);
  for (const auto& p : probs) {
    if (p.size() != acc.size()) throw InvalidArgument("probability vectors differ in length");
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
  }
  Tensor out({static_cast<int>(acc.size())});
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(probs.size()));
  return out;
}

// Eval-mode probabilities of one preprocessed C x H x W image.
inline Tensor predict(const Model& m, const Tensor& image) {
  require_rank(image, 3, "predict");
  return predict_each(model_predictor(m), {image}).front();
}

/**
 * Mean prediction over make_views(id, spec, n) applied to `view` (a
 * representation stack before mean subtraction).
 */
inline Tensor predict_multiview(const Predictor& pred, const Tensor& view, const Preprocess& pp,
                                const TransformSpec& spec, int n, const std::string& id) {
  std::vector<Tensor> items;
  for (const auto& t : make_views(id, spec, n)) items.push_back(finish(apply_transform(view, t), pp));
  return average_probabilities(predict_each(pred, items));
}

inline Tensor predict_multiview(const Model& m, const Tensor& view, const Preprocess& pp, const TransformSpec& spec,
                                int n, const std::string& id) {
  return predict_multiview(model_predictor(m), view, pp, spec, n, id);
}

inline void require_spp(const Model& m, const char* what) {
  if (!m.spec.has_spp()) throw ConfigError(std::string(what) + " needs a model with spatial pyramid pooling");
}

// Mean prediction over square sizes, each through the AR policy at that size.
inline Tensor predict_multiscale(const Model& m, const Tensor& original, const Preprocess& pp, const std::vector<int>& sizes) {
  require_spp(m, "multi-scale prediction");
  if (sizes.empty()) throw InvalidArgument("multi-scale prediction needs at least one size");
  std::vector<Tensor> per_size;
  for (int s : sizes) {
    std::vector<Tensor> items;
    for (const auto& v : prepare_views(original, pp, s, s)) items.push_back(finish(v, pp));
    per_size.push_back(average_probabilities(predict_each(model_predictor(m), items)));
  }
  return average_probabilities(per_size);
}

enum class EvalMode { single, multiview, multiscale };

struct EvalOptions {
  EvalMode mode = EvalMode::single;
  int views = 10;                   // multiview
  TransformSpec view_spec;          // multiview
  std::vector<int> sizes;           // multiscale
};

struct PredictionReport {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<int> predictions;
  std::vector<Tensor> probabilities;
  double accuracy = 0;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  int views_per_image = 1;

  std::string per_image_csv() const {
    std::ostringstream o;
    o << "path,label,pred,prob_max\n";
    char buf[32];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", probabilities[i][static_cast<std::size_t>(predictions[i])]);
      o << ids[i] << ',' << labels[i] << ',' << predictions[i] << ',' << buf << '\n';
    }
    return o.str();
  }
  std::string confusion_csv() const {
    std::ostringstream o;
    o << "true\\pred";
    for (std::size_t c = 0; c < confusion.size(); ++c) o << ',' << c;
    o << '\n';
    for (std::size_t r = 0; r < confusion.size(); ++r) {
      o << r;
      for (long v : confusion[r]) o << ',' << v;
      o << '\n';
    }
    return o.str();
  }
  std::string summary() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "accuracy=%.6f\n", accuracy);
    return std::string(buf) + "images=" + std::to_string(ids.size()) + "\nviews_per_image=" +
           std::to_string(views_per_image) + "\n";
  }
};

// Fills labels/predictions/accuracy/confusion from per-image probabilities.
inline PredictionReport make_report(std::vector<std::string> ids, std::vector<int> labels, std::vector<Tensor> probs,
                                    int num_classes, int views) {
  if (ids.empty()) throw InvalidArgument("cannot report on an empty split");
  PredictionReport r;
  r.ids = std::move(ids);
  r.labels = std::move(labels);
  r.probabilities = std::move(probs);
  r.views_per_image = views;
  int K = num_classes;
  for (const auto& p : r.probabilities) K = std::max(K, static_cast<int>(p.size()));
  r.confusion.assign(static_cast<std::size_t>(K), std::vector<long>(static_cast<std::size_t>(K), 0));
  long correct = 0;
  for (std::size_t i = 0; i < r.probabilities.size(); ++i) {
    const int pred = argmax(r.probabilities[i].span());
    r.predictions.push_back(pred);
    if (r.labels[i] < 0 || r.labels[i] >= K) throw InvalidArgument("label " + std::to_string(r.labels[i]) + " out of range");
    ++r.confusion[static_cast<std::size_t>(r.labels[i])][static_cast<std::size_t>(pred)];
    correct += pred == r.labels[i];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.ids.size());
  return r;
}

/**
 * Evaluates a split with any predictor. Each image goes through the AR
 * policy (crop3 views are averaged); multiview additionally averages the
 * transformed views; multiscale averages over square sizes.
 */
inline PredictionReport evaluate(const Predictor& pred, const ImageSet& set, const Preprocess& pp,
                                 const EvalOptions& opt = {}, int num_classes = 0) {
  if (set.empty()) throw InvalidArgument("cannot evaluate an empty split");
  const std::size_t chunk = 64;
  std::vector<Tensor> probs(set.size());
  int views_per_image = 1;
  for (std::size_t begin = 0; begin < set.size(); begin += chunk) {
    const std::size_t end = std::min(set.size(), begin + chunk);
    // inputs for every image of the chunk, with group boundaries
    std::vector<std::vector<std::vector<Tensor>>> groups(end - begin);
    parallel_for(begin, end, [&](std::size_t i) {
      const Tensor& img = *set.image(i);
      auto& g = groups[i - begin];
      if (opt.mode == EvalMode::multiscale) {
        for (int s : opt.sizes) {
          std::vector<Tensor> items;
          for (const auto& v : prepare_views(img, pp, s, s)) items.push_back(finish(v, pp));
          g.push_back(std::move(items));
        }
      } else {
        std::vector<Tensor> items;
        for (const auto& v : prepare_views(img, pp)) {
          if (opt.mode == EvalMode::multiview) {
            for (const auto& t : make_views(set.id(i), opt.view_spec, opt.views))
              items.push_back(finish(apply_transform(v, t), pp));
          } else {
            items.push_back(finish(v, pp));
          }
        }
        g.push_back(std::move(items));
      }
    });
    std::vector<Tensor> flat;
    for (const auto& g : groups)
      for (const auto& items : g) flat.insert(flat.end(), items.begin(), items.end());
    const auto flat_probs = predict_each(pred, flat);
    std::size_t k = 0;
    for (std::size_t i = begin; i < end; ++i) {
      std::vector<Tensor> per_group;
      int views = 0;
      for (const auto& items : groups[i - begin]) {
        per_group.push_back(average_probabilities({flat_probs.begin() + static_cast<std::ptrdiff_t>(k),
                                                   flat_probs.begin() + static_cast<std::ptrdiff_t>(k + items.size())}));
        k += items.size();
        views += static_cast<int>(items.size());
      }
      probs[i] = average_probabilities(per_group);
      views_per_image = views;
    }
  }
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (std::size_t i = 0; i < set.size(); ++i) {
    ids.push_back(set.id(i));
    labels.push_back(set.label(i));
  }
  return make_report(std::move(ids), std::move(labels), std::move(probs), num_classes, views_per_image);
}

inline PredictionReport evaluate(const Model& m, const ImageSet& set, const Preprocess& pp, const EvalOptions& opt = {}) {
  if (opt.mode == EvalMode::multiscale) {
    require_spp(m, "multi-scale evaluation");
    if (opt.sizes.empty()) throw ConfigError("multi-scale evaluation needs sizes");
  }
  if (pp.channels() != m.spec.channels)
    throw InvalidArgument("preprocessing yields " + std::to_string(pp.channels()) + " channels but the model expects " +
                          std::to_string(m.spec.channels));
  return evaluate(model_predictor(m), set, pp, opt, m.spec.classes);
}

}  // namespace docgrid

#endif  // DOCGRID_INFERENCE_HPP
