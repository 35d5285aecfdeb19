#include "msl/eval.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace msl {

std::size_t MatchResult::true_positives() const noexcept
{
  return static_cast<std::size_t>(
      std::count_if(pred_to_gt.begin(), pred_to_gt.end(), [](int g) { return g >= 0; }));
}

MatchResult match(std::span<const Detection> preds, std::span<const GroundTruth> gts,
                  double iou_threshold)
{
  MatchResult r;
  r.iou_threshold = iou_threshold;
  r.pred_to_gt.assign(preds.size(), -1);
  r.gt_to_pred.assign(gts.size(), -1);
  for (std::size_t p = 0; p < preds.size(); ++p) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (r.gt_to_pred[g] >= 0 || gts[g].class_id != preds[p].class_id) {
        continue;
      }
      const double overlap = iou(preds[p].box, gts[g].box);
      if (overlap >= best_iou && (best < 0 || overlap > best_iou)) {
        best = static_cast<int>(g);
        best_iou = overlap;
      }
    }
    if (best >= 0) {
      r.pred_to_gt[p] = best;
      r.gt_to_pred[best] = static_cast<int>(p);
    }
  }
  return r;
}

std::optional<double> average_precision(std::span<const bool> tp, std::size_t n_gt)
{
  if (n_gt == 0) {
    return tp.empty() ? std::nullopt : std::optional<double>(0.0);
  }
  const std::size_t n = tp.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hits += tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(hits) / static_cast<double>(n_gt);
  }
  // Monotone envelope, right to left.
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp[i]) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

std::vector<double> coco_iou_thresholds()
{
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) {
    t.push_back(0.5 + 0.05 * i);
  }
  return t;
}

std::vector<std::optional<double>> MapResult::class_mean_ap() const
{
  if (ap.empty()) {
    return {};
  }
  std::vector<std::optional<double>> out(ap.front().size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    double sum = 0.0;
    bool defined = true;
    for (const auto& per_t : ap) {
      if (!per_t[c]) {
        defined = false;
        break;
      }
      sum += *per_t[c];
    }
    if (defined) {
      out[c] = sum / static_cast<double>(ap.size());
    }
  }
  return out;
}

MapResult map_at(const std::vector<std::vector<Detection>>& preds_by_image,
                 const std::vector<std::vector<GroundTruth>>& gts_by_image, int nc,
                 std::span<const double> thresholds)
{
  if (preds_by_image.size() != gts_by_image.size()) {
    throw std::invalid_argument("map_at: prediction and ground-truth image counts differ");
  }
  MapResult result;
  result.thresholds.assign(thresholds.begin(), thresholds.end());

  std::vector<std::size_t> n_gt(nc, 0);
  for (const auto& gts : gts_by_image) {
    for (const auto& g : gts) {
      if (g.class_id < 0 || g.class_id >= nc) {
        throw std::invalid_argument("map_at: ground-truth class out of range");
      }
      ++n_gt[g.class_id];
    }
  }

  // Score-ranked copy of every image's predictions (stable on ties).
  std::vector<std::vector<Detection>> ranked(preds_by_image.size());
  for (std::size_t i = 0; i < preds_by_image.size(); ++i) {
    ranked[i] = preds_by_image[i];
    std::stable_sort(ranked[i].begin(), ranked[i].end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    for (const auto& d : ranked[i]) {
      if (d.class_id < 0 || d.class_id >= nc) {
        throw std::invalid_argument("map_at: predicted class out of range");
      }
    }
  }

  struct Entry
  {
    double score;
    std::size_t image;
    std::size_t rank;
    bool tp;
  };
  for (double t : thresholds) {
    std::vector<std::vector<Entry>> per_class(nc);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const MatchResult m = match(ranked[i], gts_by_image[i], t);
      for (std::size_t r = 0; r < ranked[i].size(); ++r) {
        per_class[ranked[i][r].class_id].push_back(
            {ranked[i][r].score, i, r, m.pred_to_gt[r] >= 0});
      }
    }
    std::vector<std::optional<double>> aps(nc);
    double sum = 0.0;
    int defined = 0;
    for (int c = 0; c < nc; ++c) {
      auto& entries = per_class[c];
      std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.image, a.rank) < std::tie(b.image, b.rank);
      });
      // std::vector<bool> cannot back a span.
      auto flags = std::make_unique<bool[]>(entries.size());
      for (std::size_t k = 0; k < entries.size(); ++k) {
        flags[k] = entries[k].tp;
      }
      aps[c] = average_precision(std::span<const bool>(flags.get(), entries.size()), n_gt[c]);
      if (aps[c]) {
        sum += *aps[c];
        ++defined;
      }
    }
    result.map.push_back(defined > 0 ? sum / defined : 0.0);
    result.ap.push_back(std::move(aps));
  }
  return result;
}

std::uint64_t ConfusionMatrix::at(int pred_row, int gt_col) const
{
  return counts.at(static_cast<std::size_t>(pred_row) * (nc + 1) + gt_col);
}

std::uint64_t& ConfusionMatrix::at(int pred_row, int gt_col)
{
  return counts.at(static_cast<std::size_t>(pred_row) * (nc + 1) + gt_col);
}

std::vector<double> ConfusionMatrix::normalized() const
{
  const int n = nc + 1;
  std::vector<double> out(counts.size(), 0.0);
  for (int col = 0; col < n; ++col) {
    std::uint64_t sum = 0;
    for (int row = 0; row < n; ++row) {
      sum += at(row, col);
    }
    if (sum == 0) {
      continue;
    }
    for (int row = 0; row < n; ++row) {
      out[static_cast<std::size_t>(row) * n + col] =
          static_cast<double>(at(row, col)) / static_cast<double>(sum);
    }
  }
  return out;
}

ConfusionMatrix confusion_matrix(const std::vector<std::vector<Detection>>& preds_by_image,
                                 const std::vector<std::vector<GroundTruth>>& gts_by_image,
                                 int nc, double conf_threshold, double iou_threshold)
{
  if (preds_by_image.size() != gts_by_image.size()) {
    throw std::invalid_argument("confusion_matrix: prediction and ground-truth image counts differ");
  }
  ConfusionMatrix cm;
  cm.nc = nc;
  cm.counts.assign(static_cast<std::size_t>(nc + 1) * (nc + 1), 0);

  for (std::size_t i = 0; i < preds_by_image.size(); ++i) {
    std::vector<const Detection*> preds;
    for (const auto& d : preds_by_image[i]) {
      if (d.score >= conf_threshold) {
        preds.push_back(&d);
      }
    }
    const auto& gts = gts_by_image[i];

    struct Pair
    {
      double overlap;
      std::size_t p;
      std::size_t g;
    };
    std::vector<Pair> pairs;
    for (std::size_t p = 0; p < preds.size(); ++p) {
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double overlap = iou(preds[p]->box, gts[g].box);
        if (overlap >= iou_threshold && overlap > 0.0) {
          pairs.push_back({overlap, p, g});
        }
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      return std::tie(a.p, a.g) < std::tie(b.p, b.g);
    });

    std::vector<bool> pred_used(preds.size(), false);
    std::vector<bool> gt_used(gts.size(), false);
    for (const auto& pr : pairs) {
      if (pred_used[pr.p] || gt_used[pr.g]) {
        continue;
      }
      pred_used[pr.p] = true;
      gt_used[pr.g] = true;
      ++cm.at(preds[pr.p]->class_id, gts[pr.g].class_id);
    }
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!gt_used[g]) {
        ++cm.at(cm.background(), gts[g].class_id);
      }
    }
    for (std::size_t p = 0; p < preds.size(); ++p) {
      if (!pred_used[p]) {
        ++cm.at(preds[p]->class_id, cm.background());
      }
    }
  }
  return cm;
}

}  // namespace msl
