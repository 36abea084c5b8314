#include "adisep/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <numeric>
#include <nlohmann/json.hpp>
#include <thread>

#include "adisep/errors.hpp"

namespace adisep {

namespace {

constexpr double kDontCareOverlap = 0.5;

double overlap_fraction_of(const BBox2D& det, const BBox2D& region) {
  const double iw = std::min(det.right, region.right) - std::max(det.left, region.left);
  const double ih = std::min(det.bottom, region.bottom) - std::max(det.top, region.top);
  const double area = det.width() * det.height();
  if (iw <= 0.0 || ih <= 0.0 || area <= 0.0) return 0.0;
  return iw * ih / area;
}

bool inside_dont_care(const Detection& det, std::span<const BBox2D> regions) {
  if (!det.bbox) return false;
  return std::any_of(regions.begin(), regions.end(),
                     [&](const BBox2D& r) { return overlap_fraction_of(*det.bbox, r) > kDontCareOverlap; });
}

struct ScoredOutcome {
  double score;
  bool true_positive;
};

}  // namespace

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy:
      return "Easy";
    case Difficulty::Moderate:
      return "Moderate";
    case Difficulty::Hard:
      return "Hard";
  }
  return "?";
}

DifficultyFilter DifficultyFilter::for_level(Difficulty d) {
  switch (d) {
    case Difficulty::Easy:
      return {40.0, 0, 0.15};
    case Difficulty::Moderate:
      return {25.0, 1, 0.30};
    case Difficulty::Hard:
      return {25.0, 2, 0.50};
  }
  return {};
}

GtStatus assign_difficulty(const ObjectLabel& gt, const DifficultyFilter& filter) {
  if (gt.is_dont_care()) return GtStatus::Ignored;
  const bool ok = gt.bbox.height() >= filter.min_height && gt.occlusion >= 0 && gt.occlusion <= filter.max_occlusion &&
                  gt.truncation >= 0.0 && gt.truncation <= filter.max_truncation;
  return ok ? GtStatus::Valid : GtStatus::Ignored;
}

Box3D to_box(const ObjectLabel& l) { return {l.x, l.y, l.z, l.height, l.width, l.length, l.rotation_y}; }

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts, const IouFn& iou,
                             double threshold, std::span<const BBox2D> dont_care) {
  MatchResult r;
  r.outcomes.assign(dets.size(), DetOutcome::FalsePositive);
  r.matched_gt.assign(dets.size(), -1);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<char> taken(gts.size(), 0);
  for (std::size_t di : order) {
    int best = -1;
    double best_iou = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double o = iou(dets[di].box, gts[g].box);
      if (o >= best_iou && (best < 0 || o > best_iou)) {
        best = static_cast<int>(g);
        best_iou = o;
      }
    }
    if (best >= 0) {
      taken[best] = 1;
      r.matched_gt[di] = best;
      if (gts[best].ignored) {
        r.outcomes[di] = DetOutcome::Ignored;
      } else {
        r.outcomes[di] = DetOutcome::TruePositive;
        ++r.true_positives;
      }
    } else if (inside_dont_care(dets[di], dont_care)) {
      r.outcomes[di] = DetOutcome::Ignored;
    } else {
      ++r.false_positives;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gts[g].ignored && !taken[g]) ++r.false_negatives;
  }
  return r;
}

ApResult average_precision(std::span<const ImageEval> images, const IouFn& iou, double threshold) {
  ApResult res;
  std::vector<ScoredOutcome> scored;
  for (const auto& img : images) {
    res.valid_gt += static_cast<int>(std::count_if(img.gts.begin(), img.gts.end(),
                                                   [](const GroundTruth& g) { return !g.ignored; }));
    const auto m = match_detections(img.dets, img.gts, iou, threshold, img.dont_care);
    for (std::size_t i = 0; i < img.dets.size(); ++i) {
      if (m.outcomes[i] == DetOutcome::Ignored) continue;
      scored.push_back({img.dets[i].score, m.outcomes[i] == DetOutcome::TruePositive});
    }
    res.true_positives += m.true_positives;
    res.false_positives += m.false_positives;
    res.false_negatives += m.false_negatives;
  }
  if (res.valid_gt == 0) throw EvaluationError("average precision is undefined without valid ground truth");

  // Greedy matching in score order makes the matching at any cutoff a prefix of
  // the full matching, so one pass over the globally sorted outcomes visits
  // every cutoff.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.score > b.score; });

  struct Cutoff {
    long tp;
    long fp;
  };
  std::vector<Cutoff> cutoffs;
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    (scored[i].true_positive ? tp : fp) += 1;
    const bool group_end = i + 1 == scored.size() || scored[i + 1].score != scored[i].score;
    if (group_end) cutoffs.push_back({tp, fp});
  }

  const long n = res.valid_gt;
  double sum = 0.0;
  for (int k = 1; k <= PRCurve::kPoints; ++k) {
    double best = 0.0;
    for (const auto& c : cutoffs) {
      // recall >= k/40, compared exactly in integers
      if (c.tp * PRCurve::kPoints >= static_cast<long>(k) * n) {
        best = std::max(best, static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp));
      }
    }
    res.curve.recall[k - 1] = static_cast<double>(k) / PRCurve::kPoints;
    res.curve.precision[k - 1] = best;
    sum += best;
  }
  res.ap = sum / PRCurve::kPoints * 100.0;
  return res;
}

std::vector<ClassConfig> default_class_configs() {
  return {
      {"Car", 0.7, {"Van"}, false},
      {"Pedestrian", 0.5, {"Person_sitting"}, true},
      {"Cyclist", 0.5, {}, true},
  };
}

std::vector<ImageEval> build_image_evals(std::span<const Frame> frames, const ClassConfig& cls, Difficulty d) {
  const auto filter = DifficultyFilter::for_level(d);
  std::vector<ImageEval> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    ImageEval img;
    for (const auto& g : f.ground_truth) {
      if (g.is_dont_care()) {
        img.dont_care.push_back(g.bbox);
      } else if (g.type == cls.name) {
        img.gts.push_back({to_box(g), assign_difficulty(g, filter) == GtStatus::Ignored});
      } else if (std::find(cls.ignore_classes.begin(), cls.ignore_classes.end(), g.type) != cls.ignore_classes.end()) {
        img.gts.push_back({to_box(g), true});
      }
    }
    for (const auto& det : f.detections) {
      if (det.type != cls.name) continue;
      img.dets.push_back({to_box(det), det.score.value_or(0.0), det.bbox});
    }
    out.push_back(std::move(img));
  }
  return out;
}

EvalReport evaluate_dataset(std::span<const Frame> frames, std::span<const ClassConfig> classes,
                            std::span<const Difficulty> difficulties, int threads) {
  EvalReport report;
  std::vector<ClassConfig> present;
  for (const auto& cls : classes) {
    const bool seen = std::any_of(frames.begin(), frames.end(), [&](const Frame& f) {
      return std::any_of(f.ground_truth.begin(), f.ground_truth.end(),
                         [&](const ObjectLabel& l) { return l.type == cls.name; });
    });
    if (seen) {
      present.push_back(cls);
    } else {
      report.notes.push_back(fmt::format("class {} has no ground truth; skipped", cls.name));
    }
  }
  for (const auto& cls : present) {
    if (cls.threshold_assumed) {
      report.notes.push_back(
          fmt::format("IoU threshold {:.2f} for {} is an assumed default", cls.iou_threshold, cls.name));
    }
  }

  report.classes.resize(present.size());
  const IouFn iou3d = [](const Box3D& a, const Box3D& b) { return iou_3d(a, b); };
  const IouFn ioubev = [](const Box3D& a, const Box3D& b) { return iou_bev(a, b); };

  auto run_cell = [](const std::vector<ImageEval>& imgs, const IouFn& fn, double thr) {
    MetricCell cell;
    try {
      cell.result = average_precision(imgs, fn, thr);
    } catch (const EvaluationError& e) {
      cell.error = e.what();
    }
    return cell;
  };

  const std::size_t levels = difficulties.size();
  const std::size_t jobs = present.size() * levels;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t c = j / levels;
      const auto d = difficulties[j % levels];
      const auto imgs = build_image_evals(frames, present[c], d);
      DifficultyReport& lvl = report.classes[c].levels[j % levels];
      lvl.difficulty = d;
      for (const auto& img : imgs) {
        lvl.valid_gt += static_cast<int>(
            std::count_if(img.gts.begin(), img.gts.end(), [](const GroundTruth& g) { return !g.ignored; }));
      }
      lvl.ap_3d = run_cell(imgs, iou3d, present[c].iou_threshold);
      lvl.ap_bev = run_cell(imgs, ioubev, present[c].iou_threshold);
    }
  };
  for (std::size_t c = 0; c < present.size(); ++c) {
    report.classes[c].config = present[c];
    report.classes[c].levels.resize(levels);
  }

  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return report;
}

std::string format_report_table(const EvalReport& report) {
  auto cell = [](const MetricCell& m) {
    return m.result ? fmt::format("{:>7.2f}", m.result->ap) : fmt::format("{:>7}", "n/a");
  };
  auto short_name = [](Difficulty d) { return d == Difficulty::Moderate ? "Mod." : difficulty_name(d); };
  std::string out;
  std::vector<Difficulty> levels;
  if (!report.classes.empty()) {
    for (const auto& l : report.classes.front().levels) levels.push_back(l.difficulty);
  }
  const int block = static_cast<int>(levels.size()) * 8 - 1;
  out += fmt::format("{:<12} {:>5} | {:^{}} | {:^{}}\n", "Class", "IoU", "AP 3D", block, "AP BEV", block);
  std::string heads;
  for (auto d : levels) heads += fmt::format(" {:>7}", short_name(d));
  out += fmt::format("{:<12} {:>5} |{} |{}\n", "", "", heads, heads);
  out += std::string(22 + 2 * (block + 3), '-') + "\n";
  for (const auto& c : report.classes) {
    std::string a3, ab;
    for (const auto& l : c.levels) {
      a3 += " " + cell(l.ap_3d);
      ab += " " + cell(l.ap_bev);
    }
    out += fmt::format("{:<12} {:>5.2f} |{} |{}\n", c.config.name, c.config.iou_threshold, a3, ab);
  }
  for (const auto& c : report.classes) {
    for (const auto& l : c.levels) {
      if (l.ap_3d.result) {
        const auto& r3 = *l.ap_3d.result;
        const auto& rb = *l.ap_bev.result;
        out += fmt::format("{} {}: valid GT {}; 3D TP {} FP {} FN {}; BEV TP {} FP {} FN {}\n", c.config.name,
                           difficulty_name(l.difficulty), l.valid_gt, r3.true_positives, r3.false_positives,
                           r3.false_negatives, rb.true_positives, rb.false_positives, rb.false_negatives);
      } else {
        out += fmt::format("{} {}: error: {}\n", c.config.name, difficulty_name(l.difficulty), l.ap_3d.error);
      }
    }
  }
  for (const auto& n : report.notes) out += "note: " + n + "\n";
  return out;
}

std::string report_to_json(const EvalReport& report) {
  using nlohmann::json;
  auto metric = [](const MetricCell& m) {
    json j;
    if (m.result) {
      j["ap"] = m.result->ap;
      j["tp"] = m.result->true_positives;
      j["fp"] = m.result->false_positives;
      j["fn"] = m.result->false_negatives;
      j["precision"] = m.result->curve.precision;
    } else {
      j["ap"] = nullptr;
      j["error"] = m.error;
    }
    return j;
  };
  json root;
  root["metric"] = "AP@40";
  root["classes"] = json::array();
  for (const auto& c : report.classes) {
    json jc;
    jc["name"] = c.config.name;
    jc["iou_threshold"] = c.config.iou_threshold;
    jc["threshold_assumed"] = c.config.threshold_assumed;
    for (const auto& l : c.levels) {
      json jl;
      jl["valid_gt"] = l.valid_gt;
      jl["ap_3d"] = metric(l.ap_3d);
      jl["ap_bev"] = metric(l.ap_bev);
      jc["difficulties"][difficulty_name(l.difficulty)] = jl;
    }
    root["classes"].push_back(jc);
  }
  root["notes"] = report.notes;
  return root.dump(2);
}

}  // namespace adisep
