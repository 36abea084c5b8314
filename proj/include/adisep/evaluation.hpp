#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adisep/geometry.hpp"
#include "adisep/kitti_io.hpp"

namespace adisep {

enum class Difficulty { Easy = 0, Moderate = 1, Hard = 2 };

const char* difficulty_name(Difficulty d);
inline constexpr std::array<Difficulty, 3> kAllDifficulties{Difficulty::Easy, Difficulty::Moderate,
                                                            Difficulty::Hard};

/// KITTI devkit thresholds: minimum 2D box height (px), maximum occlusion
/// level and maximum truncation fraction.
struct DifficultyFilter {
  double min_height = 25.0;
  int max_occlusion = 2;
  double max_truncation = 0.5;

  static DifficultyFilter for_level(Difficulty d);
};

enum class GtStatus { Valid, Ignored };

GtStatus assign_difficulty(const ObjectLabel& gt, const DifficultyFilter& filter);

Box3D to_box(const ObjectLabel& label);

struct Detection {
  Box3D box;
  double score = 0.0;
  std::optional<BBox2D> bbox;  // only needed for DontCare suppression
};

struct GroundTruth {
  Box3D box;
  bool ignored = false;
};

enum class DetOutcome { TruePositive, FalsePositive, Ignored };

using IouFn = std::function<double(const Box3D&, const Box3D&)>;

struct MatchResult {
  std::vector<DetOutcome> outcomes;  // indexed like the input detections
  std::vector<int> matched_gt;       // -1 when unmatched
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

/// Greedy matching in descending score (ties keep input order). Each
/// detection takes the unmatched ground truth of highest IoU >= threshold
/// (lowest index on ties). Matches to ignored ground truth, and unmatched
/// detections whose 2D box lies mostly (> 50% of its area) inside a DontCare
/// region, count as neither TP nor FP. Unmatched valid ground truth are FN.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts, const IouFn& iou,
                             double threshold, std::span<const BBox2D> dont_care = {});

/// 40 (recall, precision) samples at recall k/40, k = 1..40.
struct PRCurve {
  static constexpr int kPoints = 40;
  std::array<double, kPoints> recall{};
  std::array<double, kPoints> precision{};
};

struct ImageEval {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
  std::vector<BBox2D> dont_care;
};

struct ApResult {
  double ap = 0.0;  // percent
  PRCurve curve;
  int valid_gt = 0;
  int true_positives = 0;  // at the lowest score cutoff
  int false_positives = 0;
  int false_negatives = 0;
};

/// AP over 40 recall positions with right-max precision interpolation.
/// Throws EvaluationError when no valid ground truth exists.
ApResult average_precision(std::span<const ImageEval> images, const IouFn& iou, double threshold);

// ---- dataset-level evaluation ------------------------------------------------

struct ClassConfig {
  std::string name;
  double iou_threshold = 0.7;
  std::vector<std::string> ignore_classes;  // neighbor classes treated as ignored ground truth
  bool threshold_assumed = false;           // true when not the published Car setting
};

/// Car @0.7 (ignores Van), Pedestrian @0.5 (ignores Person_sitting), Cyclist @0.5.
std::vector<ClassConfig> default_class_configs();

struct Frame {
  std::string stem;
  std::vector<ObjectLabel> ground_truth;
  std::vector<ObjectLabel> detections;
};

/// Per-frame inputs for one class at one difficulty.
std::vector<ImageEval> build_image_evals(std::span<const Frame> frames, const ClassConfig& cls, Difficulty d);

struct MetricCell {
  std::optional<ApResult> result;
  std::string error;
};

struct DifficultyReport {
  Difficulty difficulty = Difficulty::Easy;
  int valid_gt = 0;
  MetricCell ap_3d;
  MetricCell ap_bev;
};

struct ClassReport {
  ClassConfig config;
  std::vector<DifficultyReport> levels;
};

struct EvalReport {
  std::vector<ClassReport> classes;
  std::vector<std::string> notes;
};

/// Evaluates every configured class that appears in the ground truth at the
/// requested difficulties. `threads` caps parallelism (>= 1); results do not
/// depend on it.
EvalReport evaluate_dataset(std::span<const Frame> frames, std::span<const ClassConfig> classes,
                            std::span<const Difficulty> difficulties = kAllDifficulties, int threads = 1);

/// Text table: AP 3D and AP BEV x Easy / Mod. / Hard per class.
std::string format_report_table(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

}  // namespace adisep
