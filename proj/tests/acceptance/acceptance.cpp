// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: adisep_acceptance [criterion numbers...]   (default: all)

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "adisep/adis.hpp"
#include "adisep/cli.hpp"
#include "adisep/evaluation.hpp"
#include "adisep/geometry.hpp"
#include "adisep/gradcheck.hpp"
#include "adisep/kitti_io.hpp"
#include "adisep/pseudolidar.hpp"
#include "adisep/uncertainty.hpp"
#include "oracles.hpp"

using namespace adisep;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and sizes ---------------------------------------------

constexpr int kPartitionMaps = 1000;
constexpr int kMaxHeight = 128;
constexpr int kMaxWidth = 256;
constexpr double kPartitionSeconds = 30.0;

constexpr int kHeadDraws = 1000;
constexpr double kBoundSumTol = 1e-9;

constexpr int kGradSeeds = 20;
constexpr double kGradSeconds = 120.0;

constexpr int kSoftInstances = 100;
constexpr double kSoftTau = 1e-3;
constexpr double kSoftMargin = 10.0 * kSoftTau;
constexpr double kSoftTol = 1e-3;

constexpr int kIouPairs = 200;
constexpr long kIouSamples = 1'000'000;
constexpr double kIouTol = 5e-3;
constexpr double kIdentityTol = 1e-9;
constexpr double kRotatedSquareTol = 1e-3;

constexpr int kApDatasets = 300;
constexpr double kApTol = 1e-9;

constexpr int kIoFixtures = 500;
constexpr double kDepthTol = 1.0 / 512.0;
constexpr double kGeometryTol = 0.005 + 1e-12;
constexpr double kScoreTol = 5e-7 + 1e-15;

constexpr int kBackprojectPairs = 50;
constexpr double kReprojectTol = 1e-6;

constexpr int kDemoIntervals = 8;

constexpr int kUncertaintyDraws = 200;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass;
  std::string detail;
};

// ---- 1 ------------------------------------------------------------------------

Verdict partition_correctness() {
  oracle::Rng rng(1001);
  const auto t0 = Clock::now();
  long violations = 0, pixels = 0;
  for (int m = 0; m < kPartitionMaps; ++m) {
    const int h = oracle::uniform_int(rng, 1, kMaxHeight), w = oracle::uniform_int(rng, 1, kMaxWidth);
    const double d_max = oracle::uniform(rng, 10.0, 120.0);
    const auto depth = oracle::random_depth(rng, h, w, 1.25 * d_max, oracle::uniform(rng, 0.0, 1.0));
    const auto part = oracle::random_partition(rng, oracle::uniform_int(rng, 1, 64), d_max);
    const auto stack = separate(depth, part);
    const auto b = part.bounds();
    const int n = part.count();

    std::size_t occupied = 0;
    for (auto o : stack.occupancy()) occupied += o;
    violations += occupied != depth.valid_count();
    violations += !(reconstruct(stack) == depth);

    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        ++pixels;
        int nonzero = 0;
        for (int i = 0; i < n; ++i) {
          const double v = stack.at(i, y, x);
          if (v == 0.0) continue;
          ++nonzero;
          const bool inside = v >= b[i] && (i == n - 1 || v < b[i + 1]);
          violations += !inside;
          violations += v != depth.depth(y, x);
        }
        violations += nonzero != (depth.valid(y, x) ? 1 : 0);
      }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < kPartitionSeconds,
          fmt::format("{} maps, {} pixels, {} violations, {:.1f} s (limit {:.0f} s)", kPartitionMaps, pixels,
                      violations, secs, kPartitionSeconds)};
}

// ---- 2 ------------------------------------------------------------------------

Verdict bounds_contract() {
  oracle::Rng rng(1002);
  long violations = 0;
  double worst_sum = 0.0;
  for (int d = 0; d < kHeadDraws; ++d) {
    const int c = oracle::uniform_int(rng, 1, 4), h = oracle::uniform_int(rng, 1, 6), w = oracle::uniform_int(rng, 1, 6);
    const int n = oracle::uniform_int(rng, 1, 32);
    const double d_max = oracle::uniform(rng, 20.0, 120.0);
    BoundHead head(c, h, w, n);
    head.randomize(rng, oracle::uniform(rng, 0.05, 1.5));
    std::normal_distribution<double> normal;
    std::vector<double> f(static_cast<std::size_t>(c * h * w));
    for (auto& v : f) v = normal(rng);
    try {
      const auto part = compute_bounds(FeatureMap({c, h, w}, f), head, d_max);
      for (double wd : part.widths()) violations += !(wd > 0.0);
      const auto b = part.bounds();
      for (std::size_t i = 1; i < b.size(); ++i) violations += !(b[i] > b[i - 1]);
      worst_sum = std::max(worst_sum, std::abs(b.back() - d_max));
      violations += !(std::abs(b.back() - d_max) <= kBoundSumTol);
    } catch (const std::exception&) {
      ++violations;
    }
  }
  const auto uniform = compute_bounds(FeatureMap({2, 3, 3}, 0.3), BoundHead(2, 3, 3, 8), 80.0);
  bool exact = uniform.count() == 8;
  for (int i = 0; i <= 8 && exact; ++i) exact = uniform.bounds()[i] == 10.0 * i;
  return {violations == 0 && exact,
          fmt::format("{} head draws, {} violations, max |b_n - D_max| {:.1e}; uniform logits give (0,10,...,80) {}",
                      kHeadDraws, violations, worst_sum, exact ? "exactly" : "NOT exactly")};
}

// ---- 3 ------------------------------------------------------------------------

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  GradCheckOptions opt;
  opt.seed = 0;
  opt.trials = kGradSeeds;
  const auto outcomes = run_gradcheck_suite(opt);
  const double secs = seconds_since(t0);
  bool ok = !outcomes.empty();
  std::string worst;
  double worst_ratio = 0.0;
  for (const auto& o : outcomes) {
    ok = ok && o.passed && o.trials >= kGradSeeds;
    const double ratio = o.max_rel_error / o.tolerance;
    if (ratio >= worst_ratio) {
      worst_ratio = ratio;
      worst = fmt::format("{} {:.1e} < {:.0e}", o.name, o.max_rel_error, o.tolerance);
    }
  }
  GradCheckOptions bad = opt;
  bad.trials = 2;
  bad.corrupt_backward = true;
  bool control = true;
  for (const auto& o : run_gradcheck_suite(bad)) control = control && !o.passed;
  return {ok && control && secs < kGradSeconds,
          fmt::format("{} checks x {} seeds, worst {}, corrupted control {}, {:.1f} s (limit {:.0f} s)", outcomes.size(),
                      kGradSeeds, worst, control ? "rejected" : "NOT rejected", secs, kGradSeconds)};
}

// ---- 4 ------------------------------------------------------------------------

Verdict soft_hard_consistency() {
  oracle::Rng rng(1004);
  double worst = 0.0, worst_value = 0.0;
  long compared = 0;
  for (int t = 0; t < kSoftInstances; ++t) {
    const int h = oracle::uniform_int(rng, 8, 48), w = oracle::uniform_int(rng, 8, 48);
    const double d_max = oracle::uniform(rng, 20.0, 100.0);
    const auto depth = oracle::random_depth(rng, h, w, 1.2 * d_max, 0.8);
    const auto part = oracle::random_partition(rng, oracle::uniform_int(rng, 1, 32), d_max);
    const auto weights = soft_interval_weights(depth, part.bounds(), kSoftTau);
    const auto soft = soft_separate(depth, part, kSoftTau);
    const auto hard = separate(depth, part);
    const auto b = part.bounds();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = depth.depth(y, x);
        if (depth.valid(y, x)) {
          double gap = INFINITY;
          for (double bi : b) gap = std::min(gap, std::abs(v - bi));
          if (gap <= kSoftMargin) continue;
        }
        ++compared;
        const int owner = depth.valid(y, x) ? part.interval_of(v) : -1;
        for (int i = 0; i < part.count(); ++i) {
          const double indicator = i == owner ? 1.0 : 0.0;
          worst = std::max(worst, std::abs(weights.at(i, y, x) - indicator));
          worst_value = std::max(worst_value, std::abs(soft.at(i, y, x) - hard.at(i, y, x)));
        }
      }
  }
  return {worst < kSoftTol,
          fmt::format("{} instances, {} pixels beyond 10 tau, max |soft weight - hard indicator| {:.2e} (< {:.0e}); "
                      "max layer-value gap {:.2e} m",
                      kSoftInstances, compared, worst, kSoftTol, worst_value)};
}

// ---- 5 ------------------------------------------------------------------------

Verdict geometry_oracle() {
  oracle::Rng rng(1005);
  double worst = 0.0;
  int overlapping = 0;
  for (int p = 0; p < kIouPairs; ++p) {
    const auto a = oracle::random_box(rng, 1.0);
    const auto b = oracle::random_box(rng, 1.0);
    const double analytic = iou_bev(a, b);
    overlapping += analytic > 0.0;
    worst = std::max(worst, std::abs(analytic - oracle::monte_carlo_bev_iou(a, b, kIouSamples, rng)));
  }
  double identity = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto a = oracle::random_box(rng, 40.0);
    identity = std::max({identity, std::abs(iou_bev(a, a) - 1.0), std::abs(iou_3d(a, a) - 1.0)});
  }
  const Box3D square{0, 1, 0, 1, 1, 1, 0.0};
  Box3D turned = square;
  turned.rotation_y = std::numbers::pi / 4;
  const double inter = polygon_intersection_area(bev_polygon(square), bev_polygon(turned));
  const double rotated_err = std::abs(inter - 2.0 * (std::sqrt(2.0) - 1.0));
  return {worst < kIouTol && identity < kIdentityTol && rotated_err < kRotatedSquareTol,
          fmt::format("{} pairs ({} overlapping) max |IoU - MC| {:.2e} (< {:.0e}); identity err {:.1e}; "
                      "45 deg square overlap err {:.1e}",
                      kIouPairs, overlapping, worst, kIouTol, identity, rotated_err)};
}

// ---- 6 ------------------------------------------------------------------------

Verdict ap_oracle() {
  oracle::Rng rng(1006);
  const IouFn aligned = [](const Box3D& a, const Box3D& b) { return oracle::aligned_iou(a, b); };
  const IouFn rotated = [](const Box3D& a, const Box3D& b) { return iou_3d(a, b); };
  double worst = 0.0;
  int evaluated = 0;
  for (int d = 0; d < kApDatasets; ++d) {
    auto images = oracle::random_dataset(rng, 10, 20, 50);
    images[0].gts.push_back({{50.0, 1.5, 50.0, 1.5, 1.6, 3.9, 0.0}, false});  // at least one valid GT
    const IouFn& iou = d % 2 ? rotated : aligned;
    const double thr = d % 3 ? 0.5 : 0.7;
    worst = std::max(worst, std::abs(average_precision(images, iou, thr).ap - oracle::reference_ap(images, iou, thr)));
    ++evaluated;
  }
  bool fixtures = true;
  for (int f = 0; f < 20; ++f) {
    auto images = oracle::random_dataset(rng, 10, 20, 0);
    images[0].gts.push_back({{50.0, 1.5, 50.0, 1.5, 1.6, 3.9, 0.0}, false});
    auto perfect = images;
    for (auto& img : perfect) {
      img.dets.clear();
      img.dont_care.clear();
      for (const auto& g : img.gts) img.dets.push_back({g.box, oracle::uniform(rng, 0.01, 1.0), std::nullopt});
    }
    fixtures = fixtures && average_precision(perfect, rotated, 0.7).ap == 100.0;
    fixtures = fixtures && average_precision(images, rotated, 0.7).ap == 0.0;
  }
  return {worst <= kApTol && fixtures,
          fmt::format("{} datasets, max |AP - reference| {:.1e} (<= {:.0e}); perfect = 100.0 and empty = 0.0 fixtures {}",
                      evaluated, worst, kApTol, fixtures ? "exact" : "FAILED")};
}

// ---- 7 ------------------------------------------------------------------------

ObjectLabel random_label(oracle::Rng& rng) {
  static const std::vector<std::string> classes{"Car", "Van", "Truck", "Pedestrian", "Person_sitting", "Cyclist",
                                                "Tram", "Misc"};
  ObjectLabel l;
  l.type = classes[oracle::uniform_int(rng, 0, static_cast<int>(classes.size()) - 1)];
  l.truncation = oracle::uniform(rng, 0, 1);
  l.occlusion = oracle::uniform_int(rng, 0, 3);
  l.alpha = oracle::uniform(rng, -3.14, 3.14);
  l.bbox.left = oracle::uniform(rng, 0, 1200);
  l.bbox.top = oracle::uniform(rng, 0, 350);
  l.bbox.right = l.bbox.left + oracle::uniform(rng, 0.5, 300);
  l.bbox.bottom = l.bbox.top + oracle::uniform(rng, 0.5, 150);
  l.height = oracle::uniform(rng, 0.3, 4);
  l.width = oracle::uniform(rng, 0.3, 3);
  l.length = oracle::uniform(rng, 0.3, 16);
  l.x = oracle::uniform(rng, -40, 40);
  l.y = oracle::uniform(rng, -2, 4);
  l.z = oracle::uniform(rng, 0.5, 90);
  l.rotation_y = oracle::uniform(rng, -3.14, 3.14);
  l.score = oracle::uniform(rng, 0, 1);
  return l;
}

bool labels_close(const ObjectLabel& a, const ObjectLabel& b) {
  const double geo[][2] = {{a.truncation, b.truncation}, {a.alpha, b.alpha}, {a.bbox.left, b.bbox.left},
                           {a.bbox.top, b.bbox.top},     {a.bbox.right, b.bbox.right}, {a.bbox.bottom, b.bbox.bottom},
                           {a.height, b.height},         {a.width, b.width},   {a.length, b.length},
                           {a.x, b.x},                   {a.y, b.y},           {a.z, b.z},
                           {a.rotation_y, b.rotation_y}};
  for (const auto& g : geo) {
    if (std::abs(g[0] - g[1]) > kGeometryTol) return false;
  }
  return a.type == b.type && a.occlusion == b.occlusion && a.score.has_value() == b.score.has_value() &&
         (!a.score || std::abs(*a.score - *b.score) <= kScoreTol);
}

Verdict io_round_trips() {
  oracle::Rng rng(1007);
  long depth_bad = 0, label_bad = 0, ply_bad = 0;
  double worst_depth = 0.0;
  for (int f = 0; f < kIoFixtures; ++f) {
    const auto depth = oracle::random_depth(rng, oracle::uniform_int(rng, 1, 48), oracle::uniform_int(rng, 1, 64),
                                            oracle::uniform(rng, 1.0, 255.0), oracle::uniform(rng, 0.0, 1.0));
    const auto back = read_depth_png(write_depth_png(depth));
    for (std::size_t i = 0; i < depth.size(); ++i) {
      const double err = std::abs(back.depth(i) - depth.depth(i));
      worst_depth = std::max(worst_depth, err);
      depth_bad += err > kDepthTol;
    }

    std::vector<ObjectLabel> labels(oracle::uniform_int(rng, 0, 12));
    for (auto& l : labels) l = random_label(rng);
    const auto results_text = write_result_file(labels);
    const auto parsed = parse_label_file(results_text);
    label_bad += parsed.size() != labels.size();
    for (std::size_t i = 0; i < std::min(parsed.size(), labels.size()); ++i) label_bad += !labels_close(parsed[i], labels[i]);
    label_bad += write_result_file(parsed) != results_text;
    auto unscored = labels;
    for (auto& l : unscored) l.score.reset();
    const auto label_text = write_label_file(unscored);
    label_bad += write_label_file(parse_label_file(label_text)) != label_text;

    PointCloud cloud;
    const int n = oracle::uniform_int(rng, 0, 200);
    const bool tagged = oracle::coin(rng, 0.5);
    for (int i = 0; i < n; ++i) {
      cloud.points.push_back({oracle::uniform(rng, -80, 80), oracle::uniform(rng, -5, 5), oracle::uniform(rng, 0.01, 120)});
      if (tagged) cloud.intervals.push_back(oracle::uniform_int(rng, 0, 63));
    }
    const auto ply = read_ply(write_ply(cloud));
    ply_bad += ply.size() != cloud.size() || ply.intervals != cloud.intervals;
    for (std::size_t i = 0; i < std::min(ply.size(), cloud.size()); ++i) {
      const auto& p = ply.points[i];
      const auto& q = cloud.points[i];
      ply_bad += p.x != static_cast<float>(q.x) || p.y != static_cast<float>(q.y) || p.z != static_cast<float>(q.z);
    }
  }
  return {depth_bad == 0 && label_bad == 0 && ply_bad == 0,
          fmt::format("{} fixtures; depth max err {:.2e} m (<= 1/512), {} bad pixels; label/result mismatches {}; "
                      "PLY mismatches {} (float precision)",
                      kIoFixtures, worst_depth, depth_bad, label_bad, ply_bad)};
}

// ---- 8 ------------------------------------------------------------------------

Verdict backprojection() {
  oracle::Rng rng(1008);
  double worst = 0.0;
  long points = 0, multiset_bad = 0;
  using Key = std::tuple<double, double, double>;
  for (int p = 0; p < kBackprojectPairs; ++p) {
    CameraCalib calib = CameraCalib::from_intrinsics(oracle::uniform(rng, 300, 1500), oracle::uniform(rng, 300, 1500),
                                                     oracle::uniform(rng, 100, 800), oracle::uniform(rng, 50, 300));
    calib.p2[3] = oracle::uniform(rng, -400, 60);
    calib.p2[7] = oracle::uniform(rng, -2, 2);
    calib.p2[11] = oracle::uniform(rng, -0.01, 0.01);
    const auto depth = oracle::random_depth(rng, oracle::uniform_int(rng, 4, 120), oracle::uniform_int(rng, 4, 200),
                                            100.0, oracle::uniform(rng, 0.2, 1.0));
    const auto cloud = backproject(depth, calib);
    std::size_t k = 0;
    for (int y = 0; y < depth.height(); ++y)
      for (int x = 0; x < depth.width(); ++x) {
        // pixels whose projective depth does not clear P2[2,3] unproject behind the camera and are dropped
        if (!depth.valid(y, x) || depth.depth(y, x) - calib.p2[11] <= 0.0 || k >= cloud.size()) continue;
        const auto px = project(calib, cloud.points[k++]);
        worst = std::max(worst, std::hypot(px.u - x, px.v - y));
      }
    points += static_cast<long>(cloud.size());
    multiset_bad += k != cloud.size();

    const auto part = oracle::random_partition(rng, oracle::uniform_int(rng, 1, 16), 80.0);
    const auto stack = separate(depth, part);
    const auto tagged = backproject_stack(stack, calib);
    const auto plain = backproject(reconstruct(stack), calib);
    auto keys = [](const PointCloud& c) {
      std::vector<Key> v;
      for (const auto& q : c.points) v.emplace_back(q.x, q.y, q.z);
      std::sort(v.begin(), v.end());
      return v;
    };
    multiset_bad += keys(tagged) != keys(plain);
  }
  return {worst < kReprojectTol && multiset_bad == 0,
          fmt::format("{} pairs, {} points, max reprojection residual {:.2e} px (< {:.0e}); stack/reconstruct "
                      "multiset mismatches {}",
                      kBackprojectPairs, points, worst, kReprojectTol, multiset_bad)};
}

// ---- 9 ------------------------------------------------------------------------

Verdict end_to_end_demo() {
  const std::string scene = std::string(ADISEP_TEST_DATA) + "/scene/scene_000.png";
  const auto base = fs::temp_directory_path() / "adisep_acceptance_demo";
  fs::remove_all(base);
  std::vector<std::vector<std::uint8_t>> runs[2];
  std::size_t layer_total = 0;
  int layer_files = 0;
  bool cli_ok = true;
  for (int r = 0; r < 2; ++r) {
    const auto dir = base / fmt::format("run{}", r);
    std::ostringstream out, err;
    cli_ok = cli_ok && cli::run({"separate", scene, "-o", dir.string(), "--nd", std::to_string(kDemoIntervals)}, out,
                                err) == 0;
    if (!cli_ok) break;
    for (int i = 1; fs::exists(dir / fmt::format("sd_{:02}.png", i)); ++i) {
      const auto bytes = read_file_bytes((dir / fmt::format("sd_{:02}.png", i)).string());
      if (r == 0) {
        layer_total += read_depth_png(bytes).valid_count();
        ++layer_files;
      }
      runs[r].push_back(bytes);
    }
    runs[r].push_back(read_file_bytes((dir / "layers.png").string()));
    runs[r].push_back(read_file_bytes((dir / "bounds.json").string()));
  }
  if (!cli_ok) return {false, "adisep separate returned a nonzero exit code"};
  const auto depth = read_depth_png(read_file_bytes(scene));
  const auto composite = read_image_png(runs[0][runs[0].size() - 2]);
  const bool composite_ok =
      composite.channels == 3 && composite.width == depth.width() && composite.height == depth.height();
  const bool deterministic = runs[0] == runs[1];
  fs::remove_all(base);
  return {layer_files == kDemoIntervals && layer_total == depth.valid_count() && composite_ok && deterministic,
          fmt::format("{} layers, occupancy sum {} vs {} valid pixels, layered RGB export {}, runs {}", layer_files,
                      layer_total, depth.valid_count(), composite_ok ? "ok" : "BAD",
                      deterministic ? "byte-identical" : "DIFFER")};
}

// ---- 10 -----------------------------------------------------------------------

Verdict formulas_as_stated() {
  oracle::Rng rng(1010);
  long outside = 0, not_half = 0, fuse_bad = 0;
  for (int t = 0; t < kUncertaintyDraws; ++t) {
    const int c = oracle::uniform_int(rng, 1, 6), h = oracle::uniform_int(rng, 1, 8), w = oracle::uniform_int(rng, 1, 8);
    Conv2d reduce(c, 1, 1, 1);
    reduce.kernel.value = oracle::random_values(rng, reduce.kernel.size(), -3, 3);
    reduce.bias.value = oracle::random_values(rng, 1, -3, 3);
    const FeatureMap fused({c, h, w}, oracle::random_values(rng, static_cast<std::size_t>(c * h * w), -10, 10));
    const int H = h * oracle::uniform_int(rng, 1, 4), W = w * oracle::uniform_int(rng, 1, 4);
    const auto u = compute_uncertainty(fused, reduce, H, W);
    for (double v : u.values()) outside += !(v > 0.0 && v < 1.0);
    const auto flat = compute_uncertainty(fused, Conv2d(c, 1, 1, 1), H, W);
    for (double v : flat.values()) not_half += v != 0.5;

    const Shape s{c, h, w};
    const FeatureMap fi(s, oracle::random_values(rng, s.size())), fd(s, oracle::random_values(rng, s.size()));
    const FeatureMap fsd(s, oracle::random_values(rng, s.size())), fu(s, oracle::random_values(rng, s.size()));
    const auto out = fuse_features(fi, fd, fsd, fu);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          fuse_bad += out.appearance.at(ch, y, x) != fi.at(ch, y, x) + fd.at(ch, y, x);
          fuse_bad += out.localization.at(ch, y, x) != fd.at(ch, y, x) + fsd.at(ch, y, x) + fu.at(ch, y, x);
        }
  }
  return {outside == 0 && not_half == 0 && fuse_bad == 0,
          fmt::format("{} draws; U outside (0,1): {}; U != 0.5 under zero logits: {}; I_A / I_L mismatches vs scalar "
                      "loops: {}",
                      kUncertaintyDraws, outside, not_half, fuse_bad)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"partition correctness", partition_correctness},
      {"bounds contract", bounds_contract},
      {"gradient suite", gradient_suite},
      {"soft/hard consistency", soft_hard_consistency},
      {"geometry oracle", geometry_oracle},
      {"AP oracle", ap_oracle},
      {"I/O round-trips", io_round_trips},
      {"back-projection", backprojection},
      {"end-to-end demo", end_to_end_demo},
      {"fusion and uncertainty formulas", formulas_as_stated},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << fmt::format("[{}] {:>2}. {}: {}\n", v.pass ? "PASS" : "FAIL", id, criteria[k].first, v.detail)
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
