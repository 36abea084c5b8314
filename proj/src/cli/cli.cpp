#include "adisep/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <thread>

#include "adisep/adis.hpp"
#include "adisep/config.hpp"
#include "adisep/errors.hpp"
#include "adisep/evaluation.hpp"
#include "adisep/gradcheck.hpp"
#include "adisep/kitti_io.hpp"
#include "adisep/pipeline.hpp"
#include "adisep/pseudolidar.hpp"

namespace fs = std::filesystem;

namespace adisep::cli {

namespace {

/// Input or configuration problem; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string config_path;
  int nd = 0;
  double dmax = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  // one option object per subcommand, all bound to the same storage
  std::vector<CLI::Option*> nd_opts, dmax_opts, tau_opts, seed_opts;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON configuration file");
    nd_opts.push_back(app->add_option("--nd", nd, "number of distance intervals"));
    dmax_opts.push_back(app->add_option("--dmax", dmax, "maximum depth range in meters"));
    tau_opts.push_back(app->add_option("--tau", tau, "soft-separation temperature in meters"));
    seed_opts.push_back(app->add_option("--seed", seed, "seed for the demo network"));
  }

  static bool given(const std::vector<CLI::Option*>& opts) {
    return std::any_of(opts.begin(), opts.end(), [](const CLI::Option* o) { return o->count() > 0; });
  }

  Config resolve() const {
    Config c;
    if (!config_path.empty()) c = parse_config_json(read_text_file(config_path));
    if (given(nd_opts)) c.intervals = nd;
    if (given(dmax_opts)) c.d_max = dmax;
    if (given(tau_opts)) c.tau = tau;
    if (given(seed_opts)) c.seed = seed;
    c.validate();
    return c;
  }
};

std::optional<Image8> load_image(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_image_png(read_file_bytes(path));
}

DemoNetwork make_network(const Config& c, bool zero) {
  return zero ? DemoNetwork::zeroed(c) : DemoNetwork::seeded(c, c.seed);
}

DepthMap load_depth(const std::string& path) { return read_depth_png(read_file_bytes(path)); }

std::vector<fs::path> list_files(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) { return a.stem() < b.stem(); });
  return files;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int threads = std::min<int>(thread_cap(), static_cast<int>(std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---- separate ----------------------------------------------------------------

struct SeparateArgs {
  std::string depth;
  std::string image;
  std::string out_dir = ".";
  bool uniform = false;
};

int cmd_separate(const SeparateArgs& a, const Config& c, std::ostream& out) {
  const DepthMap depth = load_depth(a.depth);
  const auto image = load_image(a.image);
  const DemoNetwork net = make_network(c, false);
  const auto part = demo_bounds(net, depth, image ? &*image : nullptr, c.d_max, a.uniform);
  const SubDepthStack stack = separate(depth, part);
  const auto occupancy = stack.occupancy();

  fs::create_directories(a.out_dir);
  for (int i = 0; i < stack.layers(); ++i) {
    DepthMap layer(stack.height(), stack.width(), std::vector<double>(stack.layer(i).begin(), stack.layer(i).end()));
    write_file_bytes((fs::path(a.out_dir) / fmt::format("sd_{:02}.png", i + 1)).string(), write_depth_png(layer));
  }
  write_file_bytes((fs::path(a.out_dir) / "layers.png").string(), write_image_png(render_layers(stack, c.d_max)));

  nlohmann::json j;
  j["input"] = fs::path(a.depth).filename().string();
  j["nd"] = part.count();
  j["dmax"] = c.d_max;
  j["bounds_source"] = a.uniform ? "uniform" : "head";
  j["bounds"] = std::vector<double>(part.bounds().begin(), part.bounds().end());
  j["widths"] = std::vector<double>(part.widths().begin(), part.widths().end());
  j["occupancy"] = occupancy;
  j["valid_pixels"] = depth.valid_count();
  write_text_file((fs::path(a.out_dir) / "bounds.json").string(), j.dump(2) + "\n");

  out << fmt::format("n_d {}  D_max {:.2f} m  bounds from {}\n", part.count(), c.d_max,
                     a.uniform ? "uniform spacing" : "bound head");
  out << fmt::format("{:>8} {:>10} {:>10} {:>10}\n", "interval", "lower[m]", "upper[m]", "pixels");
  for (int i = 0; i < part.count(); ++i) {
    out << fmt::format("{:>8} {:>10.3f} {:>10.3f} {:>10}\n", i + 1, part.lower(i), part.upper(i), occupancy[i]);
  }
  out << fmt::format("valid pixels {}  layers written to {}\n", depth.valid_count(), a.out_dir);
  return kSuccess;
}

// ---- uncertainty -------------------------------------------------------------

struct UncertaintyArgs {
  std::string depth;
  std::string image;
  std::string out_path = "uncertainty.png";
  bool zero_weights = false;
};

int cmd_uncertainty(const UncertaintyArgs& a, const Config& c, std::ostream& out) {
  const DepthMap depth = load_depth(a.depth);
  const auto image = load_image(a.image);
  const DemoNetwork net = make_network(c, a.zero_weights);
  const UncertaintyMap u = demo_uncertainty(net, depth, image ? &*image : nullptr, c.d_max);
  if (auto parent = fs::path(a.out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file_bytes(a.out_path, write_uncertainty_png(u));
  const auto v = u.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  out << fmt::format("uncertainty {}x{}  min {:.6f}  max {:.6f}  mean {:.6f}  -> {}\n", u.width(), u.height(), *lo,
                     *hi, mean, a.out_path);
  out << "pixel = round(255 * U); U near 1 keeps depth, near 0 suppresses it\n";
  return kSuccess;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string results_dir;
  std::string labels_dir;
  std::string json_path;
};

std::vector<ClassConfig> class_configs(const Config& c) {
  std::vector<ClassConfig> out;
  const auto defaults = default_class_configs();
  for (const auto& [name, thr] : c.iou_thresholds) {
    ClassConfig cc{name, thr, {}, true};
    for (const auto& d : defaults) {
      if (d.name == name) cc.ignore_classes = d.ignore_classes;
    }
    cc.threshold_assumed = !(name == "Car" && thr == 0.7);
    out.push_back(cc);
  }
  // Keep the usual Car / Pedestrian / Cyclist order, then anything else alphabetically.
  auto rank = [](const std::string& n) {
    if (n == "Car") return 0;
    if (n == "Pedestrian") return 1;
    if (n == "Cyclist") return 2;
    return 3;
  };
  std::stable_sort(out.begin(), out.end(), [&](const ClassConfig& a, const ClassConfig& b) {
    return rank(a.name) != rank(b.name) ? rank(a.name) < rank(b.name) : a.name < b.name;
  });
  return out;
}

Difficulty parse_difficulty(const std::string& s) {
  if (s == "Easy") return Difficulty::Easy;
  if (s == "Moderate") return Difficulty::Moderate;
  return Difficulty::Hard;
}

int cmd_eval(const EvalArgs& a, const Config& c, std::ostream& out, std::ostream& err) {
  const auto labels = list_files(a.labels_dir, ".txt");
  const auto results = list_files(a.results_dir, ".txt");
  std::map<std::string, fs::path> result_by_stem;
  for (const auto& r : results) result_by_stem[r.stem().string()] = r;
  std::map<std::string, fs::path> label_by_stem;
  for (const auto& l : labels) label_by_stem[l.stem().string()] = l;

  std::vector<std::string> orphans;
  for (const auto& [stem, _] : result_by_stem) {
    if (!label_by_stem.count(stem)) orphans.push_back(stem);
  }
  if (!orphans.empty()) {
    err << "result files without matching labels:\n";
    for (const auto& s : orphans) err << "  " << s << "\n";
    return kUsageError;
  }

  std::vector<Frame> frames(labels.size());
  parallel_for(labels.size(), [&](std::size_t i) {
    Frame& f = frames[i];
    f.stem = labels[i].stem().string();
    try {
      f.ground_truth = parse_label_file(read_text_file(labels[i].string()));
      if (auto it = result_by_stem.find(f.stem); it != result_by_stem.end()) {
        f.detections = parse_label_file(read_text_file(it->second.string()));
      }
    } catch (const ParseError& e) {
      throw UsageError(fmt::format("{}: {}", f.stem, e.what()));
    }
  });

  std::vector<Difficulty> levels;
  for (const auto& d : c.difficulties) levels.push_back(parse_difficulty(d));
  const auto classes = class_configs(c);
  const EvalReport report = evaluate_dataset(frames, classes, levels, thread_cap());

  bool any = false;
  for (const auto& cls : report.classes) {
    for (const auto& l : cls.levels) any = any || l.ap_3d.result.has_value();
  }
  out << fmt::format("{} frames, {} with results\n", frames.size(), result_by_stem.size());
  out << format_report_table(report);
  if (!a.json_path.empty()) write_text_file(a.json_path, report_to_json(report) + "\n");
  if (!any) {
    err << "error: no valid ground truth for any evaluated class and difficulty\n";
    return kUsageError;
  }
  return kSuccess;
}

// ---- export-cloud ------------------------------------------------------------

struct CloudArgs {
  std::string depth;
  std::string calib;
  std::string image;
  std::string out_path = "cloud.ply";
  bool separated = false;
  bool uniform = false;
};

int cmd_export_cloud(const CloudArgs& a, const Config& c, std::ostream& out) {
  const DepthMap depth = load_depth(a.depth);
  const CameraCalib calib = parse_calib(read_text_file(a.calib));
  PointCloud cloud;
  if (a.separated) {
    const auto image = load_image(a.image);
    const DemoNetwork net = make_network(c, false);
    const auto part = demo_bounds(net, depth, image ? &*image : nullptr, c.d_max, a.uniform);
    cloud = backproject_stack(separate(depth, part), calib);
  } else {
    cloud = backproject(depth, calib);
  }
  if (auto parent = fs::path(a.out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_text_file(a.out_path, write_ply(cloud));
  out << fmt::format("{} points{} -> {}\n", cloud.size(), cloud.tagged() ? " (interval-tagged)" : "", a.out_path);
  return kSuccess;
}

// ---- gradcheck ---------------------------------------------------------------

struct GradArgs {
  int trials = 20;
  bool corrupt = false;
};

int cmd_gradcheck(const GradArgs& a, const Config& c, std::ostream& out) {
  if (a.trials < 1) throw UsageError("--trials must be >= 1");
  GradCheckOptions opt;
  opt.seed = c.seed;
  opt.trials = a.trials;
  opt.corrupt_backward = a.corrupt;
  const auto results = run_gradcheck_suite(opt);
  bool ok = true;
  out << fmt::format("gradient check: seed {}  trials {}{}\n", c.seed, a.trials,
                     a.corrupt ? "  [corrupted backward self-test]" : "");
  out << fmt::format("{:<20} {:>14} {:>10} {:>6}\n", "kernel", "max rel err", "tolerance", "");
  for (const auto& r : results) {
    out << fmt::format("{:<20} {:>14.3e} {:>10.0e} {:>6}\n", r.name, r.max_rel_error, r.tolerance,
                       r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  out << (ok ? "all kernels passed\n" : "gradient check FAILED\n");
  return ok ? kSuccess : kVerificationFailure;
}

// ---- sweep-nd ----------------------------------------------------------------

struct SweepArgs {
  std::string depth_dir;
  std::vector<int> nd_list;
  std::string json_path;
};

int cmd_sweep(const SweepArgs& a, Config c, std::ostream& out) {
  if (!a.nd_list.empty()) c.sweep_intervals = a.nd_list;
  c.validate();
  const auto files = list_files(a.depth_dir, ".png");
  if (files.empty()) throw UsageError("no depth PNGs in " + a.depth_dir);

  std::vector<std::vector<SeparationStats>> stats(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    const DepthMap depth = load_depth(files[i].string());
    for (int n : c.sweep_intervals) stats[i].push_back(separation_stats(depth, IntervalPartition::uniform(n, c.d_max)));
  });

  nlohmann::json j;
  j["dmax"] = c.d_max;
  j["bounds"] = "uniform";
  j["files"] = nlohmann::json::array();
  out << fmt::format("{:<16} {:>5} {:>10} {:>10} {:>10} {:>9}  occupancy\n", "file", "n_d", "valid", "boundary",
                     "bnd.frac", "sparsity");
  for (std::size_t i = 0; i < files.size(); ++i) {
    nlohmann::json jf;
    jf["file"] = files[i].filename().string();
    for (const auto& s : stats[i]) {
      std::string occ;
      for (auto o : s.occupancy) occ += fmt::format("{} ", o);
      out << fmt::format("{:<16} {:>5} {:>10} {:>10} {:>10.4f} {:>9.4f}  {}\n", files[i].stem().string(), s.intervals,
                         s.valid_pixels, s.boundary_pixels, s.boundary_fraction, s.mean_sparsity, occ);
      jf["sweep"].push_back({{"nd", s.intervals},
                             {"valid_pixels", s.valid_pixels},
                             {"boundary_pixels", s.boundary_pixels},
                             {"boundary_fraction", s.boundary_fraction},
                             {"mean_sparsity", s.mean_sparsity},
                             {"occupancy", s.occupancy}});
    }
    j["files"].push_back(jf);
  }
  if (!a.json_path.empty()) write_text_file(a.json_path, j.dump(2) + "\n");
  return kSuccess;
}

}  // namespace

int thread_cap() {
  const char* env = std::getenv("ADISEP_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive distance-interval separation toolkit", "adisep"};
  app.require_subcommand(1);

  CommonFlags common;

  SeparateArgs sep;
  auto* s = app.add_subcommand("separate", "split a 16-bit depth PNG into sub-depth layers");
  s->add_option("depth", sep.depth, "KITTI-encoded depth PNG")->required();
  s->add_option("--image", sep.image, "optional RGB image for the demo encoder");
  s->add_option("-o,--out", sep.out_dir, "output directory");
  s->add_flag("--uniform-bounds", sep.uniform, "bypass the bound head: D_max/n_d spacing");

  UncertaintyArgs unc;
  auto* u = app.add_subcommand("uncertainty", "export the demo uncertainty map as 8-bit PNG");
  u->add_option("depth", unc.depth, "KITTI-encoded depth PNG")->required();
  u->add_option("--image", unc.image, "optional RGB image for the demo encoder");
  u->add_option("-o,--out", unc.out_path, "output PNG");
  u->add_flag("--zero-weights", unc.zero_weights, "use an all-zero demo network (U = 0.5)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "AP@40 (3D and BEV) of KITTI result files");
  e->add_option("results", ev.results_dir, "directory of result .txt files")->required();
  e->add_option("labels", ev.labels_dir, "directory of label .txt files")->required();
  e->add_option("--json", ev.json_path, "also write a JSON report");

  CloudArgs cl;
  auto* x = app.add_subcommand("export-cloud", "back-project a depth PNG to an ASCII PLY point cloud");
  x->add_option("depth", cl.depth, "KITTI-encoded depth PNG")->required();
  x->add_option("calib", cl.calib, "KITTI calibration file")->required();
  x->add_option("--image", cl.image, "optional RGB image for the demo encoder");
  x->add_option("-o,--out", cl.out_path, "output PLY");
  x->add_flag("--separated", cl.separated, "tag points with their distance interval");
  x->add_flag("--uniform-bounds", cl.uniform, "uniform intervals for --separated");

  GradArgs gr;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of every backward kernel");
  g->add_option("--trials", gr.trials, "random instances per kernel");
  g->add_flag("--corrupt-backward", gr.corrupt, "self-test: perturb analytic gradients, expect failure");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep-nd", "separation statistics for several n_d values");
  w->add_option("depth_dir", sw.depth_dir, "directory of depth PNGs")->required();
  w->add_option("--nd-list", sw.nd_list, "interval counts (default 4,8,16,32)")->delimiter(',');
  w->add_option("--json", sw.json_path, "also write a JSON report");

  for (auto* sub : {s, u, e, x, g, w}) common.attach(sub);

  std::vector<std::string> argv_store{"adisep"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsageError;
  }

  try {
    const Config config = common.resolve();
    if (s->parsed()) return cmd_separate(sep, config, out);
    if (u->parsed()) return cmd_uncertainty(unc, config, out);
    if (e->parsed()) return cmd_eval(ev, config, out, err);
    if (x->parsed()) return cmd_export_cloud(cl, config, out);
    if (g->parsed()) return cmd_gradcheck(gr, config, out);
    if (w->parsed()) return cmd_sweep(sw, config, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace adisep::cli
