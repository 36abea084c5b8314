// numpy-facing bindings. Depth maps are float64 (H, W) arrays where values
// <= 0 or non-finite mark missing pixels; stacks and features are (C, H, W).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "adisep/adis.hpp"
#include "adisep/errors.hpp"
#include "adisep/evaluation.hpp"
#include "adisep/geometry.hpp"
#include "adisep/kitti_io.hpp"
#include "adisep/pseudolidar.hpp"
#include "adisep/uncertainty.hpp"

namespace py = pybind11;
using namespace adisep;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

void require_ndim(const Array& a, py::ssize_t ndim, const char* what) {
  if (a.ndim() != ndim) {
    throw ShapeError(std::string(what) + " must have " + std::to_string(ndim) + " dimensions, got " +
                     std::to_string(a.ndim()));
  }
}

DepthMap to_depth(const Array& a) {
  require_ndim(a, 2, "depth");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return DepthMap(h, w, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_depth(const DepthMap& d) {
  Array out({d.height(), d.width()});
  std::copy(d.depths().begin(), d.depths().end(), out.mutable_data());
  return out;
}

FeatureMap to_feature(const Array& a, const char* what) {
  require_ndim(a, 3, what);
  const Shape s{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
  return FeatureMap(s, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_feature(const FeatureMap& f) {
  Array out({f.channels(), f.height(), f.width()});
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

Array from_stack(const SubDepthStack& s) { return from_feature(s.to_feature_map()); }

SubDepthStack to_stack(const Array& a) {
  require_ndim(a, 3, "stack");
  SubDepthStack s(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  const auto r = a.unchecked<3>();
  for (int i = 0; i < s.layers(); ++i)
    for (int y = 0; y < s.height(); ++y)
      for (int x = 0; x < s.width(); ++x) s.at(i, y, x) = r(i, y, x);
  return s;
}

Array from_vector(std::span<const double> v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

CameraCalib to_calib(const Array& p2) {
  if (p2.size() != 12) throw ShapeError("P2 must hold 12 values (3x4)");
  CameraCalib c;
  std::copy(p2.data(), p2.data() + 12, c.p2.begin());
  return c;
}

Array from_cloud(const PointCloud& cloud) {
  Array out({static_cast<py::ssize_t>(cloud.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    w(i, 0) = cloud.points[i].x;
    w(i, 1) = cloud.points[i].y;
    w(i, 2) = cloud.points[i].z;
  }
  return out;
}

Box3D to_box(const std::array<double, 7>& b) { return {b[0], b[1], b[2], b[3], b[4], b[5], b[6]}; }

py::dict label_to_dict(const ObjectLabel& l) {
  py::dict d;
  d["type"] = l.type;
  d["truncation"] = l.truncation;
  d["occlusion"] = l.occlusion;
  d["alpha"] = l.alpha;
  d["bbox"] = py::make_tuple(l.bbox.left, l.bbox.top, l.bbox.right, l.bbox.bottom);
  d["dimensions"] = py::make_tuple(l.height, l.width, l.length);
  d["location"] = py::make_tuple(l.x, l.y, l.z);
  d["rotation_y"] = l.rotation_y;
  d["score"] = l.score ? py::object(py::float_(*l.score)) : py::object(py::none());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive depth interval separation, pseudo-LiDAR and KITTI evaluation kernels";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_RuntimeError);

  m.def(
      "uniform_bounds",
      [](int count, double d_max) { return from_vector(IntervalPartition::uniform(count, d_max).bounds()); },
      py::arg("count"), py::arg("d_max"));
  m.def(
      "interval_of",
      [](std::vector<double> bounds, double meters) {
        return IntervalPartition::from_bounds(std::move(bounds)).interval_of(meters);
      },
      py::arg("bounds"), py::arg("meters"));
  m.def(
      "separate",
      [](const Array& depth, std::vector<double> bounds) {
        return from_stack(separate(to_depth(depth), IntervalPartition::from_bounds(std::move(bounds))));
      },
      py::arg("depth"), py::arg("bounds"), "Hard separation into an (n_d, H, W) stack.");
  m.def(
      "reconstruct", [](const Array& stack) { return from_depth(reconstruct(to_stack(stack))); }, py::arg("stack"));
  m.def(
      "soft_separate",
      [](const Array& depth, const std::vector<double>& bounds, double tau) {
        return from_feature(soft_separate(to_depth(depth), bounds, tau));
      },
      py::arg("depth"), py::arg("bounds"), py::arg("tau"));
  m.def(
      "soft_interval_weights",
      [](const Array& depth, const std::vector<double>& bounds, double tau) {
        return from_feature(soft_interval_weights(to_depth(depth), bounds, tau));
      },
      py::arg("depth"), py::arg("bounds"), py::arg("tau"));

  m.def(
      "compute_uncertainty",
      [](const Array& fused, const std::vector<double>& weights, double bias, int height, int width) {
        const auto f = to_feature(fused, "fused");
        Conv2d reduce(f.channels(), 1, 1, 1);
        if (weights.size() != static_cast<std::size_t>(f.channels())) {
          throw ShapeError("one reduce weight per fused channel is required");
        }
        reduce.kernel.value = weights;
        reduce.bias.value = {bias};
        const auto u = compute_uncertainty(f, reduce, height, width);
        return from_vector(u.values()).reshape({height, width});
      },
      py::arg("fused"), py::arg("weights"), py::arg("bias"), py::arg("height"), py::arg("width"),
      "U = 1 - sigmoid(upsample(1x1 conv(fused))) at (height, width).");
  m.def(
      "fuse_features",
      [](const Array& f_i, const Array& f_d, const Array& f_sd, const Array& f_u) {
        const auto out = fuse_features(to_feature(f_i, "F_I"), to_feature(f_d, "F_D"), to_feature(f_sd, "F_SD"),
                                       to_feature(f_u, "F_U"));
        return py::make_tuple(from_feature(out.appearance), from_feature(out.localization));
      },
      py::arg("f_i"), py::arg("f_d"), py::arg("f_sd"), py::arg("f_u"),
      "Returns (I_A, I_L) = (F_I + F_D, F_D + F_SD + F_U).");

  m.def(
      "iou_bev", [](const std::array<double, 7>& a, const std::array<double, 7>& b) { return iou_bev(to_box(a), to_box(b)); },
      py::arg("a"), py::arg("b"), "Boxes are (x, y, z, h, w, l, rotation_y) in camera coordinates.");
  m.def(
      "iou_3d", [](const std::array<double, 7>& a, const std::array<double, 7>& b) { return iou_3d(to_box(a), to_box(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "backproject", [](const Array& depth, const Array& p2) { return from_cloud(backproject(to_depth(depth), to_calib(p2))); },
      py::arg("depth"), py::arg("p2"), "Camera-frame (N, 3) points, row-major pixel order.");
  m.def(
      "backproject_stack",
      [](const Array& stack, const Array& p2) {
        const auto cloud = backproject_stack(to_stack(stack), to_calib(p2));
        return py::make_tuple(from_cloud(cloud), cloud.intervals);
      },
      py::arg("stack"), py::arg("p2"), "Returns (points, interval index per point).");
  m.def(
      "project",
      [](const Array& p2, const Array& points) {
        require_ndim(points, 2, "points");
        const auto calib = to_calib(p2);
        const auto r = points.unchecked<2>();
        Array out({points.shape(0), py::ssize_t{2}});
        auto w = out.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < points.shape(0); ++i) {
          const auto px = project(calib, {r(i, 0), r(i, 1), r(i, 2)});
          w(i, 0) = px.u;
          w(i, 1) = px.v;
        }
        return out;
      },
      py::arg("p2"), py::arg("points"));
  m.def(
      "parse_calib", [](const std::string& text) { return from_vector(parse_calib(text).p2).reshape({3, 4}); },
      py::arg("text"), "P2 of a KITTI calibration file as a (3, 4) array.");

  m.def(
      "read_depth_png", [](const std::string& path) { return from_depth(read_depth_png(read_file_bytes(path))); },
      py::arg("path"));
  m.def(
      "write_depth_png",
      [](const std::string& path, const Array& depth) { write_file_bytes(path, write_depth_png(to_depth(depth))); },
      py::arg("path"), py::arg("depth"));
  m.def(
      "parse_label_file",
      [](const std::string& text) {
        py::list out;
        for (const auto& l : parse_label_file(text)) out.append(label_to_dict(l));
        return out;
      },
      py::arg("text"));
  m.def(
      "write_ply",
      [](const Array& points, const std::vector<int>& intervals) {
        require_ndim(points, 2, "points");
        const auto r = points.unchecked<2>();
        PointCloud cloud;
        for (py::ssize_t i = 0; i < points.shape(0); ++i) cloud.points.push_back({r(i, 0), r(i, 1), r(i, 2)});
        cloud.intervals = intervals;
        return write_ply(cloud);
      },
      py::arg("points"), py::arg("intervals") = std::vector<int>{});
  m.def(
      "read_ply",
      [](const std::string& text) {
        const auto cloud = read_ply(text);
        return py::make_tuple(from_cloud(cloud), cloud.intervals);
      },
      py::arg("text"));

  m.def(
      "evaluate",
      [](const std::vector<std::string>& ground_truth, const std::vector<std::string>& detections, int threads) {
        if (ground_truth.size() != detections.size()) throw ShapeError("one detection file per ground-truth file");
        std::vector<Frame> frames(ground_truth.size());
        for (std::size_t i = 0; i < frames.size(); ++i) {
          frames[i].stem = std::to_string(i);
          frames[i].ground_truth = parse_label_file(ground_truth[i]);
          frames[i].detections = parse_label_file(detections[i]);
        }
        const auto classes = default_class_configs();
        py::gil_scoped_release release;
        return report_to_json(evaluate_dataset(frames, classes, kAllDifficulties, threads));
      },
      py::arg("ground_truth"), py::arg("detections"), py::arg("threads") = 1,
      "AP@40 report as JSON text from per-frame label and result file contents.");
}
