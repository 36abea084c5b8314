#include "adisep/kitti_io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "adisep/errors.hpp"
#include "adisep/uncertainty.hpp"
#include "png_codec.hpp"

namespace adisep {

namespace {

constexpr double kDepthScale = 256.0;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_real(std::string_view field, int line, int column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(line, fmt::format("field {} is not a finite number: '{}'", column, field));
  }
  return v;
}

int parse_int(std::string_view field, int line, int column) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line, fmt::format("field {} is not an integer: '{}'", column, field));
  }
  return v;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line_no, line);
    if (end == text.size()) break;
    pos = end + 1;
  }
}

void check_label(const ObjectLabel& l, int line) {
  if (l.occlusion < -1 || l.occlusion > 3) throw ParseError(line, fmt::format("occlusion {} outside {{-1..3}}", l.occlusion));
  if (l.truncation != -1.0 && (l.truncation < 0.0 || l.truncation > 1.0)) {
    throw ParseError(line, fmt::format("truncation {} outside [0, 1]", l.truncation));
  }
  if (l.is_dont_care()) return;
  if (!(l.height > 0.0 && l.width > 0.0 && l.length > 0.0)) {
    throw ParseError(line, "object dimensions must be positive");
  }
  if (!(l.bbox.right > l.bbox.left && l.bbox.bottom > l.bbox.top)) {
    throw ParseError(line, "2D box must satisfy right > left and bottom > top");
  }
}

std::string format_label(const ObjectLabel& l, bool with_score) {
  std::string s = fmt::format("{} {:.2f} {} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f}",
                              l.type, l.truncation, l.occlusion, l.alpha, l.bbox.left, l.bbox.top, l.bbox.right,
                              l.bbox.bottom, l.height, l.width, l.length, l.x, l.y, l.z, l.rotation_y);
  if (with_score) s += fmt::format(" {:.6f}", *l.score);
  s += '\n';
  return s;
}

}  // namespace

CameraCalib CameraCalib::from_intrinsics(double fx, double fy, double cx, double cy) {
  CameraCalib c;
  c.p2 = {fx, 0.0, cx, 0.0, 0.0, fy, cy, 0.0, 0.0, 0.0, 1.0, 0.0};
  return c;
}

std::vector<ObjectLabel> parse_label_file(std::string_view text) {
  std::vector<ObjectLabel> labels;
  for_each_line(text, [&](int line_no, std::string_view line) {
    const auto f = split_fields(line);
    if (f.empty()) return;
    if (f.size() != 15 && f.size() != 16) {
      throw ParseError(line_no, fmt::format("expected 15 or 16 fields, found {}", f.size()));
    }
    ObjectLabel l;
    l.type = std::string(f[0]);
    l.truncation = parse_real(f[1], line_no, 2);
    l.occlusion = parse_int(f[2], line_no, 3);
    l.alpha = parse_real(f[3], line_no, 4);
    l.bbox = {parse_real(f[4], line_no, 5), parse_real(f[5], line_no, 6), parse_real(f[6], line_no, 7),
              parse_real(f[7], line_no, 8)};
    l.height = parse_real(f[8], line_no, 9);
    l.width = parse_real(f[9], line_no, 10);
    l.length = parse_real(f[10], line_no, 11);
    l.x = parse_real(f[11], line_no, 12);
    l.y = parse_real(f[12], line_no, 13);
    l.z = parse_real(f[13], line_no, 14);
    l.rotation_y = parse_real(f[14], line_no, 15);
    if (f.size() == 16) l.score = parse_real(f[15], line_no, 16);
    check_label(l, line_no);
    labels.push_back(std::move(l));
  });
  return labels;
}

std::string write_label_file(std::span<const ObjectLabel> labels) {
  std::string out;
  for (const auto& l : labels) out += format_label(l, false);
  return out;
}

std::string write_result_file(std::span<const ObjectLabel> labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i].score) throw ContractError(fmt::format("result label {} has no score", i));
    out += format_label(labels[i], true);
  }
  return out;
}

CameraCalib parse_calib(std::string_view text) {
  std::optional<CameraCalib> calib;
  for_each_line(text, [&](int line_no, std::string_view line) {
    const auto f = split_fields(line);
    if (f.empty() || f[0] != "P2:") return;
    if (f.size() != 13) throw ParseError(line_no, fmt::format("P2 needs 12 values, found {}", f.size() - 1));
    CameraCalib c;
    for (int i = 0; i < 12; ++i) c.p2[i] = parse_real(f[i + 1], line_no, i + 2);
    if (!(c.fx() > 0.0 && c.fy() > 0.0)) throw ParseError(line_no, "P2 focal lengths must be positive");
    calib = c;
  });
  if (!calib) throw ParseError(0, "no 'P2:' line in calibration");
  return *calib;
}

DepthMap read_depth_png(std::span<const std::uint8_t> bytes) {
  const auto raw = detail::decode_png(bytes);
  if (raw.channels != 1) throw FormatError(fmt::format("depth PNG must be single-channel, has {}", raw.channels));
  if (raw.bit_depth != 16) throw FormatError(fmt::format("depth PNG must be 16-bit, is {}-bit", raw.bit_depth));
  std::vector<double> depths(raw.samples.size());
  for (std::size_t i = 0; i < depths.size(); ++i) depths[i] = raw.samples[i] / kDepthScale;
  return DepthMap(raw.height, raw.width, std::move(depths));
}

std::vector<std::uint8_t> write_depth_png(const DepthMap& depth) {
  std::vector<std::uint16_t> samples(depth.size(), 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!depth.valid(i)) continue;
    const double stored = std::round(depth.depth(i) * kDepthScale);
    if (stored > 65535.0) {
      throw FormatError(fmt::format("depth {} m exceeds the 16-bit encoding range", depth.depth(i)));
    }
    // depths under half a quantum round to the "missing" sentinel
    samples[i] = static_cast<std::uint16_t>(stored);
  }
  return detail::encode_png(depth.width(), depth.height(), 1, 16, samples);
}

std::vector<std::uint8_t> write_uncertainty_png(const UncertaintyMap& u) {
  const auto v = u.values();
  std::vector<std::uint16_t> samples(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(v[i], 0.0, 1.0) * 255.0));
  }
  return detail::encode_png(u.width(), u.height(), 1, 8, samples);
}

Image8 read_image_png(std::span<const std::uint8_t> bytes) {
  const auto raw = detail::decode_png(bytes);
  if (raw.bit_depth != 8) throw FormatError("expected an 8-bit image PNG");
  Image8 img;
  img.width = raw.width;
  img.height = raw.height;
  const int color = raw.had_alpha ? raw.channels - 1 : raw.channels;
  img.channels = color;
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
  img.pixels.resize(n * color);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < color; ++c) img.pixels[p * color + c] = static_cast<std::uint8_t>(raw.samples[p * raw.channels + c]);
  }
  return img;
}

std::vector<std::uint8_t> write_image_png(const Image8& image) {
  std::vector<std::uint16_t> samples(image.pixels.begin(), image.pixels.end());
  return detail::encode_png(image.width, image.height, image.channels, 8, samples);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace adisep
