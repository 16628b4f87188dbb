#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "trackmine/discovery.hpp"
#include "trackmine/eval.hpp"
#include "trackmine/geometry.hpp"
#include "trackmine/trainset.hpp"

namespace py = pybind11;
using namespace trackmine;

namespace {

BBox to_bbox(const std::array<double, 4>& b) { return BBox{b[0], b[1], b[2], b[3]}; }

Points to_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw py::value_error("points must be a 2-D array");
    Points pts;
    pts.count = static_cast<std::size_t>(arr.shape(0));
    pts.dim = static_cast<std::size_t>(arr.shape(1));
    pts.values.assign(arr.data(), arr.data() + pts.count * pts.dim);
    return pts;
}

std::vector<std::int64_t> to_labels(
    const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 1) throw py::value_error("labels must be a 1-D array");
    return {arr.data(), arr.data() + arr.shape(0)};
}

py::array_t<std::int64_t> labels_array(const std::vector<std::int64_t>& labels) {
    return py::array_t<std::int64_t>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(labels.size())},
                                     labels.data());
}

}  // namespace

PYBIND11_MODULE(_trackmine, m) {
    m.doc() = "track mining and category discovery core";

    m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
        return iou(to_bbox(a), to_bbox(b));
    }, py::arg("a"), py::arg("b"), "IoU of two (x, y, w, h) boxes");

    m.def("embedding_distance",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& u,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& v,
             const std::string& metric) {
              std::span<const double> su(u.data(), static_cast<std::size_t>(u.size()));
              std::span<const double> sv(v.data(), static_cast<std::size_t>(v.size()));
              return embedding_distance(su, sv, metric_from_string(metric));
          },
          py::arg("u"), py::arg("v"), py::arg("metric") = "euclidean");

    m.def("backproject",
          [](double u, double v, double depth, double fx, double fy, double cx, double cy) {
              CameraIntrinsics k{fx, fy, cx, cy, 1 << 20, 1 << 20};
              auto p = backproject(u, v, depth, k);
              return py::make_tuple(p[0], p[1], p[2]);
          },
          py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("fx"), py::arg("fy"), py::arg("cx"),
          py::arg("cy"));

    m.def("height_above_plane",
          [](const std::array<double, 3>& p, const std::array<double, 3>& normal, double offset) {
              return height_above_plane(Vec3{p[0], p[1], p[2]},
                                        GroundPlane{Vec3{normal[0], normal[1], normal[2]}, offset});
          },
          py::arg("point"), py::arg("normal"), py::arg("offset"));

    m.def("kmeans",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
             std::size_t k, std::uint64_t seed) {
              auto result = kmeans(to_points(points), k, seed);
              py::array_t<double> centroids({static_cast<py::ssize_t>(k),
                                             static_cast<py::ssize_t>(result.centroids.dim)});
              std::copy(result.centroids.values.begin(), result.centroids.values.end(),
                        centroids.mutable_data());
              return py::make_tuple(labels_array(result.labels), centroids, result.wcss);
          },
          py::arg("points"), py::arg("k"), py::arg("seed") = 1,
          "returns (labels, centroids, wcss)");

    m.def("hdbscan",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
             int min_cluster_size, int min_samples, const std::string& metric) {
              HdbscanParams params;
              params.min_cluster_size = min_cluster_size;
              params.min_samples = min_samples;
              params.metric = metric_from_string(metric);
              auto result = hdbscan(to_points(points), params);
              return labels_array(result.labels);
          },
          py::arg("points"), py::arg("min_cluster_size") = 10, py::arg("min_samples") = 0,
          py::arg("metric") = "euclidean", "labels per point; -1 = noise");

    m.def("outlier_scores",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
             const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& labels) {
              auto scores = distance_to_center_outlier_scores(to_points(points), to_labels(labels));
              return py::array_t<double>(
                  std::vector<py::ssize_t>{static_cast<py::ssize_t>(scores.size())}, scores.data());
          },
          py::arg("points"), py::arg("labels"), "distance-to-cluster-center outlier scores");

    m.def("ami",
          [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& u,
             const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& v) {
              return ami(to_labels(u), to_labels(v));
          },
          py::arg("u"), py::arg("v"), "adjusted mutual information (mean-normalized, nats)");

    m.def("generate_anchors",
          [](int image_w, int image_h, int stride, const std::vector<double>& scales,
             const std::vector<double>& ratios) {
              auto anchors = generate_anchors(image_w, image_h, stride, scales, ratios);
              py::array_t<double> out({static_cast<py::ssize_t>(anchors.size()), py::ssize_t{4}});
              auto* p = out.mutable_data();
              for (const auto& a : anchors) {
                  *p++ = a.bbox.x;
                  *p++ = a.bbox.y;
                  *p++ = a.bbox.w;
                  *p++ = a.bbox.h;
              }
              return out;
          },
          py::arg("image_w"), py::arg("image_h"), py::arg("stride"), py::arg("scales"),
          py::arg("ratios"), "dense anchor grid as an (n, 4) array of (x, y, w, h)");
}
