#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ptomo/checkpoint.hpp"
#include "ptomo/datastore.hpp"
#include "ptomo/geometry.hpp"
#include "ptomo/metrics.hpp"
#include "ptomo/pca.hpp"
#include "ptomo/phantom.hpp"
#include "ptomo/pipeline.hpp"

namespace py = pybind11;
using namespace ptomo;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  require(a.ndim() == 2, "expected a 2-D array");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return Image(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_image(const Image& img) {
  Array out({img.height, img.width});
  std::copy(img.values.begin(), img.values.end(), out.mutable_data());
  return out;
}

Matrix to_matrix(const Array& a) {
  require(a.ndim() == 2, "expected a 2-D array");
  Matrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.values.begin());
  return m;
}

Array from_matrix(const Matrix& m) {
  Array out({m.rows, m.cols});
  std::copy(m.values.begin(), m.values.end(), out.mutable_data());
  return out;
}

Array from_vector(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<float> from_batch(const nn::Tensor<float>& t) {
  py::array_t<float> out({t.dim(0), t.dim(2), t.dim(3)});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::vector<Blob> to_blobs(const std::vector<std::tuple<double, double, double, double>>& blobs) {
  std::vector<Blob> out;
  for (const auto& [x, y, sigma, amplitude] : blobs) out.push_back({{x, y}, sigma, amplitude});
  return out;
}

struct PyGeometry {
  Grid grid;
  CameraSet cameras;
  ProjectionOperator op;

  explicit PyGeometry(const std::string& scale) : grid(grid_for_scale(scale)) {
    cameras = build_cameras(grid, CameraLayoutConfig::defaults(grid));
    op = assemble_projection(grid, cameras);
  }
};

}  // namespace

PYBIND11_MODULE(_ptomo, m) {
  m.doc() = "Phantom tomography: forward model, PCA, metrics and trained-network inference";
  m.attr("__version__") = kVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);

  m.def("derive_seed", py::overload_cast<std::uint64_t, std::string_view>(&derive_seed), py::arg("seed"),
        py::arg("name"));

  py::class_<Grid>(m, "Grid")
      .def_static("for_scale", &grid_for_scale, py::arg("scale"))
      .def_readonly("width_px", &Grid::width_px)
      .def_readonly("height_px", &Grid::height_px)
      .def_readonly("pad_width_px", &Grid::pad_width_px)
      .def_readonly("pad_height_px", &Grid::pad_height_px)
      .def_readonly("cell_w", &Grid::cell_w)
      .def_readonly("cell_h", &Grid::cell_h)
      .def("pixel_center", [](const Grid& g, int col, int row) {
        const auto p = g.pixel_center(col, row);
        return std::make_pair(p.x, p.y);
      });

  py::class_<PyGeometry>(m, "Geometry")
      .def(py::init<const std::string&>(), py::arg("scale") = "quarter")
      .def_readonly("grid", &PyGeometry::grid)
      .def_property_readonly("channel_count", [](const PyGeometry& g) { return g.cameras.channel_count(); })
      .def_property_readonly("dead_channels", [](const PyGeometry& g) { return g.cameras.dead_channels; })
      .def_property_readonly("operator_hash", [](const PyGeometry& g) { return g.op.hash(); })
      .def("sight_line", [](const PyGeometry& g, int channel) {
        require(channel >= 0 && channel < static_cast<int>(g.cameras.lines.size()), "channel out of range");
        const auto& l = g.cameras.lines[channel];
        return py::make_tuple(py::make_tuple(l.start.x, l.start.y), py::make_tuple(l.end.x, l.end.y));
      })
      .def("matrix", [](const PyGeometry& g) {
        Array out({g.op.rows(), g.op.cols()});
        std::fill(out.mutable_data(), out.mutable_data() + out.size(), 0.0);
        for (int r = 0; r < g.op.rows(); ++r) {
          const auto px = g.op.row_pixels(r);
          const auto len = g.op.row_lengths(r);
          for (std::size_t i = 0; i < px.size(); ++i) out.mutable_at(r, px[i]) = len[i];
        }
        return out;
      }, "Dense channel x pixel chord-length matrix")
      .def("project", [](const PyGeometry& g, const Array& image, double noise_std, std::uint64_t seed) {
        const Image img = to_image(image);
        require(img.width == g.grid.width_px && img.height == g.grid.height_px,
                "image must have the active grid shape (height_px, width_px)");
        Rng rng(seed);
        return from_vector(project(g.op, g.cameras, img.values, noise_std, rng));
      }, py::arg("image"), py::arg("noise_std") = 0.0, py::arg("seed") = 0)
      .def("trace_ray", [](const PyGeometry& g, std::pair<double, double> start, std::pair<double, double> end) {
        std::vector<std::pair<std::uint32_t, double>> out;
        for (const auto& e : trace_ray(g.grid, LineOfSight{{start.first, start.second}, {end.first, end.second}})) {
          out.emplace_back(e.pixel, e.length);
        }
        return out;
      }, py::arg("start"), py::arg("end"))
      .def("coverage", [](const PyGeometry& g) {
        return from_image(Image(g.grid.width_px, g.grid.height_px, coverage_map(g.op)));
      });

  m.def("sample_phantom", [](std::uint64_t seed, const std::string& scale) {
    const Grid g = grid_for_scale(scale);
    const auto ph = sample_phantom(PhantomSpec::defaults_for(g), seed, g);
    std::vector<std::tuple<double, double, double, double>> blobs;
    for (const auto& b : ph.blobs) blobs.emplace_back(b.center.x, b.center.y, b.sigma, b.amplitude);
    return py::make_tuple(from_image(ph.image), blobs);
  }, py::arg("seed"), py::arg("scale") = "quarter",
        "Padded phantom image and its blobs as (x, y, sigma, amplitude) tuples");

  m.def("render_blobs", [](const std::vector<std::tuple<double, double, double, double>>& blobs,
                           const std::string& scale) {
    return from_image(render_blobs(to_blobs(blobs), grid_for_scale(scale)));
  }, py::arg("blobs"), py::arg("scale") = "quarter");

  m.def("analytic_projection", [](const std::vector<std::tuple<double, double, double, double>>& blobs,
                                  std::pair<double, double> start, std::pair<double, double> end) {
    return analytic_projection(to_blobs(blobs), LineOfSight{{start.first, start.second}, {end.first, end.second}});
  }, py::arg("blobs"), py::arg("start"), py::arg("end"));

  m.def("ssim", [](const Array& x, const Array& ref, int window, double k1, double k2) {
    return ssim(to_image(x), to_image(ref), SsimOptions{window, k1, k2});
  }, py::arg("x"), py::arg("ref"), py::arg("window") = 7, py::arg("k1") = 0.01, py::arg("k2") = 0.03);
  m.def("psnr", [](const Array& x, const Array& ref) { return psnr(to_image(x), to_image(ref)); }, py::arg("x"),
        py::arg("ref"));
  m.def("nrmse", [](const Array& x, const Array& ref) { return nrmse(to_image(x), to_image(ref)); }, py::arg("x"),
        py::arg("ref"));

  py::class_<PCAModel>(m, "PCAModel")
      .def_static("fit", [](const Array& readings) { return pca_fit(to_matrix(readings)); }, py::arg("readings"))
      .def_property_readonly("mean", [](const PCAModel& p) { return from_vector(p.mean); })
      .def_property_readonly("components", [](const PCAModel& p) { return from_matrix(p.components); })
      .def_property_readonly("eigenvalues", [](const PCAModel& p) { return from_vector(p.eigenvalues); })
      .def_property_readonly("explained_variance_ratio",
                             [](const PCAModel& p) { return from_vector(p.explained_variance_ratio); })
      .def("choose_rank", &pca_choose_rank, py::arg("threshold"))
      .def("transform", [](const PCAModel& p, int k, const Array& x) {
        return from_matrix(pca_transform(p, k, to_matrix(x)));
      }, py::arg("k"), py::arg("readings"))
      .def("inverse_transform", [](const PCAModel& p, int k, const Array& c) {
        return from_matrix(pca_inverse_transform(p, k, to_matrix(c)));
      }, py::arg("k"), py::arg("coords"));

  py::class_<DatasetFile>(m, "Dataset")
      .def_static("load", &DatasetFile::load, py::arg("path"))
      .def("__len__", &DatasetFile::size)
      .def_readonly("peak_amplitude", &DatasetFile::peak_amplitude)
      .def_readonly("pca", &DatasetFile::pca)
      .def_readonly("grid", &DatasetFile::grid)
      .def_property_readonly("hash", &DatasetFile::hash)
      .def("split", [](const DatasetFile& d, const std::string& name) { return split_indices(d, name); },
           py::arg("name"))
      .def("readings", [](const DatasetFile& d, const std::vector<std::size_t>& idx) {
        return from_matrix(d.readings(idx));
      }, py::arg("indices"))
      .def("image", [](const DatasetFile& d, std::size_t i) {
        require(i < d.size(), "example index out of range");
        const auto& v = d.examples[i].image;
        return from_image(Image(d.grid.pad_width_px, d.grid.pad_height_px, std::vector<double>(v.begin(), v.end())));
      }, py::arg("index"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_static("load", &Checkpoint::load, py::arg("path"))
      .def_readonly("best_epoch", &Checkpoint::best_epoch)
      .def_readonly("best_val_loss", &Checkpoint::best_val_loss)
      .def_readonly("dataset_hash", &Checkpoint::dataset_hash)
      .def_property_readonly("parameter_count", [](const Checkpoint& c) {
        return c.network_instance().parameter_count();
      })
      .def("reconstruct", [](const Checkpoint& c, const Array& readings) {
        const Matrix rows = to_matrix(readings);
        nn::Tensor<float> out;
        {
          py::gil_scoped_release release;
          out = reconstruct(c, rows);
        }
        return from_batch(out);
      }, py::arg("readings"), "Network output (N, rows, cols) for raw reading rows (N, channels)");
}
