#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blockcirc/bcm.hpp"
#include "blockcirc/error.hpp"
#include "blockcirc/fft.hpp"
#include "blockcirc/model.hpp"
#include "blockcirc/nn.hpp"
#include "blockcirc/quant.hpp"
#include "blockcirc/sched.hpp"

namespace py = pybind11;
using namespace blockcirc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

nn::SoftmaxImpl softmax_impl(const std::string& mode, int segments) {
  if (mode == "exact") return nn::SoftmaxImpl::exact();
  if (mode == "pwl") return nn::SoftmaxImpl::piecewise_linear(segments);
  throw UsageError("softmax mode must be 'exact' or 'pwl', got '" + mode + "'");
}

}  // namespace

PYBIND11_MODULE(_blockcirc, m) {
  m.doc() = "Block-circulant transformer kernels and FPGA scheduling model";

  static py::exception<Error> error(m, "Error", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  m.def("fft", [](const std::vector<std::complex<double>>& x) { return fft::fft(x); });
  m.def("ifft", [](const std::vector<std::complex<double>>& x) { return fft::ifft(x); });

  py::class_<BlockCirculantMatrix>(m, "BlockCirculantMatrix")
      .def(py::init([](std::size_t rows, std::size_t cols, std::size_t b,
                       std::vector<double> index) {
             return BlockCirculantMatrix(rows, cols, b, std::move(index));
           }),
           py::arg("rows"), py::arg("cols"), py::arg("block_size"), py::arg("index_data"))
      .def_property_readonly("shape",
                             [](const BlockCirculantMatrix& b) {
                               return py::make_tuple(b.rows(), b.cols());
                             })
      .def_property_readonly("block_size", &BlockCirculantMatrix::block_size)
      .def_property_readonly("mode",
                             [](const BlockCirculantMatrix& b) { return to_string(b.mode()); })
      .def_property_readonly("compression_ratio", &BlockCirculantMatrix::compression_ratio)
      .def("index_vector",
           [](const BlockCirculantMatrix& b, std::size_t i, std::size_t j) {
             const auto v = b.index_vector(i, j);
             return std::vector<double>(v.begin(), v.end());
           })
      .def("expand", [](const BlockCirculantMatrix& b) { return to_array(b.expand()); })
      .def("matvec",
           [](const BlockCirculantMatrix& b, const Array& x) {
             return to_array(b.matvec(to_tensor(x)));
           })
      .def("matmul", [](const BlockCirculantMatrix& b, const Array& x) {
        return to_array(b.matmul(to_tensor(x)));
      });

  m.def(
      "compress",
      [](const Array& w, std::size_t b, const std::string& mode) {
        return compress(to_tensor(w), b, compression_mode_from_string(mode));
      },
      py::arg("w"), py::arg("block_size"), py::arg("mode") = "diagonal-mean");

  py::class_<FixedPointFormat>(m, "FixedPointFormat")
      .def(py::init<int>(), py::arg("frac_bits") = 15)
      .def_readonly("frac_bits", &FixedPointFormat::frac_bits)
      .def_property_readonly("step", &FixedPointFormat::step)
      .def_property_readonly("max_value", &FixedPointFormat::max_value)
      .def_property_readonly("min_value", &FixedPointFormat::min_value);

  m.def("choose_format", [](const Array& x) { return choose_format(to_tensor(x)); });
  m.def(
      "quantize",
      [](const Array& x, const FixedPointFormat& fmt) {
        const auto q = quantize(to_tensor(x), fmt);
        return py::array_t<std::int16_t>(q.raw.size(), q.raw.data());
      },
      py::arg("x"), py::arg("fmt"));
  m.def(
      "dequantize",
      [](const py::array_t<std::int16_t, py::array::c_style | py::array::forcecast>& raw,
         const FixedPointFormat& fmt) {
        QuantizedTensor q{{static_cast<std::size_t>(raw.size())},
                          std::vector<std::int16_t>(raw.data(), raw.data() + raw.size()),
                          fmt};
        return to_array(dequantize(q));
      },
      py::arg("raw"), py::arg("fmt"));

  m.def(
      "softmax",
      [](const Array& x, const std::string& mode, int segments) {
        const auto impl = softmax_impl(mode, segments);
        Tensor t = to_tensor(x);
        if (t.rank() != 2) return to_array(nn::softmax(t, impl));
        for (std::size_t r = 0; r < t.rows(); ++r) {
          const auto row = t.row(r);
          const auto p = nn::softmax(std::span<const double>(row.data(), row.size()), impl);
          std::copy(p.begin(), p.end(), row.begin());
        }
        return to_array(t);
      },
      py::arg("x"), py::arg("mode") = "exact", py::arg("segments") = 32,
      "Softmax of a vector, or of each row of a matrix.");
  m.def(
      "attention",
      [](const Array& q, const Array& k, const Array& v, bool causal) {
        nn::AttentionMask mask;
        mask.mode = causal ? nn::AttentionMask::Mode::kCausal : nn::AttentionMask::Mode::kNone;
        return to_array(
            nn::scaled_dot_product_attention(to_tensor(q), to_tensor(k), to_tensor(v), mask));
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("causal") = false);

  m.def("layer_time", py::overload_cast<std::uint64_t, double, std::uint64_t>(&sched::layer_time), py::arg("n_op"), py::arg("base_throughput"),
        py::arg("k"));

  py::class_<sched::ComputeGraph>(m, "ComputeGraph")
      .def("__len__", &sched::ComputeGraph::size)
      .def_property_readonly("names",
                             [](const sched::ComputeGraph& g) {
                               std::vector<std::string> names;
                               for (const auto& n : g.nodes()) names.push_back(n.name);
                               return names;
                             })
      .def_property_readonly("edges", &sched::ComputeGraph::edges)
      .def("ops", [](const sched::ComputeGraph& g, const std::string& name) {
        const auto id = g.find(name);
        if (!id) throw py::key_error(name);
        return g.node(*id).n_op;
      })
      .def_property_readonly("total_ops", &sched::ComputeGraph::total_ops)
      .def_property_readonly("pipeline_stages", &sched::ComputeGraph::pipeline_stages);

  m.def(
      "build_encoder_graph",
      [](const std::string& preset, std::size_t seq_len, std::size_t block_size) {
        return sched::build_encoder_graph(model::preset(preset), seq_len, {block_size});
      },
      py::arg("preset"), py::arg("seq_len"), py::arg("block_size") = 1);

  m.def(
      "schedule",
      [](const sched::ComputeGraph& g, std::uint64_t granularity) {
        const auto s = sched::schedule(g, sched::default_pool(g), {granularity});
        py::list out;
        for (const auto& e : s.entries) {
          out.append(py::make_tuple(g.node(e.layer).name, e.start_stage, e.end_stage,
                                    e.pe_name));
        }
        return out;
      },
      py::arg("graph"), py::arg("granularity") = 1);
}
