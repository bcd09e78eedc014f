#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include <nlohmann/json.hpp>

#include "vpanel/benchmark.hpp"
#include "vpanel/error.hpp"
#include "vpanel/framesource.hpp"
#include "vpanel/harness.hpp"
#include "vpanel/needlesim.hpp"
#include "vpanel/panelizer.hpp"
#include "vpanel/policy.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace vpanel;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an HxWx3 uint8 array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  std::vector<std::uint8_t> px(a.data(), a.data() + a.size());
  return Image(w, h, std::move(px));
}

U8Array to_array(const Image& img) {
  U8Array out({img.height(), img.width(), 3});
  std::memcpy(out.mutable_data(), img.pixels().data(), img.pixels().size());
  return out;
}

SamplingPolicy make_policy(int context_window, const std::string& grid, const std::string& gamma) {
  SamplingPolicy p;
  p.context_window = context_window;
  const auto [rows, cols] = parse_grid(grid);
  p.alpha = cols;
  p.beta = rows;
  p.gamma = GammaSpec::parse(gamma);
  p.validate();
  return p;
}

QAItem make_item(const std::string& question, const std::vector<std::string>& options) {
  QAItem item;
  item.item_id = "py";
  item.question = question;
  for (std::size_t k = 0; k < options.size(); ++k) {
    item.options.push_back({static_cast<char>('A' + k), options[k]});
  }
  return item;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "vpanel native core";

  static py::exception<Error> vpanel_error(m, "VpanelError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(vpanel_error.ptr())(std::string(to_string(e.kind())) + ": " + e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(vpanel_error.ptr(), exc.ptr());
    }
  });

  m.def("uniform_indices", &uniform_indices, py::arg("frame_count"), py::arg("n"));

  m.def(
      "plan_json",
      [](std::int64_t frame_count, double fps, int width, int height, int context_window,
         const std::string& grid, const std::string& gamma, const std::string& mode) {
        const SamplingPolicy policy = make_policy(context_window, grid, gamma);
        const VideoMeta meta = VideoMeta::from_count(frame_count, fps, width, height);
        return json(plan_sampling(policy, meta, parse_plan_mode(mode))).dump();
      },
      py::arg("frame_count"), py::arg("fps"), py::arg("width"), py::arg("height"),
      py::arg("context_window"), py::arg("grid"), py::arg("gamma"), py::arg("mode"));

  m.def(
      "resize_bilinear",
      [](const U8Array& img, int width, int height) { return to_array(resize_bilinear(to_image(img), width, height)); },
      py::arg("image"), py::arg("width"), py::arg("height"));

  m.def(
      "compose_panel",
      [](const std::vector<U8Array>& tiles, int rows, int cols) {
        std::vector<Frame> frames;
        for (std::size_t k = 0; k < tiles.size(); ++k) {
          frames.push_back({static_cast<std::int64_t>(k), 0.0, to_image(tiles[k])});
        }
        return to_array(compose_panel(frames, rows, cols).image);
      },
      py::arg("tiles"), py::arg("rows"), py::arg("cols"));

  m.def(
      "slice_panel",
      [](const U8Array& panel, int rows, int cols) {
        std::vector<U8Array> out;
        for (const Image& t : slice_panel(to_image(panel), rows, cols)) out.push_back(to_array(t));
        return out;
      },
      py::arg("panel"), py::arg("rows"), py::arg("cols"));

  m.def(
      "panelize_json",
      [](const std::string& uri, const std::string& out_dir, int context_window, const std::string& grid,
         const std::string& gamma, const std::string& mode) {
        const SamplingPolicy policy = make_policy(context_window, grid, gamma);
        auto source = open_source(uri);
        return json(panelize_video(*source, policy, parse_plan_mode(mode), out_dir)).dump();
      },
      py::arg("uri"), py::arg("out_dir"), py::arg("context_window"), py::arg("grid"), py::arg("gamma"),
      py::arg("mode"));

  m.def(
      "parse_choice",
      [](const std::string& response, const std::string& letters,
         const std::vector<std::string>& options) -> std::optional<std::string> {
        std::vector<AnswerOption> opts;
        for (std::size_t k = 0; k < options.size(); ++k) opts.push_back({static_cast<char>('A' + k), options[k]});
        const auto got = parse_choice(response, letters, opts);
        if (!got) return std::nullopt;
        return std::string(1, *got);
      },
      py::arg("response"), py::arg("letters") = "ABCD", py::arg("options") = std::vector<std::string>{});

  m.def(
      "render_prompt",
      [](const std::string& question, const std::vector<std::string>& options, const std::string& tmpl,
         std::optional<std::pair<int, int>> grid) {
        std::optional<Grid> g;
        if (grid) g = Grid{grid->first, grid->second};
        return render_prompt(make_item(question, options), PromptTemplate::parse(tmpl), g);
      },
      py::arg("question"), py::arg("options"), py::arg("template") = "default", py::arg("grid") = py::none());

  m.def(
      "detection_expectation",
      [](const std::vector<std::int64_t>& sampled, std::int64_t frame_count, std::int64_t needle_length) {
        return detection_expectation(sampled, frame_count, needle_length);
      },
      py::arg("sampled"), py::arg("frame_count"), py::arg("needle_length"));

  m.def("format_points", &format_points, py::arg("points"));
  m.def("format_relative", &format_relative, py::arg("percent"));
}
