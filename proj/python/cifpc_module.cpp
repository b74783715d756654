#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <variant>

#include "cif/alignment.hpp"
#include "cif/checkpoint.hpp"
#include "cif/metrics.hpp"
#include "cif/training.hpp"

namespace py = pybind11;
using namespace cif;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointCloud to_cloud(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw std::invalid_argument("expected an (n, 3) array of points");
  PointCloud c;
  auto r = a.unchecked<2>();
  c.points.resize(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) c.points[i] = {r(i, 0), r(i, 1), r(i, 2)};
  return c;
}

Array to_array(const PointCloud& c) {
  Array a({static_cast<py::ssize_t>(c.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int k = 0; k < 3; ++k) w(i, k) = c.points[i][k];
  return a;
}

std::vector<PointCloud> to_clouds(const std::vector<Array>& arrays) {
  std::vector<PointCloud> out;
  out.reserve(arrays.size());
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    out.push_back(to_cloud(arrays[i]));
    out.back().id = "cloud_" + std::to_string(i);
  }
  return out;
}

std::vector<Array> to_arrays(const std::vector<PointCloud>& clouds) {
  std::vector<Array> out;
  for (const auto& c : clouds) out.push_back(to_array(c));
  return out;
}

DistanceKernel kernel(const std::string& metric) {
  if (metric == "cd") return DistanceKernel{DistanceKind::Chamfer};
  if (metric == "emd") return DistanceKernel{DistanceKind::Emd};
  throw std::invalid_argument("unknown metric '" + metric + "' (cd, emd)");
}

py::dict epoch_dict(const EpochLog& l) {
  py::dict d;
  d["epoch"] = l.epoch;
  d["lr"] = l.lr;
  d["loss"] = l.mean_loss;
  d["point_nll"] = l.mean_point_nll;
  d["embed_nll"] = l.mean_embed_nll;
  return d;
}

// A model at either precision.
class Model {
 public:
  using Variant = std::variant<CifModel<float>, CifModel<double>>;

  explicit Model(Variant m) : m_(std::move(m)) {}

  static Model create(const ModelConfig& config, const std::string& precision) {
    if (parse_precision(precision) == Precision::F64) return Model(CifModel<double>(config));
    return Model(CifModel<float>(config));
  }

  static Model load(const std::filesystem::path& path) {
    if (checkpoint_precision(path) == Precision::F64) return Model(load_checkpoint<double>(path).model);
    return Model(load_checkpoint<float>(path).model);
  }

  void save(const std::filesystem::path& path) const {
    std::visit([&](const auto& m) { save_checkpoint(path, m); }, m_);
  }

  std::string precision() const { return m_.index() == 0 ? "f32" : "f64"; }
  std::size_t embedding_dim() const {
    return std::visit([](const auto& m) { return m.embedding_dim(); }, m_);
  }
  std::size_t parameter_count() const {
    return std::visit(
        [](const auto& m) {
          std::size_t n = 0;
          for (const auto& p : m.parameters()) n += p.tensor.size();
          return n;
        },
        m_);
  }

  Array sample(std::size_t n_points, double temperature, std::uint64_t seed) const {
    Rng rng(seed);
    return to_array(std::visit([&](const auto& m) { return m.sample_cloud(n_points, temperature, rng); }, m_));
  }

  Array reconstruct(const Array& cloud, std::size_t n_points, std::uint64_t seed) const {
    Rng rng(seed);
    const PointCloud c = to_cloud(cloud);
    return to_array(std::visit([&](const auto& m) { return m.reconstruct(c, n_points, rng); }, m_));
  }

  std::vector<Array> interpolate(const Array& a, const Array& b, std::size_t steps, std::size_t n_points,
                                 std::uint64_t seed) const {
    Rng rng(seed);
    const PointCloud ca = to_cloud(a), cb = to_cloud(b);
    return to_arrays(std::visit([&](const auto& m) { return m.interpolate(ca, cb, steps, n_points, rng); }, m_));
  }

  std::vector<std::pair<std::size_t, double>> rank(const std::vector<Array>& clouds) const {
    const auto cs = to_clouds(clouds);
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& r : std::visit([&](const auto& m) { return m.rank_by_embedding_nll(cs); }, m_))
      out.emplace_back(r.index, r.score);
    return out;
  }

  py::dict align(const Array& cloud, std::size_t restarts, std::size_t max_generations, double sigma0,
                 std::uint64_t seed) const {
    AlignConfig ac;
    ac.restarts = restarts;
    ac.max_generations = max_generations;
    ac.sigma0 = sigma0;
    ac.seed = seed;
    const PointCloud c = to_cloud(cloud);
    AlignResult r = std::visit([&](const auto& m) { return align_pose(c, m, ac); }, m_);
    py::dict d;
    d["angles"] = r.angles;
    d["rotation"] = rotation_matrix(r.angles);
    d["aligned"] = to_array(r.aligned);
    d["nll"] = r.nll;
    d["initial_nll"] = r.initial_nll;
    return d;
  }

  double pose_nll(const Array& cloud, const std::array<double, 3>& angles) const {
    const PointCloud c = to_cloud(cloud);
    return std::visit([&](const auto& m) { return cif::pose_nll(m, c, angles); }, m_);
  }

 private:
  Variant m_;
};

std::pair<Model, py::list> train_model(const std::vector<Array>& clouds, const ModelConfig& mc, const TrainConfig& tc,
                                       bool verbose) {
  const auto data = to_clouds(clouds);
  py::list log;
  TrainOutput out;
  out.on_epoch = [&](const EpochLog& l) {
    log.append(epoch_dict(l));
    if (verbose) py::print(l.tsv());
  };
  if (tc.precision == Precision::F64) return {Model(train<double>(mc, tc, data, out).model), log};
  return {Model(train<float>(mc, tc, data, out).model), log};
}

}  // namespace

PYBIND11_MODULE(_cifpc, m) {
  m.doc() = "Conditional invertible flows for point clouds";

  auto base = py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());
  auto numeric = py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<TrainingError>(m, "TrainingError", numeric.ptr());

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_static("full_scale", &ModelConfig::full_scale)
      .def_readwrite("embedding_dim", &ModelConfig::embedding_dim)
      .def_readwrite("point_segments", &ModelConfig::point_segments)
      .def_readwrite("point_blocks", &ModelConfig::point_blocks)
      .def_readwrite("prior_segments", &ModelConfig::prior_segments)
      .def_readwrite("prior_blocks", &ModelConfig::prior_blocks)
      .def_readwrite("hidden", &ModelConfig::hidden)
      .def_readwrite("residual_blocks", &ModelConfig::residual_blocks)
      .def_readwrite("scale_clamp", &ModelConfig::scale_clamp)
      .def_readwrite("encoder_point_widths", &ModelConfig::encoder_point_widths)
      .def_readwrite("encoder_head_widths", &ModelConfig::encoder_head_widths)
      .def_readwrite("seed", &ModelConfig::seed)
      .def_readwrite("zero_init", &ModelConfig::zero_init);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr0", &TrainConfig::lr0)
      .def_readwrite("decay_factor", &TrainConfig::decay_factor)
      .def_readwrite("decay_every", &TrainConfig::decay_every)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("clouds_per_batch", &TrainConfig::clouds_per_batch)
      .def_readwrite("points_f", &TrainConfig::points_f)
      .def_readwrite("points_h", &TrainConfig::points_h)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("max_grad_norm", &TrainConfig::max_grad_norm)
      .def_property(
          "precision", [](const TrainConfig& c) { return to_string(c.precision); },
          [](TrainConfig& c, const std::string& p) { c.precision = parse_precision(p); });

  py::class_<Model>(m, "Model")
      .def(py::init([](const ModelConfig& c, const std::string& p) { return Model::create(c, p); }),
           py::arg("config") = ModelConfig{}, py::arg("precision") = "f32")
      .def_static("load", &Model::load, py::arg("path"))
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("precision", &Model::precision)
      .def_property_readonly("embedding_dim", &Model::embedding_dim)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("sample", &Model::sample, py::arg("n_points") = 2048, py::arg("temperature") = 1.0, py::arg("seed") = 0)
      .def("reconstruct", &Model::reconstruct, py::arg("cloud"), py::arg("n_points") = 2048, py::arg("seed") = 0)
      .def("interpolate", &Model::interpolate, py::arg("a"), py::arg("b"), py::arg("steps") = 8,
           py::arg("n_points") = 2048, py::arg("seed") = 0)
      .def("rank", &Model::rank, py::arg("clouds"), "(index, -log p(w)) pairs, rarest first")
      .def("align", &Model::align, py::arg("cloud"), py::arg("restarts") = 4, py::arg("max_generations") = 150,
           py::arg("sigma0") = 0.5, py::arg("seed") = 0)
      .def("pose_nll", &Model::pose_nll, py::arg("cloud"), py::arg("angles"));

  m.def("train", &train_model, py::arg("clouds"), py::arg("model_config") = ModelConfig{},
        py::arg("train_config") = TrainConfig{}, py::arg("verbose") = false,
        "Returns (model, per-epoch log).");

  m.def(
      "synth",
      [](const std::string& family, std::size_t count, std::size_t n_points, double noise, std::uint64_t seed) {
        return to_arrays(synth_dataset(ShapeFamily::defaults(parse_shape_kind(family)), count, n_points, noise, seed));
      },
      py::arg("family"), py::arg("count"), py::arg("n_points") = 2048, py::arg("noise") = 0.01, py::arg("seed") = 0);
  m.def(
      "normalize", [](const Array& c) { return to_array(normalize(to_cloud(c)).cloud); }, py::arg("cloud"));
  m.def(
      "load_cloud", [](const std::filesystem::path& p) { return to_array(load_cloud(p)); }, py::arg("path"));
  m.def(
      "save_cloud", [](const Array& c, const std::filesystem::path& p) { save_cloud(to_cloud(c), p); },
      py::arg("cloud"), py::arg("path"));
  m.def(
      "load_manifest", [](const std::filesystem::path& p) { return to_arrays(load_manifest_clouds(p)); },
      py::arg("path"));

  m.def(
      "chamfer", [](const Array& a, const Array& b) { return chamfer(to_cloud(a), to_cloud(b)); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "emd", [](const Array& a, const Array& b) { return emd(to_cloud(a), to_cloud(b)); }, py::arg("a"), py::arg("b"));
  m.def(
      "jsd",
      [](const std::vector<Array>& gen, const std::vector<Array>& ref) {
        return jsd(to_clouds(gen), to_clouds(ref)).value;
      },
      py::arg("gen"), py::arg("ref"));
  m.def(
      "mmd_cov",
      [](const std::vector<Array>& gen, const std::vector<Array>& ref, const std::string& metric) {
        auto r = mmd_cov(to_clouds(gen), to_clouds(ref), kernel(metric));
        return std::make_pair(r.mmd, r.cov);
      },
      py::arg("gen"), py::arg("ref"), py::arg("metric") = "cd");
  m.def(
      "one_nna",
      [](const std::vector<Array>& gen, const std::vector<Array>& ref, const std::string& metric) {
        return one_nna(to_clouds(gen), to_clouds(ref), kernel(metric));
      },
      py::arg("gen"), py::arg("ref"), py::arg("metric") = "cd");
  m.def(
      "evaluate",
      [](const std::vector<Array>& gen, const std::vector<Array>& ref, bool with_emd) {
        EvalOptions o;
        o.emd = with_emd;
        auto r = evaluate(to_clouds(gen), to_clouds(ref), o);
        py::dict d;
        auto put = [&](const char* k, const std::optional<double>& v) {
          if (v) d[k] = *v;
        };
        put("jsd", r.jsd);
        put("mmd_cd", r.mmd_cd);
        put("mmd_emd", r.mmd_emd);
        put("cov_cd", r.cov_cd);
        put("cov_emd", r.cov_emd);
        put("nna_cd", r.nna_cd);
        put("nna_emd", r.nna_emd);
        return d;
      },
      py::arg("gen"), py::arg("ref"), py::arg("emd") = true);

  m.def(
      "cma_es",
      [](const std::function<double(std::vector<double>)>& f, std::vector<double> x0, double sigma0,
         std::size_t max_generations, std::uint64_t seed, double tol_fun, double tol_x) {
        CmaConfig c;
        c.max_generations = max_generations;
        c.seed = seed;
        c.tol_fun = tol_fun;
        c.tol_x = tol_x;
        auto r = cma_es_minimize([&](std::span<const double> x) { return f(std::vector<double>(x.begin(), x.end())); },
                                 x0, sigma0, c);
        py::dict d;
        d["x"] = r.best_x;
        d["value"] = r.best_value;
        d["generations"] = r.history.size();
        d["evaluations"] = r.evaluations;
        d["stop"] = to_string(r.stop);
        std::vector<double> best;
        for (const auto& g : r.history) best.push_back(g.best_value);
        d["best_so_far"] = best;
        return d;
      },
      py::arg("f"), py::arg("x0"), py::arg("sigma0") = 0.5, py::arg("max_generations") = 1000, py::arg("seed") = 0,
      py::arg("tol_fun") = 1e-12, py::arg("tol_x") = 1e-12);

  m.def(
      "rotation_matrix", [](const std::array<double, 3>& a) { return rotation_matrix(a); }, py::arg("angles"));
  m.def(
      "rotate", [](const Array& c, const std::array<double, 3>& a) { return to_array(rotate_cloud(to_cloud(c), a)); },
      py::arg("cloud"), py::arg("angles"));
  m.def(
      "gradcheck", [](std::uint64_t seed) { return gradcheck_toy(seed).max_rel_error; }, py::arg("seed") = 1,
      "Max relative error of the loss gradient on the toy configuration.");
}
