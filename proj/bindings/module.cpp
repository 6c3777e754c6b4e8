#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gauss/hsi.hpp"
#include "gauss/io.hpp"
#include "gauss/metrics.hpp"
#include "gauss/networks.hpp"
#include "gauss/pgt.hpp"
#include "gauss/synth.hpp"
#include "gauss/trainer.hpp"

namespace py = pybind11;
using namespace gauss;

namespace {

HsiCube cube_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
  if (arr.ndim() != 3)
    throw DataError("expected a (height, width, bands) array");
  HsiCube cube(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)),
               static_cast<int>(arr.shape(2)));
  auto view = arr.unchecked<3>();
  for (int m = 0; m < cube.height; ++m)
    for (int n = 0; n < cube.width; ++n)
      for (int b = 0; b < cube.bands; ++b) cube.at(m, n, b) = view(m, n, b);
  cube.validate();
  return cube;
}

py::array_t<double> cube_to_array(const HsiCube& cube) {
  py::array_t<double> arr({cube.height, cube.width, cube.bands});
  auto view = arr.mutable_unchecked<3>();
  for (int m = 0; m < cube.height; ++m)
    for (int n = 0; n < cube.width; ++n)
      for (int b = 0; b < cube.bands; ++b) view(m, n, b) = cube.at(m, n, b);
  return arr;
}

AbundanceMatrix wrap_abundances(const MatrixXd& values) {
  AbundanceMatrix s;
  s.values = values;
  s.validate(1e-3);
  return s;
}

TrainConfig config_from_kwargs(int batch_size, int epochs_per_stage,
                               std::uint64_t seed, double lr, double beta1,
                               double beta2, double epsilon,
                               const std::string& mn_loss) {
  TrainConfig cfg;
  cfg.batch_size = batch_size;
  cfg.epochs_per_stage = epochs_per_stage;
  cfg.seed = seed;
  cfg.adam = {lr, beta1, beta2, epsilon};
  if (mn_loss == "psid") cfg.mn_loss = MnLoss::kPsid;
  else if (mn_loss == "mse_raw") cfg.mn_loss = MnLoss::kMseRaw;
  else throw DataError("mn_loss must be 'psid' or 'mse_raw'");
  cfg.validate();
  return cfg;
}

py::dict report_to_dict(const TrainReport& report) {
  py::dict d;
  py::list stages;
  for (const StageCurve& s : report.stages) {
    py::dict stage;
    stage["name"] = s.name;
    stage["losses"] = s.losses;
    stages.append(stage);
  }
  d["stages"] = stages;
  d["wall_seconds"] = report.wall_seconds;
  d["max_asc_error"] = report.max_asc_error;
  d["min_abundance"] = report.min_abundance;
  return d;
}

py::dict eval_to_dict(const metrics::EvalReport& r) {
  py::dict d;
  d["armse"] = r.armse;
  d["aaad"] = r.aaad;
  d["aaid"] = r.aaid;
  d["asad"] = r.asad;
  d["asid"] = r.asid;
  d["permutation"] = r.permutation;
  return d;
}

constexpr char kTrainArgsDoc[] =
    "batch_size=32, epochs_per_stage=25, seed=0, lr=1e-3, beta1=0.9, "
    "beta2=0.999, epsilon=1e-7, mn_loss='psid'";

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Guided encoder-decoder hyperspectral unmixing";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<HsiCube>(m, "HsiCube")
      .def(py::init(&cube_from_array), py::arg("array"),
           "Build a cube from a (height, width, bands) reflectance array")
      .def_readonly("width", &HsiCube::width)
      .def_readonly("height", &HsiCube::height)
      .def_readonly("bands", &HsiCube::bands)
      .def("to_array", &cube_to_array)
      .def("to_matrix",
           [](const HsiCube& cube) { return cube_to_matrix(cube).values; },
           "Bands x pixels matrix view, pixels in row-major order");

  m.def("cube_from_matrix",
        [](const MatrixXd& y, int width, int height) {
          SpectraMatrix s;
          s.values = y;
          return matrix_to_cube(s, width, height);
        },
        py::arg("matrix"), py::arg("width"), py::arg("height"));
  m.def("load_cube", &io::load_cube, py::arg("path"));
  m.def("save_cube", &io::save_cube, py::arg("cube"), py::arg("path"));
  m.def("build_neighborhood_matrix",
        [](const HsiCube& cube) { return build_neighborhood_matrix(cube).values; },
        py::arg("cube"), "Stacked Moore neighborhoods, one column per pixel");

  py::class_<KMeansResult>(m, "KMeansResult")
      .def_readonly("centroids", &KMeansResult::centroids)
      .def_readonly("labels", &KMeansResult::labels)
      .def_readonly("inertia", &KMeansResult::inertia)
      .def_readonly("iterations", &KMeansResult::iterations)
      .def_readonly("inertia_history", &KMeansResult::inertia_history);

  m.def("kmeans",
        [](const MatrixXd& y, int k, std::uint64_t seed, int max_iter, double tol) {
          SpectraMatrix s;
          s.values = y;
          return kmeans(s, k, seed, max_iter, tol);
        },
        py::arg("spectra"), py::arg("k"), py::arg("seed") = 0,
        py::arg("max_iter") = 300, py::arg("tol") = 1e-6);
  m.def("one_hot_pseudo_gt",
        [](const std::vector<int>& labels, int k) {
          return one_hot_pseudo_gt(labels, k).values;
        },
        py::arg("labels"), py::arg("k"));
  m.def("load_external_pgt",
        [](const std::string& path, int k, int n) {
          return load_external_pgt(path, k, n).values;
        },
        py::arg("path"), py::arg("k"), py::arg("n"));

  py::class_<synth::SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("width", &synth::SynthConfig::width)
      .def_readwrite("height", &synth::SynthConfig::height)
      .def_readwrite("sources", &synth::SynthConfig::sources)
      .def_readwrite("tile", &synth::SynthConfig::tile)
      .def_readwrite("superpixel", &synth::SynthConfig::superpixel)
      .def_readwrite("pure_tile_fraction", &synth::SynthConfig::pure_tile_fraction)
      .def_readwrite("smoothing_passes", &synth::SynthConfig::smoothing_passes)
      .def_readwrite("noise_snr_db", &synth::SynthConfig::noise_snr_db)
      .def_readwrite("seed", &synth::SynthConfig::seed);

  m.def("generate_abundances",
        [](const synth::SynthConfig& cfg) {
          return synth::generate_abundances(cfg).matrix.values;
        },
        py::arg("config"), "Sources x pixels abundance matrix");
  m.def("resample_spectrum",
        [](const std::vector<double>& wavelengths,
           const std::vector<double>& reflectance,
           const std::vector<double>& targets) {
          io::SpectralLibraryEntry entry;
          entry.wavelengths = wavelengths;
          entry.reflectance = reflectance;
          return synth::resample_spectrum(entry, targets);
        },
        py::arg("wavelengths"), py::arg("reflectance"), py::arg("targets"));
  m.def("mix_lmm",
        [](const MatrixXd& endmembers, const MatrixXd& abundances,
           std::optional<double> snr_db, std::uint64_t seed) {
          EndmemberMatrix a;
          a.values = endmembers;
          return synth::mix_lmm(a, wrap_abundances(abundances), snr_db, seed).values;
        },
        py::arg("endmembers"), py::arg("abundances"),
        py::arg("noise_snr_db") = std::nullopt, py::arg("seed") = 0);

  py::class_<GaussModel>(m, "GaussModel")
      .def_readonly("bands", &GaussModel::bands)
      .def_readonly("sources", &GaussModel::sources)
      .def_readonly("pretrained", &GaussModel::pretrained)
      .def("estimate_abundances",
           [](const GaussModel& model, const HsiCube& cube) {
             return estimate_abundances(model, cube).values;
           },
           py::arg("cube"))
      .def("extract_endmembers",
           [](const GaussModel& model) { return extract_endmembers(model).values; })
      .def("save", [](const GaussModel& model, const std::string& dir) {
        save_model(model, {}, dir);
      });

  m.def("build_model", &build_model, py::arg("bands"), py::arg("sources"),
        py::arg("seed") = 0);
  m.def("load_model", &load_model, py::arg("path"));

  m.def("train_gauss",
        [](GaussModel& model, const HsiCube& cube, const MatrixXd& pgt,
           int batch_size, int epochs_per_stage, std::uint64_t seed, double lr,
           double beta1, double beta2, double epsilon, const std::string& mn_loss) {
          return report_to_dict(train_gauss(
              model, cube, wrap_abundances(pgt),
              config_from_kwargs(batch_size, epochs_per_stage, seed, lr, beta1,
                                 beta2, epsilon, mn_loss)));
        },
        py::arg("model"), py::arg("cube"), py::arg("pgt"),
        py::arg("batch_size") = 32, py::arg("epochs_per_stage") = 25,
        py::arg("seed") = 0, py::arg("lr") = 1e-3, py::arg("beta1") = 0.9,
        py::arg("beta2") = 0.999, py::arg("epsilon") = 1e-7,
        py::arg("mn_loss") = "psid", kTrainArgsDoc);
  m.def("train_gauss_extended",
        [](GaussModel& model, const HsiCube& cube, const MatrixXd& pgt,
           int batch_size, int epochs_per_stage, std::uint64_t seed, double lr,
           double beta1, double beta2, double epsilon, const std::string& mn_loss) {
          return report_to_dict(train_gauss_extended(
              model, cube, wrap_abundances(pgt),
              config_from_kwargs(batch_size, epochs_per_stage, seed, lr, beta1,
                                 beta2, epsilon, mn_loss)));
        },
        py::arg("model"), py::arg("cube"), py::arg("pgt"),
        py::arg("batch_size") = 32, py::arg("epochs_per_stage") = 25,
        py::arg("seed") = 0, py::arg("lr") = 1e-3, py::arg("beta1") = 0.9,
        py::arg("beta2") = 0.999, py::arg("epsilon") = 1e-7,
        py::arg("mn_loss") = "psid", kTrainArgsDoc);
  m.def("train_blind",
        [](GaussModel& model, const HsiCube& cube, int batch_size,
           int epochs_per_stage, std::uint64_t seed, double lr, double beta1,
           double beta2, double epsilon, const std::string& mn_loss) {
          return report_to_dict(train_blind(
              model, cube,
              config_from_kwargs(batch_size, epochs_per_stage, seed, lr, beta1,
                                 beta2, epsilon, mn_loss)));
        },
        py::arg("model"), py::arg("cube"), py::arg("batch_size") = 32,
        py::arg("epochs_per_stage") = 25, py::arg("seed") = 0,
        py::arg("lr") = 1e-3, py::arg("beta1") = 0.9, py::arg("beta2") = 0.999,
        py::arg("epsilon") = 1e-7, py::arg("mn_loss") = "psid", kTrainArgsDoc);
  m.def("train_prime",
        [](GaussModel& model, const HsiCube& cube, const MatrixXd& external_pgt,
           int batch_size, int epochs_per_stage, std::uint64_t seed, double lr,
           double beta1, double beta2, double epsilon, const std::string& mn_loss) {
          return report_to_dict(train_prime(
              model, cube, wrap_abundances(external_pgt),
              config_from_kwargs(batch_size, epochs_per_stage, seed, lr, beta1,
                                 beta2, epsilon, mn_loss)));
        },
        py::arg("model"), py::arg("cube"), py::arg("external_pgt"),
        py::arg("batch_size") = 32, py::arg("epochs_per_stage") = 25,
        py::arg("seed") = 0, py::arg("lr") = 1e-3, py::arg("beta1") = 0.9,
        py::arg("beta2") = 0.999, py::arg("epsilon") = 1e-7,
        py::arg("mn_loss") = "psid", kTrainArgsDoc);

  m.def("evaluate",
        [](const MatrixXd& s_true, const MatrixXd& s_est, const MatrixXd& a_true,
           const MatrixXd& a_est) {
          EndmemberMatrix at, ae;
          at.values = a_true;
          ae.values = a_est;
          return eval_to_dict(metrics::evaluate(wrap_abundances(s_true),
                                                wrap_abundances(s_est), at, ae));
        },
        py::arg("true_abundances"), py::arg("est_abundances"),
        py::arg("true_endmembers"), py::arg("est_endmembers"));

  m.def("loss_smooth", &nn::loss_smooth, py::arg("target"), py::arg("estimate"));
  m.def("loss_ce", &nn::loss_ce, py::arg("target"), py::arg("estimate"));
  m.def("loss_mse", &nn::loss_mse, py::arg("target"), py::arg("estimate"));
  m.def("loss_psid", &nn::loss_psid, py::arg("reference"), py::arg("estimate"));
  m.def("softmax", &nn::softmax, py::arg("logits"));
}
