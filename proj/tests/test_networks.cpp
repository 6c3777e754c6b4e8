#include <doctest.h>

#include <filesystem>

#include "gauss/networks.hpp"

using namespace gauss;

namespace {
HsiCube random_cube(int w, int h, int b, std::uint64_t seed) {
  HsiCube cube(w, h, b);
  Rng rng(seed);
  for (double& v : cube.data) v = rng.uniform();
  return cube;
}
}  // namespace

TEST_CASE("layer widths follow the floor recipe") {
  // 156 bands, 3 sources: unmixing net 156 -> 78 -> 19 -> 3.
  GaussModel samson = build_model(156, 3, 0);
  CHECK(samson.un[0].in_dim() == 156);
  CHECK(samson.un[0].out_dim() == 78);
  CHECK(samson.un[1].out_dim() == 19);
  CHECK(samson.un[2].out_dim() == 3);
  CHECK_FALSE(samson.un[0].bias.has_value());

  // 198 bands, 4 sources: approximation net 1584 -> 792 -> 198 -> 198.
  GaussModel jasper = build_model(198, 4, 0);
  CHECK(jasper.an[0].in_dim() == 1584);
  CHECK(jasper.an[0].out_dim() == 792);
  CHECK(jasper.an[1].out_dim() == 198);
  CHECK(jasper.an[2].out_dim() == 198);
  CHECK(jasper.an[0].bias.has_value());
  CHECK(jasper.mn[0].in_dim() == 4);
  CHECK(jasper.mn[0].out_dim() == 49);
  CHECK(jasper.mn[1].out_dim() == 198);
}

TEST_CASE("smallest legal model and the band floor") {
  GaussModel tiny = build_model(8, 2, 0);
  for (const auto& layer : tiny.an) CHECK(layer.out_dim() >= 1);
  for (const auto& layer : tiny.un) CHECK(layer.out_dim() >= 1);
  for (const auto& layer : tiny.mn) CHECK(layer.out_dim() >= 1);
  CHECK(tiny.un[1].out_dim() == 1);
  CHECK_THROWS_AS(build_model(7, 2, 0), DataError);
  CHECK_THROWS_AS(build_model(16, 1, 0), DataError);
}

TEST_CASE("shapes hold for arbitrary legal dims") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int b = 8 + static_cast<int>(rng.index(200));
    const int k = 2 + static_cast<int>(rng.index(6));
    GaussModel m = build_model(b, k, trial);
    CHECK(m.an[0].in_dim() == 8 * b);
    CHECK(m.an[0].out_dim() == (8 * b) / 2);
    CHECK(m.an[1].out_dim() == (8 * b) / 8);
    CHECK(m.an[2].out_dim() == b);
    CHECK(m.un[0].out_dim() == b / 2);
    CHECK(m.un[1].out_dim() == b / 8);
    CHECK(m.un[2].out_dim() == k);
    CHECK(m.mn[0].out_dim() == b / 4);
    CHECK(m.mn[1].out_dim() == b);
  }
}

TEST_CASE("an_forward honors the shape contract and is deterministic") {
  GaussModel model = build_model(8, 2, 3);
  HsiCube cube = random_cube(4, 3, 8, 5);
  NeighborhoodMatrix nbhd = build_neighborhood_matrix(cube);
  MatrixXd a = an_forward(model, nbhd);
  CHECK(a.rows() == 8);
  CHECK(a.cols() == 12);
  CHECK(a == an_forward(model, nbhd));

  // Layer-by-layer composition oracle.
  MatrixXd cur = nbhd.values;
  for (const auto& layer : model.an) {
    MatrixXd z = layer.weights * cur;
    if (layer.bias) z.colwise() += *layer.bias;
    cur = nn::apply_activation(layer.activation, z);
  }
  CHECK((a - cur).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("un_forward puts every column on the simplex") {
  GaussModel model = build_model(16, 3, 9);
  Rng rng(2);
  MatrixXd spectra(16, 40);
  for (int i = 0; i < spectra.size(); ++i) spectra.data()[i] = rng.uniform();
  AbundanceMatrix s = un_forward(model, spectra);
  for (int j = 0; j < s.pixels(); ++j) {
    CHECK(std::abs(s.values.col(j).sum() - 1.0) <= 1e-12);
    CHECK(s.values.col(j).minCoeff() > 0.0);
  }
}

TEST_CASE("symmetric unmixing head splits evenly") {
  GaussModel model = build_model(8, 2, 1);
  // Make the two output logits identical for any input.
  model.un[2].weights.row(1) = model.un[2].weights.row(0);
  MatrixXd spectra = MatrixXd::Constant(8, 3, 0.4);
  AbundanceMatrix s = un_forward(model, spectra);
  for (int j = 0; j < 3; ++j) {
    CHECK(s.values(0, j) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.values(1, j) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("mn_forward output is strictly positive") {
  GaussModel model = build_model(12, 3, 4);
  Rng rng(6);
  MatrixXd abund(3, 25);
  for (int i = 0; i < abund.size(); ++i) abund.data()[i] = rng.uniform();
  MatrixXd y = mn_forward(model, abund);
  CHECK(y.minCoeff() >= nn::kReluEpsFloor);

  for (auto& layer : model.mn) layer.weights.setZero();
  MatrixXd floor = mn_forward(model, abund);
  CHECK(floor.minCoeff() == nn::kReluEpsFloor);
  CHECK(floor.maxCoeff() == nn::kReluEpsFloor);
}

TEST_CASE("endmember extraction is the identity feed") {
  GaussModel model = build_model(8, 3, 11);
  // Single linear mixing layer: the response to the identity is the
  // weight matrix itself.
  Rng rng(3);
  nn::Network single(1);
  single[0].weights = MatrixXd::Random(8, 3).cwiseAbs();
  single[0].activation = nn::Activation::kLinear;
  model.mn = single;
  EndmemberMatrix a = extract_endmembers(model);
  CHECK(a.values == single[0].weights);
}

TEST_CASE("endmember columns equal one-hot responses") {
  GaussModel model = build_model(16, 4, 13);
  EndmemberMatrix a = extract_endmembers(model);
  CHECK(a.values.minCoeff() >= nn::kReluEpsFloor);
  for (int k = 0; k < 4; ++k) {
    MatrixXd e = MatrixXd::Zero(4, 1);
    e(k, 0) = 1.0;
    CHECK((a.values.col(k) - mn_forward(model, e).col(0)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("estimate_abundances composes the pipeline") {
  GaussModel model = build_model(8, 2, 21);
  HsiCube cube = random_cube(5, 5, 8, 33);
  AbundanceMatrix s = estimate_abundances(model, cube);
  CHECK(s.sources() == 2);
  CHECK(s.pixels() == 25);
  s.validate(1e-9);

  NeighborhoodMatrix nbhd = build_neighborhood_matrix(cube);
  AbundanceMatrix manual = un_forward(model, an_forward(model, nbhd));
  CHECK(s.values == manual.values);
}

TEST_CASE("constant cube yields constant abundance columns") {
  GaussModel model = build_model(8, 3, 2);
  HsiCube cube(6, 4, 8);
  for (auto& v : cube.data) v = 0.3;
  AbundanceMatrix s = estimate_abundances(model, cube);
  for (int j = 1; j < s.pixels(); ++j)
    CHECK((s.values.col(j) - s.values.col(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model checkpoint directory round trip") {
  GaussModel model = build_model(16, 3, 77);
  model.pretrained = true;
  const std::string dir = "/tmp/gauss_model_ckpt_test";
  save_model(model, {}, dir);
  GaussModel back = load_model(dir);
  CHECK(back.bands == 16);
  CHECK(back.sources == 3);
  CHECK(back.pretrained);
  for (std::size_t l = 0; l < model.un.size(); ++l)
    CHECK(back.un[l].weights == model.un[l].weights);
  for (std::size_t l = 0; l < model.an.size(); ++l)
    CHECK(*back.an[l].bias == *model.an[l].bias);
  std::filesystem::remove_all(dir);
}
