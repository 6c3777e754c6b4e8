#include "gauss/networks.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace gauss {

using nn::Activation;

GaussModel build_model(int bands, int sources, std::uint64_t seed) {
  if (bands < 8)
    throw DataError("build_model: need at least 8 bands, floor(B/8) would "
                    "empty a layer (got " + std::to_string(bands) + ")");
  if (sources < 2)
    throw DataError("build_model: need at least 2 sources");

  GaussModel model;
  model.bands = bands;
  model.sources = sources;

  const int nb = model.neighborhood * bands;
  Rng an_rng(derive_seed(seed, seed_label::kInitAn));
  model.an.push_back(nn::make_dense_layer(nb, nb / 2, true, Activation::kRelu, an_rng));
  model.an.push_back(nn::make_dense_layer(nb / 2, nb / 8, true, Activation::kRelu, an_rng));
  model.an.push_back(nn::make_dense_layer(nb / 8, bands, true, Activation::kLinear, an_rng));

  Rng un_rng(derive_seed(seed, seed_label::kInitUn));
  model.un.push_back(nn::make_dense_layer(bands, bands / 2, false, Activation::kRelu, un_rng));
  model.un.push_back(nn::make_dense_layer(bands / 2, bands / 8, false, Activation::kRelu, un_rng));
  model.un.push_back(nn::make_dense_layer(bands / 8, sources, false, Activation::kSoftmax, un_rng));

  Rng mn_rng(derive_seed(seed, seed_label::kInitMn));
  model.mn.push_back(nn::make_dense_layer(sources, bands / 4, false, Activation::kRelu, mn_rng));
  model.mn.push_back(nn::make_dense_layer(bands / 4, bands, false, Activation::kReluEps, mn_rng));

  return model;
}

MatrixXd an_forward(const GaussModel& model, const NeighborhoodMatrix& nbhd) {
  if (nbhd.values.rows() != model.neighborhood * model.bands)
    throw DataError("an_forward: neighborhood rows do not match model");
  return nn::predict(model.an, nbhd.values);
}

AbundanceMatrix un_forward(const GaussModel& model, const MatrixXd& spectra) {
  if (spectra.rows() != model.bands)
    throw DataError("un_forward: spectra rows do not match model bands");
  AbundanceMatrix out;
  out.values = nn::predict(model.un, spectra);
  return out;
}

MatrixXd mn_forward(const GaussModel& model, const MatrixXd& abundances) {
  if (abundances.rows() != model.sources)
    throw DataError("mn_forward: abundance rows do not match model sources");
  return nn::predict(model.mn, abundances);
}

EndmemberMatrix extract_endmembers(const GaussModel& model) {
  EndmemberMatrix out;
  out.values = mn_forward(model, MatrixXd::Identity(model.sources, model.sources));
  return out;
}

AbundanceMatrix estimate_abundances(const GaussModel& model, const HsiCube& cube) {
  if (cube.bands != model.bands)
    throw DataError("estimate_abundances: cube bands do not match model");
  return un_forward(model, an_forward(model, build_neighborhood_matrix(cube)));
}

void save_model(const GaussModel& model, const nn::AdamParams& hp,
                const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = {{"bands", model.bands},
                             {"sources", model.sources},
                             {"neighborhood", model.neighborhood},
                             {"pretrained", model.pretrained}};
  std::ofstream f(dir + "/manifest.json");
  if (!f) throw DataError("cannot open for writing: " + dir + "/manifest.json");
  f << manifest.dump(2) << '\n';
  if (!f) throw DataError("write failed: " + dir + "/manifest.json");
  nn::save_network(model.an, hp, 0, dir + "/an.net");
  nn::save_network(model.un, hp, 0, dir + "/un.net");
  nn::save_network(model.mn, hp, 0, dir + "/mn.net");
}

GaussModel load_model(const std::string& dir) {
  std::ifstream f(dir + "/manifest.json");
  if (!f) throw DataError("cannot open for reading: " + dir + "/manifest.json");
  nlohmann::json manifest;
  try {
    f >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model manifest in " + dir + ": " + e.what());
  }
  GaussModel model;
  model.bands = manifest.at("bands");
  model.sources = manifest.at("sources");
  model.neighborhood = manifest.at("neighborhood");
  model.pretrained = manifest.at("pretrained");
  model.an = nn::load_network(dir + "/an.net").net;
  model.un = nn::load_network(dir + "/un.net").net;
  model.mn = nn::load_network(dir + "/mn.net").net;
  if (model.an.front().in_dim() != model.neighborhood * model.bands ||
      model.un.back().out_dim() != model.sources ||
      model.mn.back().out_dim() != model.bands)
    throw DataError("model checkpoint dims inconsistent with manifest: " + dir);
  return model;
}

}  // namespace gauss
