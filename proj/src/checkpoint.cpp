#include "mmgcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "mmgcn/config.hpp"
#include "mmgcn/error.hpp"

namespace mmgcn {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

struct BlobWriter {
  std::vector<double> blob;
  json index = json::array();

  void add(const std::string& name, std::span<const double> data, std::vector<std::size_t> shape) {
    index.push_back({{"name", name}, {"offset", blob.size()}, {"count", data.size()}, {"shape", shape}});
    blob.insert(blob.end(), data.begin(), data.end());
  }
};

struct BlobReader {
  std::vector<double> blob;
  std::map<std::string, std::pair<std::size_t, std::size_t>> entries;
  std::string file;

  std::span<const double> get(const std::string& name, std::size_t expected) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw LoadError(file + ": missing tensor '" + name + "'");
    if (it->second.second != expected) {
      throw LoadError(file + ": tensor '" + name + "' has " + std::to_string(it->second.second) +
                      " values, expected " + std::to_string(expected));
    }
    return std::span<const double>(blob).subspan(it->second.first, it->second.second);
  }
};

std::string prefix(std::size_t l) { return "layer" + std::to_string(l); }

std::vector<std::size_t> weight_shape(const LayerParams& layer) {
  if (const auto* g = std::get_if<GgcnLayerParams>(&layer)) {
    return {g->modalities, g->modalities, g->terms, g->in_features, g->out_features};
  }
  const Dims4& d = std::get<MrgcnLayerParams>(layer).weights.dims();
  return {d[0], d[1], d[2], d[3]};
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir, const std::string& stem) {
  const TrainState& s = ckpt.state;
  BlobWriter w;
  json dims = json::array();
  for (std::size_t l = 0; l < s.params.layers.size(); ++l) {
    const LayerParams& layer = s.params.layers[l];
    const auto shape = weight_shape(layer);
    const auto biases = bias_data(layer);
    dims.push_back(shape);
    w.add(prefix(l) + ".weights", weight_data(layer), shape);
    w.add(prefix(l) + ".biases", biases, {biases.size()});
    if (const auto* m = std::get_if<MrgcnLayerParams>(&layer)) {
      for (int mode = 0; mode < 4; ++mode) {
        const auto& sig = m->covariances.sigma[static_cast<std::size_t>(mode)].matrix();
        w.add(prefix(l) + ".sigma_" + cov_mode_name(mode), std::span<const double>(sig.data(), sig.size()),
              {static_cast<std::size_t>(sig.rows()), static_cast<std::size_t>(sig.cols())});
      }
    }
    w.add(prefix(l) + ".adam_m.weights", s.first_moment[l].weights, shape);
    w.add(prefix(l) + ".adam_m.biases", s.first_moment[l].biases, {biases.size()});
    w.add(prefix(l) + ".adam_v.weights", s.second_moment[l].weights, shape);
    w.add(prefix(l) + ".adam_v.biases", s.second_moment[l].biases, {biases.size()});
  }
  const double scalars[] = {s.best_val_rmse, ckpt.scale};
  w.add("best_val_rmse", std::span<const double>(scalars, 1), {1});
  w.add("scale", std::span<const double>(scalars + 1, 1), {1});

  json frozen = json::array();
  for (const auto& layer : s.params.layers) {
    if (const auto* m = std::get_if<MrgcnLayerParams>(&layer)) {
      frozen.push_back(std::vector<bool>(m->covariances.frozen.begin(), m->covariances.frozen.end()));
    } else {
      frozen.push_back(nullptr);
    }
  }
  std::ostringstream rng;
  rng << s.rng;
  const json manifest = {{"version", kCheckpointVersion},
                         {"net_config", to_json(s.params.config)},
                         {"dims", dims},
                         {"frozen_modes", frozen},
                         {"step", s.step},
                         {"epoch", s.epoch},
                         {"epochs_since_improvement", s.epochs_since_improvement},
                         {"rng", rng.str()},
                         {"blob", stem + ".bin"},
                         {"tensor_index", w.index}};

  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / (stem + ".bin"), std::ios::binary);
    if (!out) throw LoadError((dir / (stem + ".bin")).string() + ": cannot write");
    out.write(reinterpret_cast<const char*>(w.blob.data()), static_cast<std::streamsize>(w.blob.size() * sizeof(double)));
  }
  std::ofstream out(dir / (stem + ".json"));
  if (!out) throw LoadError((dir / (stem + ".json")).string() + ": cannot write");
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::string& stem) {
  const auto manifest_path = dir / (stem + ".json");
  const json manifest = read_json_file(manifest_path);
  const std::string mfile = manifest_path.string();
  Checkpoint ckpt;
  BlobReader r;
  try {
    if (manifest.at("version").get<int>() != kCheckpointVersion) {
      throw LoadError(mfile + ": unsupported checkpoint version");
    }
    const auto blob_path = dir / manifest.at("blob").get<std::string>();
    r.file = blob_path.string();
    std::ifstream in(blob_path, std::ios::binary | std::ios::ate);
    if (!in) throw LoadError(r.file + ": cannot open");
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(double) != 0) throw LoadError(r.file + ": size is not a multiple of 8 bytes");
    r.blob.resize(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(r.blob.data()), static_cast<std::streamsize>(bytes));
    for (const auto& e : manifest.at("tensor_index")) {
      const auto offset = e.at("offset").get<std::size_t>();
      const auto count = e.at("count").get<std::size_t>();
      if (offset + count > r.blob.size()) throw LoadError(r.file + ": tensor index points past the end of the blob");
      r.entries[e.at("name").get<std::string>()] = {offset, count};
    }

    NetworkConfig net;
    try {
      net = network_config_from_json(manifest.at("net_config"));
    } catch (const ConfigError& e) {
      throw LoadError(mfile + ": " + e.what());
    }
    const json& frozen = manifest.at("frozen_modes");
    std::array<bool, 4> modes{true, true, false, false};
    for (const auto& f : frozen) {
      if (!f.is_null()) {
        for (std::size_t k = 0; k < 4; ++k) modes[k] = f.at(k).get<bool>();
        break;
      }
    }
    TrainState& s = ckpt.state;
    s.params = init_network(net, 0, modes);
    s.first_moment = zeros_like(s.params);
    s.second_moment = zeros_like(s.params);
    if (frozen.size() != s.params.layers.size()) throw LoadError(mfile + ": frozen_modes does not match layer count");
    for (std::size_t l = 0; l < s.params.layers.size(); ++l) {
      LayerParams& layer = s.params.layers[l];
      auto copy = [&](const std::string& name, std::span<double> dst) {
        const auto src = r.get(name, dst.size());
        std::copy(src.begin(), src.end(), dst.begin());
      };
      copy(prefix(l) + ".weights", weight_data(layer));
      copy(prefix(l) + ".biases", bias_data(layer));
      copy(prefix(l) + ".adam_m.weights", s.first_moment[l].weights);
      copy(prefix(l) + ".adam_m.biases", s.first_moment[l].biases);
      copy(prefix(l) + ".adam_v.weights", s.second_moment[l].weights);
      copy(prefix(l) + ".adam_v.biases", s.second_moment[l].biases);
      if (auto* m = std::get_if<MrgcnLayerParams>(&layer)) {
        for (std::size_t k = 0; k < 4; ++k) m->covariances.frozen[k] = frozen[l].at(k).get<bool>();
        for (int mode = 0; mode < 4; ++mode) {
          auto& sig = m->covariances.sigma[static_cast<std::size_t>(mode)];
          Eigen::MatrixXd mat(sig.matrix().rows(), sig.matrix().cols());
          copy(prefix(l) + ".sigma_" + cov_mode_name(mode), std::span<double>(mat.data(), mat.size()));
          try {
            sig = SpdMatrix(std::move(mat));
          } catch (const std::exception& e) {
            throw LoadError(r.file + ": covariance " + prefix(l) + "." + cov_mode_name(mode) + ": " + e.what());
          }
        }
      }
    }
    s.best_val_rmse = r.get("best_val_rmse", 1)[0];
    ckpt.scale = r.get("scale", 1)[0];
    s.step = manifest.at("step").get<std::uint64_t>();
    s.epoch = manifest.at("epoch").get<std::size_t>();
    s.epochs_since_improvement = manifest.at("epochs_since_improvement").get<std::size_t>();
    std::istringstream rng(manifest.at("rng").get<std::string>());
    rng >> s.rng;
    if (!rng) throw LoadError(mfile + ": malformed rng state");
  } catch (const json::exception& e) {
    throw LoadError(mfile + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw LoadError(mfile + ": " + e.what());
  }
  return ckpt;
}

}  // namespace mmgcn
