#include "mmgcn/config.hpp"

#include <fstream>
#include <set>

#include "mmgcn/error.hpp"

namespace mmgcn {

using nlohmann::json;

namespace {

// Walks one JSON object, consuming known keys; leftovers are reported as unknown fields.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError(path(key), "expected a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v->is_number_unsigned()) throw ConfigError(path(key), "expected a nonnegative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError(path(key), "expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError(path(key), "expected a string");
      }
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key), e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

template <typename F>
void checked(const std::string& field, F&& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(field, e.what());
  }
}

std::array<bool, 4> parse_modes(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of mode names (I, O, C, M)");
  std::array<bool, 4> out{false, false, false, false};
  for (const auto& e : v) {
    if (!e.is_string()) throw ConfigError(field, "mode names must be strings");
    const std::string s = e.get<std::string>();
    int mode = -1;
    for (int m = 0; m < 4; ++m) {
      if (s == cov_mode_name(m)) mode = m;
    }
    if (mode < 0) throw ConfigError(field, "unknown mode '" + s + "'");
    out[static_cast<std::size_t>(mode)] = true;
  }
  return out;
}

json modes_json(const std::array<bool, 4>& modes) {
  json a = json::array();
  for (int m = 0; m < 4; ++m) {
    if (modes[static_cast<std::size_t>(m)]) a.push_back(cov_mode_name(m));
  }
  return a;
}

BasisKind parse_basis(const std::string& s, const std::string& field) {
  if (s == "power") return BasisKind::Power;
  if (s == "chebyshev") return BasisKind::Chebyshev;
  throw ConfigError(field, "expected \"power\" or \"chebyshev\", got '" + s + "'");
}

std::string basis_name(BasisKind k) { return k == BasisKind::Power ? "power" : "chebyshev"; }

RegularizerConfig parse_reg(const json& j, const std::string& prefix, RegularizerConfig reg) {
  ObjectReader r(j, prefix);
  r.read("alpha_intra", reg.alpha_intra);
  r.read("alpha_low", reg.alpha_low);
  r.read("alpha_high", reg.alpha_high);
  r.read("epsilon", reg.epsilon);
  r.read("normalize_covariance", reg.normalize_covariance);
  if (const json* v = r.find("frozen_modes")) reg.frozen_modes = parse_modes(*v, r.path("frozen_modes"));
  if (const json* v = r.find("flip_flop_form")) {
    if (!v->is_string()) throw ConfigError(r.path("flip_flop_form"), "expected a string");
    const std::string s = v->get<std::string>();
    if (s == "literal") {
      reg.flip_flop_form = FlipFlopForm::Literal;
    } else if (s == "inverse_mle") {
      reg.flip_flop_form = FlipFlopForm::InverseMle;
    } else {
      throw ConfigError(r.path("flip_flop_form"), "expected \"literal\" or \"inverse_mle\", got '" + s + "'");
    }
  }
  r.finish();
  if (!(reg.alpha_intra >= 0.0)) throw ConfigError(r.path("alpha_intra"), "must be nonnegative");
  if (!(reg.alpha_low >= 0.0)) throw ConfigError(r.path("alpha_low"), "must be nonnegative");
  if (!(reg.alpha_high >= 0.0)) throw ConfigError(r.path("alpha_high"), "must be nonnegative");
  if (!(reg.epsilon > 0.0 && reg.epsilon < 1.0)) throw ConfigError(r.path("epsilon"), "must lie in (0, 1)");
  return reg;
}

TrainConfig parse_train(const json& j, const std::string& prefix) {
  TrainConfig t;
  ObjectReader r(j, prefix);
  r.read("learning_rate", t.learning_rate);
  r.read("batch_size", t.batch_size);
  r.read("adam_beta1", t.adam_beta1);
  r.read("adam_beta2", t.adam_beta2);
  r.read("adam_eps", t.adam_eps);
  r.read("max_epochs", t.max_epochs);
  r.read("patience", t.patience);
  r.read("cov_update_every", t.cov_update_every);
  r.read("max_steps", t.max_steps);
  r.read("seed", t.seed);
  if (const json* v = r.find("reg")) t.reg = parse_reg(*v, r.path("reg"), t.reg);
  r.finish();
  if (!(t.learning_rate > 0.0)) throw ConfigError(r.path("learning_rate"), "must be positive");
  if (t.batch_size < 1) throw ConfigError(r.path("batch_size"), "must be at least 1");
  if (t.patience < 1) throw ConfigError(r.path("patience"), "must be at least 1");
  if (t.cov_update_every < 1) throw ConfigError(r.path("cov_update_every"), "must be at least 1");
  if (!(t.adam_beta1 >= 0.0 && t.adam_beta1 < 1.0)) throw ConfigError(r.path("adam_beta1"), "must lie in [0, 1)");
  if (!(t.adam_beta2 >= 0.0 && t.adam_beta2 < 1.0)) throw ConfigError(r.path("adam_beta2"), "must lie in [0, 1)");
  if (!(t.adam_eps > 0.0)) throw ConfigError(r.path("adam_eps"), "must be positive");
  return t;
}

NetworkSpec parse_network(const json& j, const std::string& prefix) {
  NetworkSpec n;
  ObjectReader r(j, prefix);
  r.read("degree", n.degree);
  r.read("modalities", n.modalities);
  r.read("per_vertex_bias", n.per_vertex_bias);
  if (const json* v = r.find("basis")) {
    if (!v->is_string()) throw ConfigError(r.path("basis"), "expected a string");
    n.basis = parse_basis(v->get<std::string>(), r.path("basis"));
  }
  if (const json* v = r.find("dims")) {
    if (!v->is_array() || v->empty()) throw ConfigError(r.path("dims"), "expected a nonempty array of widths");
    n.dims.clear();
    for (const auto& e : *v) {
      if (!e.is_number_unsigned() || e.get<std::size_t>() == 0) {
        throw ConfigError(r.path("dims"), "widths must be positive integers");
      }
      n.dims.push_back(e.get<std::size_t>());
    }
  }
  r.finish();
  if (n.modalities != 3) throw ConfigError(r.path("modalities"), "the dataset provides exactly 3 modalities");
  if (n.dims.back() != 1) throw ConfigError(r.path("dims"), "the last layer must have width 1");
  return n;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Mgcn: return "MGCN";
    case Variant::GgcnOnly: return "GGCN_only";
    case Variant::MrgcnOnly: return "MRGCN_only";
    case Variant::GgcnPlusMrgcn2S: return "GGCN_plus_MRGCN_2S";
    case Variant::GgcnPlusMrgcn4S: return "GGCN_plus_MRGCN_4S";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::Mgcn, Variant::GgcnOnly, Variant::MrgcnOnly, Variant::GgcnPlusMrgcn2S,
                    Variant::GgcnPlusMrgcn4S}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("variant", "unknown variant '" + name + "'");
}

std::array<bool, 4> variant_frozen_modes(Variant variant) {
  if (variant == Variant::GgcnPlusMrgcn4S) return {false, false, false, false};
  return {true, true, false, false};
}

NetworkConfig build_network(Variant variant, const NetworkSpec& spec, std::size_t vertex_count) {
  NetworkConfig net;
  net.modalities = spec.modalities;
  net.degree = spec.degree;
  net.window = kWindowSlots;
  net.basis = spec.basis;
  net.per_vertex_bias = spec.per_vertex_bias;
  net.vertex_count = vertex_count;
  const std::size_t depth = spec.dims.size();
  const std::size_t lower = (depth + 1) / 2;
  std::size_t in = kWindowSlots;
  for (std::size_t l = 0; l < depth; ++l) {
    LayerSpec ls;
    ls.in_features = in;
    ls.out_features = spec.dims[l];
    ls.activation = l + 1 == depth ? Activation::Identity : Activation::ReLU;
    switch (variant) {
      case Variant::Mgcn:
        ls.kind = LayerKind::Mrgcn;
        ls.tensor_prior = false;
        break;
      case Variant::GgcnOnly: ls.kind = LayerKind::Ggcn; break;
      case Variant::MrgcnOnly: ls.kind = LayerKind::Mrgcn; break;
      case Variant::GgcnPlusMrgcn2S:
      case Variant::GgcnPlusMrgcn4S: ls.kind = l < lower ? LayerKind::Ggcn : LayerKind::Mrgcn; break;
    }
    net.layers.push_back(ls);
    in = spec.dims[l];
  }
  checked("network", [&] { net.validate(); });
  return net;
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  ObjectReader r(j, "");
  std::string dataset, output_dir = cfg.output_dir.string(), variant = variant_name(cfg.variant);
  r.read("dataset", dataset);
  r.read("output_dir", output_dir);
  r.read("variant", variant);
  r.read("predict_target_index", cfg.predict_target_index);
  if (const json* v = r.find("network")) cfg.network = parse_network(*v, "network");
  if (const json* v = r.find("train")) cfg.train = parse_train(*v, "train");
  if (const json* v = r.find("analysis")) {
    ObjectReader a(*v, "analysis");
    a.read("off_diagonal_only", cfg.analysis.off_diagonal_only);
    a.read("graph_threshold", cfg.analysis.graph_threshold);
    a.finish();
    if (!(cfg.analysis.graph_threshold >= 0.0)) throw ConfigError("analysis.graph_threshold", "must be nonnegative");
  }
  r.finish();
  if (dataset.empty()) throw ConfigError("dataset", "a dataset manifest path is required");
  if (cfg.predict_target_index < -1) throw ConfigError("predict_target_index", "must be -1 or a valid index");
  cfg.variant = parse_variant(variant);
  // Frozen modes follow the variant; an explicit list is accepted only when it agrees.
  const bool explicit_modes = j.contains("train") && j["train"].contains("reg") &&
                              j["train"]["reg"].contains("frozen_modes");
  if (explicit_modes && cfg.train.reg.frozen_modes != variant_frozen_modes(cfg.variant)) {
    throw ConfigError("train.reg.frozen_modes", "conflicts with variant " + variant_name(cfg.variant));
  }
  cfg.train.reg.frozen_modes = variant_frozen_modes(cfg.variant);
  auto resolve = [&](const std::filesystem::path& p) {
    return std::filesystem::absolute(p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal();
  };
  cfg.dataset = resolve(dataset);
  cfg.output_dir = resolve(output_dir);
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(path.string() + ": malformed JSON: " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json_file(path), path.parent_path());
}

json to_json(const RegularizerConfig& c) {
  return {{"alpha_intra", c.alpha_intra},
          {"alpha_low", c.alpha_low},
          {"alpha_high", c.alpha_high},
          {"epsilon", c.epsilon},
          {"frozen_modes", modes_json(c.frozen_modes)},
          {"flip_flop_form", c.flip_flop_form == FlipFlopForm::Literal ? "literal" : "inverse_mle"},
          {"normalize_covariance", c.normalize_covariance}};
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},   {"batch_size", c.batch_size},
          {"adam_beta1", c.adam_beta1},         {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},             {"max_epochs", c.max_epochs},
          {"patience", c.patience},             {"cov_update_every", c.cov_update_every},
          {"max_steps", c.max_steps},           {"seed", c.seed},
          {"reg", to_json(c.reg)}};
}

json to_json(const RunConfig& c) {
  return {{"dataset", c.dataset.string()},
          {"output_dir", c.output_dir.string()},
          {"variant", variant_name(c.variant)},
          {"network",
           {{"degree", c.network.degree},
            {"modalities", c.network.modalities},
            {"dims", c.network.dims},
            {"basis", basis_name(c.network.basis)},
            {"per_vertex_bias", c.network.per_vertex_bias}}},
          {"train", to_json(c.train)},
          {"predict_target_index", c.predict_target_index},
          {"analysis",
           {{"off_diagonal_only", c.analysis.off_diagonal_only}, {"graph_threshold", c.analysis.graph_threshold}}}};
}

SynthConfig parse_synth_config(const json& j) {
  SynthConfig s;
  ObjectReader r(j, "");
  r.read("grid_rows", s.grid_rows);
  r.read("grid_cols", s.grid_cols);
  r.read("poi_categories", s.poi_categories);
  r.read("weeks", s.weeks);
  r.read("interval_minutes", s.interval_minutes);
  r.read("drift_rate", s.drift_rate);
  r.read("noise_scale", s.noise_scale);
  r.read("seed", s.seed);
  r.read("base_level", s.base_level);
  r.read("smoothing", s.smoothing);
  r.read("ar_coefficient", s.ar_coefficient);
  r.read("transit_share", s.transit_share);
  r.read("latent_zones", s.latent_zones);
  r.finish();
  checked("synth", [&] { s.validate(); });
  return s;
}

SynthConfig load_synth_config(const std::filesystem::path& path) { return parse_synth_config(read_json_file(path)); }

json to_json(const SynthConfig& s) {
  return {{"grid_rows", s.grid_rows},       {"grid_cols", s.grid_cols},
          {"poi_categories", s.poi_categories}, {"weeks", s.weeks},
          {"interval_minutes", s.interval_minutes}, {"drift_rate", s.drift_rate},
          {"noise_scale", s.noise_scale},   {"seed", s.seed},
          {"base_level", s.base_level},     {"smoothing", s.smoothing},
          {"ar_coefficient", s.ar_coefficient}, {"transit_share", s.transit_share}, {"latent_zones", s.latent_zones}};
}

json to_json(const NetworkConfig& c) {
  json layers = json::array();
  for (const auto& l : c.layers) {
    layers.push_back({{"kind", layer_kind_name(l.kind)},
                      {"in_features", l.in_features},
                      {"out_features", l.out_features},
                      {"activation", l.activation == Activation::ReLU ? "relu" : "identity"},
                      {"tensor_prior", l.tensor_prior}});
  }
  return {{"modalities", c.modalities},
          {"degree", c.degree},
          {"window", c.window},
          {"basis", basis_name(c.basis)},
          {"per_vertex_bias", c.per_vertex_bias},
          {"vertex_count", c.vertex_count},
          {"layers", layers}};
}

NetworkConfig network_config_from_json(const json& j) {
  try {
    NetworkConfig c;
    c.modalities = j.at("modalities").get<std::size_t>();
    c.degree = j.at("degree").get<std::size_t>();
    c.window = j.at("window").get<std::size_t>();
    c.basis = parse_basis(j.at("basis").get<std::string>(), "basis");
    c.per_vertex_bias = j.at("per_vertex_bias").get<bool>();
    c.vertex_count = j.at("vertex_count").get<std::size_t>();
    for (const auto& l : j.at("layers")) {
      LayerSpec s;
      const std::string kind = l.at("kind").get<std::string>();
      if (kind == layer_kind_name(LayerKind::Ggcn)) {
        s.kind = LayerKind::Ggcn;
      } else if (kind == layer_kind_name(LayerKind::Mrgcn)) {
        s.kind = LayerKind::Mrgcn;
      } else {
        throw ConfigError("layers.kind", "unknown layer kind '" + kind + "'");
      }
      s.in_features = l.at("in_features").get<std::size_t>();
      s.out_features = l.at("out_features").get<std::size_t>();
      const std::string act = l.at("activation").get<std::string>();
      if (act != "relu" && act != "identity") throw ConfigError("layers.activation", "unknown activation '" + act + "'");
      s.activation = act == "relu" ? Activation::ReLU : Activation::Identity;
      s.tensor_prior = l.at("tensor_prior").get<bool>();
      c.layers.push_back(s);
    }
    checked("net_config", [&] { c.validate(); });
    return c;
  } catch (const json::exception& e) {
    throw ConfigError("net_config", e.what());
  }
}

}  // namespace mmgcn
