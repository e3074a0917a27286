#include "optochain/scenario_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "optochain/quantity.hpp"

namespace optochain {

namespace {

using nlohmann::ordered_json;

struct KindName {
  ScenarioKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {ScenarioKind::EquilibriumBranch, "equilibrium_branch"},
    {ScenarioKind::CoolingMap, "cooling_map"},
    {ScenarioKind::ResonanceAnalysis, "resonance_analysis"},
    {ScenarioKind::ScalingStudy, "scaling_study"},
    {ScenarioKind::KinkSpectroscopy, "kink_spectroscopy"},
};

void require_keys(const YAML::Node& node, const std::string& where, std::set<std::string> allowed) {
  if (!node.IsMap()) throw ConfigError("'" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in '" + where + "'");
  }
}

std::string scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError("'" + key + "' must be a scalar");
  return node.as<std::string>();
}

template <typename T>
T number(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' must be a plain number");
  }
}

double frequency(const YAML::Node& node, const std::string& key, std::optional<double> kappa) {
  return parse_quantity(scalar(node, key), Dimension::Frequency, kappa);
}

Axis read_axis(const YAML::Node& node, const std::string& where, double kappa, Axis axis) {
  require_keys(node, where, {"min", "max", "count", "spacing"});
  if (node["min"]) axis.min = frequency(node["min"], where + ".min", kappa) / kappa;
  if (node["max"]) axis.max = frequency(node["max"], where + ".max", kappa) / kappa;
  if (node["count"]) axis.count = number<int>(node["count"], where + ".count");
  if (node["spacing"]) {
    const auto s = scalar(node["spacing"], where + ".spacing");
    if (s != "log" && s != "linear") throw ConfigError(where + ".spacing must be 'log' or 'linear'");
    axis.log = s == "log";
  }
  return axis;
}

void read_physical(const YAML::Node& node, PhysicalConfig& c) {
  require_keys(node, "physical",
               {"ion_mass", "ion_charge", "wavelength", "kappa", "trap_freq", "pump_strength", "cavity_detuning",
                "atom_detuning", "vacuum_rabi", "u0", "n_ions", "cavity_offset"});
  if (node["vacuum_rabi"] && node["u0"]) throw ConfigError("give either physical.vacuum_rabi or physical.u0");
  if (node["kappa"]) c.kappa = frequency(node["kappa"], "kappa", std::nullopt);
  const std::optional<double> kappa = c.kappa > 0 ? std::optional<double>(c.kappa) : std::nullopt;
  if (node["ion_mass"]) c.ion_mass = parse_quantity(scalar(node["ion_mass"], "ion_mass"), Dimension::Mass);
  if (node["ion_charge"]) c.ion_charge = number<int>(node["ion_charge"], "ion_charge");
  if (node["wavelength"]) c.wavelength = parse_quantity(scalar(node["wavelength"], "wavelength"), Dimension::Length);
  if (node["trap_freq"]) c.trap_freq = frequency(node["trap_freq"], "trap_freq", kappa);
  if (node["pump_strength"]) c.pump_strength = frequency(node["pump_strength"], "pump_strength", kappa);
  if (node["cavity_detuning"]) c.cavity_detuning = frequency(node["cavity_detuning"], "cavity_detuning", kappa);
  if (node["atom_detuning"]) c.atom_detuning = frequency(node["atom_detuning"], "atom_detuning", kappa);
  if (node["vacuum_rabi"]) c.vacuum_rabi = frequency(node["vacuum_rabi"], "vacuum_rabi", kappa);
  if (node["u0"]) {
    const double u0 = frequency(node["u0"], "u0", kappa);
    if (c.atom_detuning == 0) throw ConfigError("physical.u0 needs physical.atom_detuning");
    if (u0 != 0 && (u0 > 0) != (c.atom_detuning > 0)) {
      throw ConfigError("physical.u0 must have the sign of physical.atom_detuning");
    }
    c.vacuum_rabi = std::sqrt(std::abs(u0 * c.atom_detuning));
  }
  if (node["n_ions"]) c.n_ions = number<int>(node["n_ions"], "n_ions");
  if (node["cavity_offset"]) {
    c.cavity_offset = parse_quantity(scalar(node["cavity_offset"], "cavity_offset"), Dimension::Length);
  }
}

ordered_json axis_json(const Axis& a) {
  return ordered_json{{"min", a.min}, {"max", a.max}, {"count", a.count}, {"spacing", a.log ? "log" : "linear"}};
}

const char* selector_name(ModeSelector s) {
  switch (s) {
    case ModeSelector::Lowest:
      return "lowest";
    case ModeSelector::Highest:
      return "highest";
    case ModeSelector::BandCenter:
      return "band_center";
    case ModeSelector::Index:
      return "index";
  }
  return "band_center";
}

ModeSelector selector_from(const std::string& s) {
  for (ModeSelector m : {ModeSelector::Lowest, ModeSelector::Highest, ModeSelector::BandCenter, ModeSelector::Index}) {
    if (s == selector_name(m)) return m;
  }
  throw ConfigError("unknown resonance mode '" + s + "'");
}

}  // namespace

const char* to_string(ScenarioKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

ScenarioKind scenario_from_string(const std::string& name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

std::vector<double> Axis::values() const {
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : double(i) / double(count - 1);
    v[i] = log ? min * std::pow(max / min, f) : min + (max - min) * f;
  }
  if (count > 1) {
    v.front() = min;
    v.back() = max;
  }
  return v;
}

void validate(const ScenarioConfig& c) {
  try {
    validate(c.physical);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("physical: ") + e.what());
  }
  auto check_axis = [](const Axis& a, const char* name) {
    if (a.count < 2) throw ConfigError(std::string(name) + ".count must be at least 2");
    if (!std::isfinite(a.min) || !std::isfinite(a.max)) throw ConfigError(std::string(name) + " range must be finite");
    if (!(a.max > a.min)) throw ConfigError(std::string(name) + ".max must exceed min");
    if (a.log && !(a.min > 0)) throw ConfigError(std::string(name) + " log spacing needs min > 0");
  };
  check_axis(c.eta, "sweep.eta");
  if (c.eta.min < 0) throw ConfigError("sweep.eta must be non-negative");
  if (c.delta_c) check_axis(*c.delta_c, "sweep.delta_c");
  check_axis(c.nu, "spectrum.nu");
  if (c.scenario == ScenarioKind::CoolingMap && !c.delta_c) throw ConfigError("cooling_map needs sweep.delta_c");
  if (c.scenario == ScenarioKind::KinkSpectroscopy && !c.delta_c) {
    throw ConfigError("kink_spectroscopy needs sweep.delta_c");
  }
  if (c.scenario == ScenarioKind::ResonanceAnalysis && c.resonance_variable == SweepVariable::DeltaC && !c.delta_c) {
    throw ConfigError("resonance.variable delta_c needs sweep.delta_c");
  }
  if (c.scenario == ScenarioKind::ScalingStudy) {
    if (c.scaling.sizes.empty()) throw ConfigError("scaling.sizes must not be empty");
    for (int n : c.scaling.sizes) {
      if (n < 2) throw ConfigError("scaling.sizes entries must be at least 2");
    }
    if (c.scaling.reference_n < 2) throw ConfigError("scaling.reference_n must be at least 2");
  }
  if (c.physical.n_ions < 2) throw ConfigError("physical.n_ions must be at least 2");
  if (c.target.selector == ModeSelector::Index && c.target.index < 0) {
    throw ConfigError("resonance.index must be non-negative");
  }
  if (!(c.chi_threshold >= 0)) throw ConfigError("chi_threshold must be non-negative");
  if (!(c.phonon_noise.damping >= 0) || !(c.phonon_noise.thermal >= 0)) {
    throw ConfigError("noise parameters must be non-negative");
  }
  for (double s : c.snapshots) {
    if (!std::isfinite(s)) throw ConfigError("snapshots must be finite");
    if (c.scenario != ScenarioKind::KinkSpectroscopy && !(s >= 0)) throw ConfigError("eta snapshots must be >= 0");
  }
}

ScenarioConfig preset_config(const std::string& name, ScenarioKind kind) {
  ScenarioConfig c;
  c.scenario = kind;
  if (name == "sec3c") {
    c.physical = preset_bulk_cooling();
    c.nu = {-15.0, 15.0, 3001, false};
    c.target = {ModeSelector::BandCenter, 0};
    switch (kind) {
      case ScenarioKind::EquilibriumBranch:
        c.snapshots = {1.5, 55.0, 300.0};
        break;
      case ScenarioKind::CoolingMap:
        c.delta_c = Axis{-12.0, -1.0, 23, false};
        break;
      case ScenarioKind::ResonanceAnalysis:
        c.snapshots = {250.0, 300.0};
        break;
      case ScenarioKind::ScalingStudy:
        c.scaling = {{11, 51, 81}, 11, ScalingHold::Eta};
        break;
      case ScenarioKind::KinkSpectroscopy:
        c.delta_c = Axis{-12.0, -4.0, 200, false};
        c.snapshots = {-8.5};
        c.target = {ModeSelector::Lowest, 0};
        break;
    }
  } else if (name == "sec4") {
    c.physical = preset_kink_spectroscopy();
    c.nu = {-40.0, 40.0, 4001, false};
    c.target = {ModeSelector::Lowest, 0};
    switch (kind) {
      case ScenarioKind::EquilibriumBranch:
        c.snapshots = {200.0};
        break;
      case ScenarioKind::CoolingMap:
        c.delta_c = Axis{-5.0, -0.5, 19, false};
        break;
      case ScenarioKind::ResonanceAnalysis:
        c.snapshots = {200.0};
        break;
      case ScenarioKind::ScalingStudy:
        c.scaling = {{11, 51, 81}, 11, ScalingHold::Eta};
        break;
      case ScenarioKind::KinkSpectroscopy:
        c.delta_c = Axis{-4.0, -1.0, 200, false};
        c.snapshots = {-1.8};
        break;
    }
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected sec3c or sec4)");
  }
  return c;
}

ScenarioConfig parse_config(const std::string& text, std::optional<ScenarioKind> requested) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("configuration must be a mapping");
  try {
    require_keys(root, "config",
                 {"scenario", "preset", "physical", "sweep", "snapshots", "spectrum", "scaling", "resonance", "noise",
                  "chi_threshold", "seed", "outputs"});
    ScenarioKind kind = requested.value_or(ScenarioKind::EquilibriumBranch);
    if (root["scenario"]) {
      kind = scenario_from_string(scalar(root["scenario"], "scenario"));
      if (requested && *requested != kind) {
        throw ConfigError(std::string("config is for scenario '") + to_string(kind) + "' but '" +
                          to_string(*requested) + "' was requested");
      }
    }
    ScenarioConfig c;
    if (root["preset"]) {
      c = preset_config(scalar(root["preset"], "preset"), kind);
    } else {
      c.scenario = kind;
      c.physical = PhysicalConfig{};
      c.physical.ion_charge = 1;
    }
    if (root["physical"]) read_physical(root["physical"], c.physical);
    if (!(c.physical.kappa > 0)) throw ConfigError("physical.kappa is required");
    const double kappa = c.physical.kappa;

    if (const auto sweep = root["sweep"]) {
      require_keys(sweep, "sweep", {"eta", "delta_c"});
      if (sweep["eta"]) c.eta = read_axis(sweep["eta"], "sweep.eta", kappa, c.eta);
      if (sweep["delta_c"]) {
        c.delta_c = read_axis(sweep["delta_c"], "sweep.delta_c", kappa, c.delta_c.value_or(Axis{0, 0, 0, false}));
      }
    }
    if (const auto snaps = root["snapshots"]) {
      if (!snaps.IsSequence()) throw ConfigError("'snapshots' must be a list");
      c.snapshots.clear();
      for (const auto& s : snaps) c.snapshots.push_back(frequency(s, "snapshots", kappa) / kappa);
    }
    if (const auto spec = root["spectrum"]) {
      require_keys(spec, "spectrum", {"nu"});
      if (spec["nu"]) c.nu = read_axis(spec["nu"], "spectrum.nu", kappa, c.nu);
    }
    if (const auto sc = root["scaling"]) {
      require_keys(sc, "scaling", {"sizes", "reference_n", "hold"});
      if (sc["sizes"]) {
        if (!sc["sizes"].IsSequence()) throw ConfigError("scaling.sizes must be a list");
        c.scaling.sizes.clear();
        for (const auto& n : sc["sizes"]) c.scaling.sizes.push_back(number<int>(n, "scaling.sizes"));
      }
      if (sc["reference_n"]) c.scaling.reference_n = number<int>(sc["reference_n"], "scaling.reference_n");
      if (sc["hold"]) {
        const auto h = scalar(sc["hold"], "scaling.hold");
        if (h != "eta" && h != "depth") throw ConfigError("scaling.hold must be 'eta' or 'depth'");
        c.scaling.hold = h == "eta" ? ScalingHold::Eta : ScalingHold::Depth;
      }
    }
    if (const auto rs = root["resonance"]) {
      require_keys(rs, "resonance", {"mode", "index", "variable"});
      if (rs["mode"]) c.target.selector = selector_from(scalar(rs["mode"], "resonance.mode"));
      if (rs["index"]) c.target.index = number<int>(rs["index"], "resonance.index");
      if (rs["variable"]) {
        const auto v = scalar(rs["variable"], "resonance.variable");
        if (v != "eta" && v != "delta_c") throw ConfigError("resonance.variable must be 'eta' or 'delta_c'");
        c.resonance_variable = v == "eta" ? SweepVariable::Eta : SweepVariable::DeltaC;
      }
    }
    if (const auto nz = root["noise"]) {
      require_keys(nz, "noise", {"phonon_damping", "phonon_thermal"});
      if (nz["phonon_damping"]) c.phonon_noise.damping = frequency(nz["phonon_damping"], "phonon_damping", kappa) / kappa;
      if (nz["phonon_thermal"]) c.phonon_noise.thermal = number<double>(nz["phonon_thermal"], "phonon_thermal");
    }
    if (root["chi_threshold"]) c.chi_threshold = frequency(root["chi_threshold"], "chi_threshold", kappa) / kappa;
    if (root["seed"]) c.seed = number<std::uint64_t>(root["seed"], "seed");
    if (const auto out = root["outputs"]) {
      require_keys(out, "outputs", {"covariance"});
      if (out["covariance"]) c.covariance_dump = number<bool>(out["covariance"], "outputs.covariance");
    }
    validate(c);
    return c;
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML: ") + e.what());
  }
}

ScenarioConfig load_config(const std::string& path, std::optional<ScenarioKind> kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), kind);
}

std::string canonical_json(const ScenarioConfig& c) {
  const PhysicalConfig& p = c.physical;
  ordered_json j;
  j["scenario"] = to_string(c.scenario);
  j["physical"] = ordered_json{{"ion_mass_u", p.ion_mass},
                               {"ion_charge", p.ion_charge},
                               {"wavelength_m", p.wavelength},
                               {"kappa_rad_s", p.kappa},
                               {"trap_freq_rad_s", p.trap_freq},
                               {"pump_strength_rad_s", p.pump_strength},
                               {"cavity_detuning_rad_s", p.cavity_detuning},
                               {"atom_detuning_rad_s", p.atom_detuning},
                               {"vacuum_rabi_rad_s", p.vacuum_rabi},
                               {"n_ions", p.n_ions},
                               {"cavity_offset_m", p.cavity_offset}};
  j["sweep"]["eta"] = axis_json(c.eta);
  j["sweep"]["delta_c"] = c.delta_c ? axis_json(*c.delta_c) : ordered_json(nullptr);
  j["snapshots"] = c.snapshots;
  j["spectrum"]["nu"] = axis_json(c.nu);
  j["scaling"] = ordered_json{{"sizes", c.scaling.sizes},
                              {"reference_n", c.scaling.reference_n},
                              {"hold", c.scaling.hold == ScalingHold::Eta ? "eta" : "depth"}};
  j["resonance"] = ordered_json{{"mode", selector_name(c.target.selector)},
                                {"index", c.target.index},
                                {"variable", c.resonance_variable == SweepVariable::Eta ? "eta" : "delta_c"}};
  j["noise"] = ordered_json{{"phonon_damping_kappa", c.phonon_noise.damping}, {"phonon_thermal", c.phonon_noise.thermal}};
  j["chi_threshold_kappa"] = c.chi_threshold;
  j["seed"] = c.seed;
  j["outputs"] = ordered_json{{"covariance", c.covariance_dump}};
  return j.dump(2);
}

std::string config_hash(const ScenarioConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical_json(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace optochain
