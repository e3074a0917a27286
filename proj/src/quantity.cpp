#include "optochain/quantity.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>

#include "optochain/core_model.hpp"
#include "optochain/errors.hpp"

namespace optochain {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

const std::map<std::string, double>& units(Dimension d) {
  constexpr double two_pi = 2.0 * codata::pi;
  static const std::map<std::string, double> frequency = {
      {"Hz", two_pi},         {"kHz", two_pi * 1e3},  {"MHz", two_pi * 1e6},   {"GHz", two_pi * 1e9},
      {"THz", two_pi * 1e12}, {"rad/s", 1.0},         {"krad/s", 1e3},         {"Mrad/s", 1e6},
      {"Grad/s", 1e9}};
  static const std::map<std::string, double> length = {
      {"m", 1.0}, {"cm", 1e-2}, {"mm", 1e-3}, {"um", 1e-6}, {"\xC2\xB5m", 1e-6}, {"\xCE\xBCm", 1e-6},
      {"nm", 1e-9}, {"pm", 1e-12}};
  static const std::map<std::string, double> mass = {
      {"u", 1.0}, {"amu", 1.0}, {"Da", 1.0}, {"kg", 1.0 / codata::atomic_mass}};
  switch (d) {
    case Dimension::Frequency:
      return frequency;
    case Dimension::Length:
      return length;
    case Dimension::Mass:
      return mass;
  }
  return frequency;
}

}  // namespace

double parse_quantity(const std::string& raw, Dimension dimension, std::optional<double> kappa) {
  const std::string text = trim(raw);
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || !std::isfinite(value)) throw ConfigError("cannot read a number from '" + raw + "'");
  const std::string unit = trim(std::string(end));
  if (unit.empty()) throw ConfigError("'" + raw + "' needs an explicit unit");

  if (dimension == Dimension::Frequency && (unit == "kappa" || unit == "\xCE\xBA")) {
    if (!kappa) throw ConfigError("'" + raw + "' is in units of kappa but kappa is not set");
    return value * *kappa;
  }
  const auto& table = units(dimension);
  const auto it = table.find(unit);
  if (it == table.end()) throw ConfigError("unknown unit '" + unit + "' in '" + raw + "'");
  return value * it->second;
}

}  // namespace optochain
