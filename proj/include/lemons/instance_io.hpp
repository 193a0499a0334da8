#pragma once

#include "lemons/market.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>

namespace lemons {

/// Contents of an instance file. Continuum primitives and atoms are both optional, but at
/// least one must be present.
struct InstanceFile {
  std::string name;
  std::optional<MarketInstance> market;
  std::optional<PiecewisePoly> weight;
  std::optional<AtomMarket> atoms;
  /// Optional reference signal on the atoms: realizations and joint masses (rows = types).
  std::optional<Eigen::VectorXd> signal_means;
  std::optional<Eigen::MatrixXd> signal_masses;
};

/// Parses `key = value` lines. Numbers are decimal literals or `p/q` fractions separated by
/// commas; polynomial pieces are separated by `;` and list coefficients from the constant term up.
InstanceFile parse_instance(const std::string& text, const std::string& source = "<string>");
InstanceFile load_instance(const std::filesystem::path& path);

/// Weight mini-language: `const:<v>`, `poly:<c0,c1,...>`, `piecewise:<file>`.
PiecewisePoly parse_weight_spec(const std::string& spec, const std::filesystem::path& base_dir = {});

/// Parses one number, accepting `p/q`.
double parse_number(const std::string& token);

}  // namespace lemons
