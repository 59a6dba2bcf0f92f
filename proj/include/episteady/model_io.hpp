#pragma once

#include "episteady/mdp.hpp"
#include "episteady/policy_gradient.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace episteady {

/// Malformed or inconsistent model text. Line and column are 1-based; 0 means unknown.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& message, int line, int column);

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

  private:
    int line_;
    int column_;
};

/// Rows and initial distributions within this distance of summing to one are renormalized
/// with a warning; anything further off is rejected.
inline constexpr double kParseRowTolerance = 1e-9;

struct ModelDocument {
    Mdp model;
    std::vector<std::string> warnings;
    std::map<std::string, std::string> metadata; // scalar entries of the optional `metadata` map
};

/// YAML or JSON text. Transition maps may use the action key "*" for a row shared by all
/// actions; an explicit action entry overrides it.
ModelDocument parse_model(std::string_view text);
ModelDocument load_model(const std::filesystem::path& path);

/// Probabilities, rewards and discounts are written with 17 significant digits, so
/// parse_model(write_model(m)).model == m.
std::string write_model(const Mdp& m, const std::map<std::string, std::string>& metadata = {});
void save_model(const std::filesystem::path& path, const Mdp& m,
                const std::map<std::string, std::string>& metadata = {});

/// Map state -> action -> probability. States that are omitted get the uniform row.
TabularPolicy parse_policy(std::string_view text, const Mdp& m);
TabularPolicy load_policy(const std::filesystem::path& path, const Mdp& m);

/// Map state -> action -> logit. Omitted entries are zero.
SoftmaxPolicy parse_theta(std::string_view text, const Mdp& m);
SoftmaxPolicy load_theta(const std::filesystem::path& path, const Mdp& m);

} // namespace episteady
