#pragma once

#include "fbff/autodiff.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace fbff {

/// Trainable weight plus its optimizer slots.
struct Parameter {
  std::string name;
  ad::Tensor node;
  ad::Matrix first_moment;
  ad::Matrix second_moment;
  ad::Matrix max_second_moment;

  Parameter(std::string n, ad::Matrix init);
  const ad::Matrix& value() const { return node.value(); }
  ad::Matrix& mutable_value() { return node.mutable_value(); }
  const ad::Matrix& grad() const { return node.grad(); }
};

/// Owning registry of parameters with unique names, in registration order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Throws std::invalid_argument on a duplicate name.
  Parameter& add(const std::string& name, ad::Matrix init);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Parameters whose names start with any of the given prefixes.
  std::vector<Parameter*> select(const std::vector<std::string>& prefixes);

  void zero_grad();
  /// Frozen sets build no backward closures when used in a forward pass.
  void set_requires_grad(bool on);
  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

/// Flat text checkpoint: magic header, free-form metadata, then one block per
/// parameter (name, shape, row-major values printed with round-trip precision).
struct Checkpoint {
  static constexpr const char* kMagic = "FBFF-CHECKPOINT";
  static constexpr int kVersion = 1;

  std::map<std::string, std::string> metadata;
  std::map<std::string, ad::Matrix> tensors;

  static Checkpoint capture(const ParameterSet& params);
  /// Copies values into params; every parameter must be present with a
  /// matching shape.
  void restore(ParameterSet& params) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace fbff
