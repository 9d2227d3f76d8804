#pragma once

#include "fbff/envs/environment.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace fbff::envs {

using RegionPredicate = std::function<bool(const Vector& true_observation)>;

/// Sensing failure: while the predicate holds on the true observation, the
/// selected entries are replaced by their last values from before the
/// failure began. Other entries pass through.
class SensingFailure {
 public:
  SensingFailure(std::vector<Eigen::Index> frozen, RegionPredicate predicate);

  /// Call with the first observation of an episode.
  Vector reset(const Vector& true_observation);
  Vector apply(const Vector& true_observation);
  bool active() const { return active_; }

 private:
  std::vector<Eigen::Index> frozen_;
  RegionPredicate predicate_;
  Vector last_good_;
  bool active_ = false;
};

/// Predicate "x < threshold" on a given observation index.
RegionPredicate left_of(Eigen::Index x_index, double threshold);

/// Environment decorator applying a SensingFailure to every observation.
class FailureWrapper : public Environment {
 public:
  FailureWrapper(std::unique_ptr<Environment> inner, SensingFailure failure);

  Vector reset() override;
  StepResult step(const Vector& action) override;

  bool failure_active() const { return failure_.active(); }
  const Vector& true_observation() const { return true_obs_; }
  Environment& inner() { return *inner_; }

  Eigen::Index observation_dim() const override { return inner_->observation_dim(); }
  Eigen::Index action_dim() const override { return inner_->action_dim(); }
  std::string name() const override { return inner_->name(); }
  std::vector<std::string> observation_labels() const override {
    return inner_->observation_labels();
  }
  Vector applied_action(const Vector& action) const override {
    return inner_->applied_action(action);
  }
  int max_steps() const override { return inner_->max_steps(); }

 private:
  std::unique_ptr<Environment> inner_;
  SensingFailure failure_;
  Vector true_obs_;
};

}  // namespace fbff::envs
