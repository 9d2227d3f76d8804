#include "fbff/envs/failure.hpp"

#include <stdexcept>

namespace fbff::envs {

SensingFailure::SensingFailure(std::vector<Eigen::Index> frozen, RegionPredicate predicate)
    : frozen_(std::move(frozen)), predicate_(std::move(predicate)) {
  if (!predicate_) throw std::invalid_argument("sensing failure needs a predicate");
}

Vector SensingFailure::reset(const Vector& true_observation) {
  last_good_ = true_observation;
  active_ = false;
  return apply(true_observation);
}

Vector SensingFailure::apply(const Vector& true_observation) {
  if (last_good_.size() != true_observation.size()) last_good_ = true_observation;
  active_ = predicate_(true_observation);
  Vector out = true_observation;
  if (active_) {
    for (Eigen::Index i : frozen_) out(i) = last_good_(i);
  } else {
    last_good_ = true_observation;
  }
  return out;
}

RegionPredicate left_of(Eigen::Index x_index, double threshold) {
  return [x_index, threshold](const Vector& obs) { return obs(x_index) < threshold; };
}

FailureWrapper::FailureWrapper(std::unique_ptr<Environment> inner, SensingFailure failure)
    : inner_(std::move(inner)), failure_(std::move(failure)) {}

Vector FailureWrapper::reset() {
  true_obs_ = inner_->reset();
  return failure_.reset(true_obs_);
}

StepResult FailureWrapper::step(const Vector& action) {
  StepResult r = inner_->step(action);
  true_obs_ = r.observation;
  r.observation = failure_.apply(true_obs_);
  return r;
}

}  // namespace fbff::envs
