#pragma once

#include <string>
#include <vector>

#include "data/transition_store.hpp"

namespace deflow {

struct IavEstimate {
  int k = 0;
  std::vector<double> per_state_variances;
  double iav = 0.0;
};

/// Intrinsic action variance: for every transition, the k nearest other
/// states (Euclidean; ties to the lower index) contribute their actions; the
/// population variance of each action dimension over those k actions is
/// averaged over dimensions, then over all transitions. Exact brute force.
IavEstimate compute_iav(const TransitionStore& store, int k = 5);

enum class TaskClass { fine_manipulation, navigation, expert_quality };

TaskClass task_class_from_string(const std::string& name);
std::string to_string(TaskClass c);

/// Trust-region budget from the action variance of the data.
double delta_from_iav(double iav, TaskClass task_class);

}  // namespace deflow
