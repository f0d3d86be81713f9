#include "data/iav.hpp"

#include <algorithm>
#include <queue>
#include <string>
#include <utility>

#include "common/error.hpp"

namespace deflow {

IavEstimate compute_iav(const TransitionStore& store, int k) {
  require(k >= 1, "compute_iav: k must be at least 1");
  const std::size_t n = store.size();
  if (static_cast<std::size_t>(k) >= n) {
    fail(ErrorCode::invalid_argument,
         "compute_iav: k (" + std::to_string(k) + ") must be smaller than the dataset size (" + std::to_string(n) + ")");
  }
  const int sd = store.state_dim();
  const int ad = store.action_dim();
  std::vector<double> states(n * static_cast<std::size_t>(sd));
  for (std::size_t i = 0; i < n; ++i) std::copy_n(store.at(i).state.begin(), sd, states.begin() + i * sd);

  using Candidate = std::pair<double, std::size_t>;  // (squared distance, index); max-heap top = worst kept
  IavEstimate est;
  est.k = k;
  est.per_state_variances.resize(n);
  std::vector<Candidate> heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  std::vector<double> mean(ad);
  for (std::size_t i = 0; i < n; ++i) {
    heap.clear();
    const double* si = &states[i * sd];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double* sj = &states[j * sd];
      double d = 0.0;
      for (int c = 0; c < sd; ++c) {
        const double diff = si[c] - sj[c];
        d += diff * diff;
      }
      const Candidate cand{d, j};
      if (heap.size() < static_cast<std::size_t>(k)) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    std::sort(heap.begin(), heap.end());

    std::fill(mean.begin(), mean.end(), 0.0);
    for (const Candidate& c : heap) {
      const auto& a = store.at(c.second).action;
      for (int d = 0; d < ad; ++d) mean[d] += a[d];
    }
    for (int d = 0; d < ad; ++d) mean[d] /= k;
    double var_sum = 0.0;
    for (int d = 0; d < ad; ++d) {
      double v = 0.0;
      for (const Candidate& c : heap) {
        const double diff = store.at(c.second).action[d] - mean[d];
        v += diff * diff;
      }
      var_sum += v / k;
    }
    est.per_state_variances[i] = var_sum / ad;
  }
  double total = 0.0;
  for (double v : est.per_state_variances) total += v;
  est.iav = total / static_cast<double>(n);
  return est;
}

TaskClass task_class_from_string(const std::string& name) {
  if (name == "fine_manipulation") return TaskClass::fine_manipulation;
  if (name == "navigation") return TaskClass::navigation;
  if (name == "expert_quality") return TaskClass::expert_quality;
  fail(ErrorCode::invalid_argument,
       "unknown task_class '" + name + "' (expected fine_manipulation, navigation or expert_quality)");
}

std::string to_string(TaskClass c) {
  switch (c) {
    case TaskClass::fine_manipulation:
      return "fine_manipulation";
    case TaskClass::navigation:
      return "navigation";
    case TaskClass::expert_quality:
      return "expert_quality";
  }
  return "navigation";
}

double delta_from_iav(double iav, TaskClass task_class) {
  require(iav >= 0.0, "delta_from_iav: iav must be non-negative");
  switch (task_class) {
    case TaskClass::fine_manipulation:
      return 0.1 * iav;
    case TaskClass::navigation:
      return 1.0 * iav;
    case TaskClass::expert_quality:
      return 1e-3;
  }
  return iav;
}

}  // namespace deflow
