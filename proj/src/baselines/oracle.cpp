#include "qmixdsa/baselines/oracle.hpp"

namespace qmixdsa::baselines {

OracleReport oracle_upper_bound(std::span<const envsim::ChannelState> states,
                                int users) {
  OracleReport report;
  report.idle_counts.reserve(states.size());
  report.max_successes.reserve(states.size());
  for (const auto& s : states) {
    int idle = 0;
    for (auto v : s) idle += v == 1 ? 1 : 0;
    const int cap = std::min(users, idle);
    report.idle_counts.push_back(idle);
    report.max_successes.push_back(cap);
    report.episode_total += cap;
  }
  report.demand_cap = users * static_cast<int>(states.size());
  return report;
}

}  // namespace qmixdsa::baselines
