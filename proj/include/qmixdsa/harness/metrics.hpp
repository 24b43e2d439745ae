#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "qmixdsa/qmixcore/trainer.hpp"

namespace qmixdsa::harness {

// One metrics line per episode. success_rate = successes / (N*T).
struct MetricsRow {
  int epoch = 0;
  long episode = 0;  // global 1-based index over the run
  int successes = 0;
  int collisions = 0;
  int silent = 0;
  int reward = 0;
  double success_rate = 0.0;
  int oracle_bound = 0;
  double epsilon = 0.0;
  double mean_loss = 0.0;
  bool eval = false;
};

inline constexpr const char* kMetricsHeader =
    "epoch,episode,successes,collisions,silent,reward,success_rate,"
    "oracle_bound,epsilon,mean_loss,eval";

MetricsRow make_row(int epoch, long episode, const qmixcore::EpisodeStats& s,
                    int agents, int slots, double mean_loss, bool eval);

std::string format_row(const MetricsRow& row);

class MetricsWriter {
 public:
  // append continues an existing file (no new header) when it is non-empty.
  explicit MetricsWriter(const std::string& path, bool append = false);

  void write(const MetricsRow& row);
  void flush();
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

// Parses a metrics CSV produced by MetricsWriter. Malformed input raises
// DataError citing the 1-based file line.
std::vector<MetricsRow> load_metrics(const std::string& path);

}  // namespace qmixdsa::harness
