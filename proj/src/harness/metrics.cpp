#include "qmixdsa/harness/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "qmixdsa/error.hpp"

namespace qmixdsa::harness {

MetricsRow make_row(int epoch, long episode, const qmixcore::EpisodeStats& s,
                    int agents, int slots, double mean_loss, bool eval) {
  MetricsRow row;
  row.epoch = epoch;
  row.episode = episode;
  row.successes = s.successes;
  row.collisions = s.collisions;
  row.silent = s.silent;
  row.reward = s.total_reward;
  row.success_rate =
      static_cast<double>(s.successes) / (static_cast<double>(agents) * slots);
  row.oracle_bound = s.oracle_bound;
  row.epsilon = s.epsilon;
  row.mean_loss = mean_loss;
  row.eval = eval;
  return row;
}

std::string format_row(const MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%ld,%d,%d,%d,%d,%.6f,%d,%.6f,%.9g,%d",
                row.epoch, row.episode, row.successes, row.collisions,
                row.silent, row.reward, row.success_rate, row.oracle_bound,
                row.epsilon, row.mean_loss, row.eval ? 1 : 0);
  return buf;
}

MetricsWriter::MetricsWriter(const std::string& path, bool append)
    : path_(path) {
  bool continue_existing = false;
  if (append) {
    std::ifstream probe(path, std::ios::binary);
    continue_existing = probe.good() && probe.peek() != std::ifstream::traits_type::eof();
  }
  out_.open(path, std::ios::binary |
                      (continue_existing ? std::ios::app : std::ios::trunc));
  if (!out_) throw DataError("cannot open metrics file for writing: " + path);
  if (!continue_existing) out_ << kMetricsHeader << "\n";
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << format_row(row) << "\n";
  if (!out_) throw DataError("failed writing metrics file: " + path_);
}

void MetricsWriter::flush() { out_.flush(); }

std::vector<MetricsRow> load_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("metrics file is empty: " + path);
  if (line != kMetricsHeader) {
    throw DataError("metrics line 1: unexpected header");
  }
  std::vector<MetricsRow> rows;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 11) {
      throw DataError("metrics line " + std::to_string(line_number) +
                      ": expected 11 fields, got " +
                      std::to_string(fields.size()));
    }
    try {
      MetricsRow row;
      row.epoch = std::stoi(fields[0]);
      row.episode = std::stol(fields[1]);
      row.successes = std::stoi(fields[2]);
      row.collisions = std::stoi(fields[3]);
      row.silent = std::stoi(fields[4]);
      row.reward = std::stoi(fields[5]);
      row.success_rate = std::stod(fields[6]);
      row.oracle_bound = std::stoi(fields[7]);
      row.epsilon = std::stod(fields[8]);
      row.mean_loss = std::stod(fields[9]);
      row.eval = std::stoi(fields[10]) != 0;
      rows.push_back(row);
    } catch (const std::exception&) {
      throw DataError("metrics line " + std::to_string(line_number) +
                      ": malformed field");
    }
  }
  return rows;
}

}  // namespace qmixdsa::harness
