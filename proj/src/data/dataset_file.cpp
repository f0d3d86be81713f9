#include "data/dataset_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "common/error.hpp"

namespace deflow {

std::string format_double(double v) {
  require(std::isfinite(v), "format_double: non-finite value");
  // "-0" would parse back as the integer 0 and lose the sign.
  if (v == 0.0) return std::signbit(v) ? "-0.0" : "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void append_values(std::string& line, const std::vector<double>& values) {
  for (double v : values) {
    line += format_double(v);
    line += ',';
  }
}

}  // namespace

void write_dataset(const TransitionStore& store, std::ostream& out) {
  out << "{\"state_dim\":" << store.state_dim() << ",\"action_dim\":" << store.action_dim() << "}\n";
  std::string line;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Transition& t = store.at(i);
    line.assign("[");
    append_values(line, t.state);
    append_values(line, t.action);
    line += format_double(t.reward);
    line += ',';
    append_values(line, t.next_state);
    line += t.terminal ? "1]\n" : "0]\n";
    out << line;
  }
  if (!out) fail(ErrorCode::io, "write_dataset: stream write failed");
}

void write_dataset(const TransitionStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  write_dataset(store, out);
  out.close();
  if (!out) fail(ErrorCode::io, "failed writing '" + path + "'");
}

TransitionStore read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::parse, "dataset line 1: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, std::string("dataset line 1: malformed header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("state_dim") || !header.contains("action_dim") ||
      !header["state_dim"].is_number_integer() || !header["action_dim"].is_number_integer()) {
    fail(ErrorCode::parse, "dataset line 1: header needs integer state_dim and action_dim");
  }
  const int sd = header["state_dim"].get<int>();
  const int ad = header["action_dim"].get<int>();
  if (sd <= 0 || ad <= 0) fail(ErrorCode::parse, "dataset line 1: dimensions must be positive");
  TransitionStore store(sd, ad);
  const std::size_t width = static_cast<std::size_t>(2 * sd + ad + 2);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "dataset line " + std::to_string(line_no) + ": ";
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, where + "malformed row: " + e.what());
    }
    if (!row.is_array()) fail(ErrorCode::parse, where + "row is not a JSON array");
    if (row.size() != width) {
      fail(ErrorCode::shape_mismatch, where + "expected " + std::to_string(width) + " values for state_dim " +
                                          std::to_string(sd) + ", action_dim " + std::to_string(ad) + ", got " +
                                          std::to_string(row.size()));
    }
    std::vector<double> v(width);
    for (std::size_t j = 0; j < width; ++j) {
      if (!row[j].is_number()) fail(ErrorCode::parse, where + "non-numeric value at column " + std::to_string(j));
      v[j] = row[j].get<double>();
      if (!std::isfinite(v[j])) fail(ErrorCode::parse, where + "non-finite value");
    }
    const double term = v[width - 1];
    if (term != 0.0 && term != 1.0) fail(ErrorCode::parse, where + "terminal flag must be 0 or 1");
    Transition t;
    t.state.assign(v.begin(), v.begin() + sd);
    t.action.assign(v.begin() + sd, v.begin() + sd + ad);
    t.reward = v[static_cast<std::size_t>(sd + ad)];
    t.next_state.assign(v.begin() + sd + ad + 1, v.begin() + 2 * sd + ad + 1);
    t.terminal = term == 1.0;
    store.push(std::move(t));
  }
  return store;
}

TransitionStore read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open dataset '" + path + "'");
  return read_dataset(in);
}

}  // namespace deflow
