#include "selfcal/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace selfcal {

InterconnectionStrategy::InterconnectionStrategy(int antenna_count, int reference)
    : antenna_count_(antenna_count), reference_(reference) {
  if (antenna_count < 2)
    throw StructuralError("antenna count must be at least 2, got " +
                          std::to_string(antenna_count));
  if (reference < 1 || reference > antenna_count)
    throw StructuralError("reference antenna " + std::to_string(reference) +
                          " out of range [1," + std::to_string(antenna_count) + "]");
  adjacency_.assign(static_cast<std::size_t>(antenna_count) * antenna_count, 0);
}

void InterconnectionStrategy::check_index(int m) const {
  if (m < 1 || m > antenna_count_)
    throw StructuralError("antenna index " + std::to_string(m) + " out of range [1," +
                          std::to_string(antenna_count_) + "]");
}

bool InterconnectionStrategy::connected(int p, int q) const {
  check_index(p);
  check_index(q);
  return adjacency_[static_cast<std::size_t>(p - 1) * antenna_count_ + (q - 1)] != 0;
}

void InterconnectionStrategy::set_edge(int p, int q) {
  check_index(p);
  check_index(q);
  if (p == q) throw StructuralError("self-loop on antenna " + std::to_string(p));
  adjacency_[static_cast<std::size_t>(p - 1) * antenna_count_ + (q - 1)] = 1;
  adjacency_[static_cast<std::size_t>(q - 1) * antenna_count_ + (p - 1)] = 1;
}

void InterconnectionStrategy::clear_edge(int p, int q) {
  check_index(p);
  check_index(q);
  adjacency_[static_cast<std::size_t>(p - 1) * antenna_count_ + (q - 1)] = 0;
  adjacency_[static_cast<std::size_t>(q - 1) * antenna_count_ + (p - 1)] = 0;
}

int InterconnectionStrategy::edge_count() const {
  int sum = 0;
  for (std::uint8_t v : adjacency_) sum += v;
  return sum / 2;
}

std::vector<std::pair<int, int>> InterconnectionStrategy::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int p = 1; p <= antenna_count_; ++p)
    for (int q = p + 1; q <= antenna_count_; ++q)
      if (connected(p, q)) out.emplace_back(p, q);
  return out;
}

std::vector<int> InterconnectionStrategy::neighbors(int m) const {
  check_index(m);
  std::vector<int> out;
  for (int q = 1; q <= antenna_count_; ++q)
    if (q != m && connected(m, q)) out.push_back(q);
  return out;
}

int InterconnectionStrategy::degree(int m) const {
  return static_cast<int>(neighbors(m).size());
}

CalibrationPathTable::CalibrationPathTable(int antenna_count, int reference,
                                           std::vector<int> depth, std::vector<int> parent)
    : antenna_count_(antenna_count),
      reference_(reference),
      depth_(std::move(depth)),
      parent_(std::move(parent)) {
  int max_d = -1;
  for (int m = 1; m <= antenna_count_; ++m)
    if (m != reference_) max_d = std::max(max_d, depth_[m]);
  levels_.assign(max_d + 1, {});
  for (int m = 1; m <= antenna_count_; ++m)
    if (m != reference_) levels_[depth_[m]].push_back(m);  // ascending m within a level
}

int CalibrationPathTable::depth(int m) const {
  if (m < 1 || m > antenna_count_ || m == reference_)
    throw StructuralError("depth undefined for antenna " + std::to_string(m));
  return depth_[m];
}

int CalibrationPathTable::parent(int m) const {
  if (m < 1 || m > antenna_count_ || m == reference_)
    throw StructuralError("parent undefined for antenna " + std::to_string(m));
  return parent_[m];
}

long CalibrationPathTable::total_path_weight() const {
  long sum = 0;
  for (int m = 1; m <= antenna_count_; ++m)
    if (m != reference_) sum += depth_[m] + 1;
  return sum;
}

bool validate_effective(const InterconnectionStrategy& strategy) {
  const int M = strategy.antenna_count();
  if (M < 2) throw StructuralError("strategy has no antennas");
  for (int p = 1; p <= M; ++p) {
    if (strategy.connected(p, p)) throw StructuralError("nonzero adjacency diagonal");
    for (int q = p + 1; q <= M; ++q)
      if (strategy.connected(p, q) != strategy.connected(q, p))
        throw StructuralError("asymmetric adjacency");
  }
  // BFS from the reference.
  std::vector<char> seen(M + 1, 0);
  std::deque<int> queue{strategy.reference()};
  seen[strategy.reference()] = 1;
  int reached = 1;
  while (!queue.empty()) {
    const int m = queue.front();
    queue.pop_front();
    for (int q : strategy.neighbors(m)) {
      if (!seen[q]) {
        seen[q] = 1;
        ++reached;
        queue.push_back(q);
      }
    }
  }
  return reached == M;
}

bool is_tree(const InterconnectionStrategy& strategy) {
  return strategy.edge_count() == strategy.antenna_count() - 1 &&
         validate_effective(strategy);
}

InterconnectionStrategy build_star(int antenna_count, int reference) {
  InterconnectionStrategy s(antenna_count, reference);
  for (int m = 1; m <= antenna_count; ++m)
    if (m != reference) s.set_edge(m, reference);
  return s;
}

InterconnectionStrategy build_daisy_chain(int antenna_count, int reference) {
  InterconnectionStrategy s(antenna_count, reference);
  for (int m = 1; m < antenna_count; ++m) s.set_edge(m, m + 1);
  return s;
}

InterconnectionStrategy build_combined(int antenna_count, int reference, int z) {
  if (z < 0) throw StructuralError("combined strategy needs z >= 0");
  const int lo = reference - z;
  const int hi = reference + z;
  if (lo < 1 || hi > antenna_count)
    throw StructuralError("combined window [" + std::to_string(lo) + "," +
                          std::to_string(hi) + "] exceeds [1," +
                          std::to_string(antenna_count) + "]");
  InterconnectionStrategy s(antenna_count, reference);
  for (int m = lo; m < hi; ++m) s.set_edge(m, m + 1);
  for (int m = 1; m < lo; ++m) s.set_edge(m, lo);
  for (int m = hi + 1; m <= antenna_count; ++m) s.set_edge(m, hi);
  return s;
}

CalibrationPathTable compute_paths(const InterconnectionStrategy& strategy) {
  const int M = strategy.antenna_count();
  const int f = strategy.reference();
  if (!validate_effective(strategy))
    throw StructuralError("strategy is not effective: some antenna cannot reach the reference");
  if (strategy.edge_count() != M - 1)
    throw StructuralError("calibration paths need a tree strategy; got " +
                          std::to_string(strategy.edge_count()) + " lines for " +
                          std::to_string(M) + " antennas");
  std::vector<int> depth(M + 1, -1), parent(M + 1, 0);
  std::vector<char> seen(M + 1, 0);
  std::deque<int> queue{f};
  seen[f] = 1;
  std::vector<int> hops(M + 1, 0);
  while (!queue.empty()) {
    const int m = queue.front();
    queue.pop_front();
    for (int q : strategy.neighbors(m)) {
      if (seen[q]) continue;
      seen[q] = 1;
      hops[q] = hops[m] + 1;
      depth[q] = hops[q] - 1;  // intermediate antennas, endpoints excluded
      parent[q] = m;
      queue.push_back(q);
    }
  }
  return {M, f, std::move(depth), std::move(parent)};
}

namespace {

std::uint64_t pow_u64(std::uint64_t base, int exp) {
  std::uint64_t v = 1;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

}  // namespace

SpanningTreeEnumerator::SpanningTreeEnumerator(int antenna_count, int reference, int cap)
    : antenna_count_(antenna_count), reference_(reference) {
  if (antenna_count < 2)
    throw StructuralError("enumeration needs at least 2 antennas");
  if (antenna_count > cap)
    throw StructuralError("refusing to enumerate spanning trees for M = " +
                          std::to_string(antenna_count) + ": above the cap of " +
                          std::to_string(cap) + " (" + std::to_string(antenna_count) +
                          "^" + std::to_string(antenna_count - 2) + " trees)");
  total_ = pow_u64(static_cast<std::uint64_t>(antenna_count), antenna_count - 2);
}

std::optional<InterconnectionStrategy> SpanningTreeEnumerator::next() {
  if (cursor_ >= total_) return std::nullopt;
  return from_index(antenna_count_, reference_, cursor_++);
}

InterconnectionStrategy SpanningTreeEnumerator::from_index(int antenna_count, int reference,
                                                           std::uint64_t index) {
  const int M = antenna_count;
  // Reject indices past M^(M-2); when that count overflows 64 bits every
  // possible index is in range.
  std::uint64_t total = 1;
  bool bounded = true;
  for (int i = 0; i < M - 2 && bounded; ++i) {
    if (total > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(M))
      bounded = false;
    else
      total *= static_cast<std::uint64_t>(M);
  }
  if (bounded && index >= total)
    throw StructuralError("Pruefer index " + std::to_string(index) +
                          " out of range: only " + std::to_string(total) +
                          " spanning trees on " + std::to_string(M) + " antennas");
  // Decode index as an (M-2)-digit base-M Pruefer sequence with labels 1..M.
  std::vector<int> seq(std::max(M - 2, 0));
  for (int i = 0; i < M - 2; ++i) {
    seq[i] = static_cast<int>(index % M) + 1;
    index /= M;
  }
  std::vector<int> degree(M + 1, 1);
  for (int x : seq) ++degree[x];

  InterconnectionStrategy s(M, reference);
  for (int x : seq) {
    for (int j = 1; j <= M; ++j) {
      if (degree[j] == 1) {
        s.set_edge(j, x);
        --degree[j];
        --degree[x];
        break;
      }
    }
  }
  int first = 0;
  for (int j = 1; j <= M; ++j) {
    if (degree[j] == 1) {
      if (first == 0) {
        first = j;
      } else {
        s.set_edge(first, j);
        break;
      }
    }
  }
  return s;
}

InterconnectionStrategy read_strategy_file(std::istream& in) {
  int M = 0, f = 0;
  if (!(in >> M >> f)) throw StructuralError("strategy file: cannot read header \"M f\"");
  InterconnectionStrategy s(M, f);
  int p = 0, q = 0;
  while (in >> p >> q) {
    if (p == q)
      throw StructuralError("strategy file: self-loop edge " + std::to_string(p) + " " +
                            std::to_string(q));
    if (s.connected(p, q))
      throw StructuralError("strategy file: duplicate edge " + std::to_string(p) + " " +
                            std::to_string(q));
    s.set_edge(p, q);
  }
  if (!in.eof()) throw StructuralError("strategy file: trailing garbage after edge list");
  return s;
}

InterconnectionStrategy read_strategy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open strategy file: " + path);
  return read_strategy_file(in);
}

void write_strategy_file(const InterconnectionStrategy& strategy, std::ostream& out) {
  out << strategy.antenna_count() << ' ' << strategy.reference() << '\n';
  for (const auto& [p, q] : strategy.edges()) out << p << ' ' << q << '\n';
}

void write_strategy_file(const InterconnectionStrategy& strategy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot open strategy file for writing: " + path);
  write_strategy_file(strategy, out);
}

std::string StrategySpec::label() const {
  switch (kind) {
    case Kind::Star:
      return "star";
    case Kind::Daisy:
      return "daisy";
    case Kind::Combined:
      return "combined:" + std::to_string(z);
    case Kind::File:
      return "file:" + path;
  }
  return "?";
}

StrategySpec parse_strategy_spec(const std::string& text) {
  StrategySpec spec;
  if (text == "star") {
    spec.kind = StrategySpec::Kind::Star;
  } else if (text == "daisy") {
    spec.kind = StrategySpec::Kind::Daisy;
  } else if (text.rfind("combined:", 0) == 0) {
    spec.kind = StrategySpec::Kind::Combined;
    const std::string arg = text.substr(9);
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), spec.z);
    if (ec != std::errc() || ptr != arg.data() + arg.size() || spec.z < 0)
      throw StructuralError("bad strategy spec \"" + text + "\": combined:<z> needs z >= 0");
  } else if (text.rfind("file:", 0) == 0) {
    spec.kind = StrategySpec::Kind::File;
    spec.path = text.substr(5);
    if (spec.path.empty()) throw StructuralError("bad strategy spec \"" + text + "\": empty path");
  } else {
    throw StructuralError("bad strategy spec \"" + text +
                          "\": expected star | daisy | combined:<z> | file:<path>");
  }
  return spec;
}

InterconnectionStrategy realize(const StrategySpec& spec, int antenna_count, int reference) {
  switch (spec.kind) {
    case StrategySpec::Kind::Star:
      return build_star(antenna_count, reference);
    case StrategySpec::Kind::Daisy:
      return build_daisy_chain(antenna_count, reference);
    case StrategySpec::Kind::Combined:
      return build_combined(antenna_count, reference, spec.z);
    case StrategySpec::Kind::File: {
      InterconnectionStrategy s = read_strategy_file(spec.path);
      if (s.antenna_count() != antenna_count || s.reference() != reference)
        throw StructuralError("strategy file " + spec.path + " declares M=" +
                              std::to_string(s.antenna_count()) + " f=" +
                              std::to_string(s.reference()) + ", run requested M=" +
                              std::to_string(antenna_count) + " f=" +
                              std::to_string(reference));
      return s;
    }
  }
  throw StructuralError("unreachable strategy kind");
}

}  // namespace selfcal
