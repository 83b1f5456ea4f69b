#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "selfcal/common.hpp"

namespace selfcal {

/// Which antenna ports are wired together with transmission lines.
/// Antenna indices are 1-based throughout the public interface.
/// The adjacency is symmetric with a zero diagonal; an "effective" strategy
/// connects every ordinary antenna to the reference antenna.
class InterconnectionStrategy {
 public:
  InterconnectionStrategy() = default;
  InterconnectionStrategy(int antenna_count, int reference);

  int antenna_count() const { return antenna_count_; }
  int reference() const { return reference_; }

  bool connected(int p, int q) const;
  void set_edge(int p, int q);    // throws StructuralError on self-loop / out of range
  void clear_edge(int p, int q);

  int edge_count() const;
  /// Edges as (p, q) with p < q, sorted.
  std::vector<std::pair<int, int>> edges() const;
  /// Antennas directly wired to m (the neighbor set C_m), ascending.
  std::vector<int> neighbors(int m) const;
  int degree(int m) const;

  bool operator==(const InterconnectionStrategy& other) const = default;

 private:
  void check_index(int m) const;

  int antenna_count_ = 0;
  int reference_ = 1;
  std::vector<std::uint8_t> adjacency_;  // row-major antenna_count_^2
};

/// Per-antenna calibration paths of a tree strategy, rooted at the reference.
/// depth(m) counts the intermediate antennas between m and the reference
/// (0 when m is wired to the reference directly); parent(m) is m's one-hop
/// neighbor toward the reference. levels()[r] lists the antennas at depth r.
class CalibrationPathTable {
 public:
  CalibrationPathTable() = default;
  CalibrationPathTable(int antenna_count, int reference, std::vector<int> depth,
                       std::vector<int> parent);

  int antenna_count() const { return antenna_count_; }
  int reference() const { return reference_; }
  int depth(int m) const;    // m != reference
  int parent(int m) const;   // m != reference
  int max_depth() const { return static_cast<int>(levels_.size()) - 1; }
  const std::vector<std::vector<int>>& levels() const { return levels_; }

  /// Sum over ordinary antennas of (depth + 1); the error-propagation weight
  /// that orders strategies by total CRLB.
  long total_path_weight() const;

 private:
  int antenna_count_ = 0;
  int reference_ = 1;
  std::vector<int> depth_;   // 1-based, [reference] = -1
  std::vector<int> parent_;  // 1-based, [reference] = 0
  std::vector<std::vector<int>> levels_;
};

/// True iff every ordinary antenna has a path to the reference.
/// Throws StructuralError if the adjacency is malformed.
bool validate_effective(const InterconnectionStrategy& strategy);

/// Connected with exactly antenna_count-1 lines.
bool is_tree(const InterconnectionStrategy& strategy);

InterconnectionStrategy build_star(int antenna_count, int reference);
InterconnectionStrategy build_daisy_chain(int antenna_count, int reference);

/// Chain over [reference-z, reference+z]; antennas below the window wire to its
/// low endpoint, antennas above to its high endpoint. z = 0 degenerates to the
/// star, a window covering [1, M] to the daisy chain.
InterconnectionStrategy build_combined(int antenna_count, int reference, int z);

/// Breadth-first traversal from the reference. Requires a tree strategy.
CalibrationPathTable compute_paths(const InterconnectionStrategy& strategy);

inline constexpr int kDefaultEnumerationCap = 8;

/// Duplicate-free enumeration of all labeled spanning trees on M antennas via
/// Pruefer sequences; yields exactly M^(M-2) trees. Trees can also be built
/// directly from a linear index, so callers may partition the index space.
class SpanningTreeEnumerator {
 public:
  SpanningTreeEnumerator(int antenna_count, int reference,
                         int cap = kDefaultEnumerationCap);

  std::uint64_t total() const { return total_; }
  std::optional<InterconnectionStrategy> next();

  /// Tree for Pruefer index in [0, total()).
  static InterconnectionStrategy from_index(int antenna_count, int reference,
                                            std::uint64_t index);

 private:
  int antenna_count_;
  int reference_;
  std::uint64_t total_;
  std::uint64_t cursor_ = 0;
};

/// Strategy file format: line 1 "M f", then one "p q" edge per line,
/// whitespace-separated, 1-based. Duplicate and self-loop edges are rejected.
InterconnectionStrategy read_strategy_file(std::istream& in);
InterconnectionStrategy read_strategy_file(const std::string& path);
void write_strategy_file(const InterconnectionStrategy& strategy, std::ostream& out);
void write_strategy_file(const InterconnectionStrategy& strategy, const std::string& path);

/// Strategy spec grammar: "star" | "daisy" | "combined:<z>" | "file:<path>".
struct StrategySpec {
  enum class Kind { Star, Daisy, Combined, File };

  Kind kind = Kind::Star;
  int z = 0;
  std::string path;

  std::string label() const;
};

StrategySpec parse_strategy_spec(const std::string& text);

/// Builds the strategy for (M, f); for Kind::File loads the file and checks
/// its header against the requested dimensions.
InterconnectionStrategy realize(const StrategySpec& spec, int antenna_count, int reference);

}  // namespace selfcal
