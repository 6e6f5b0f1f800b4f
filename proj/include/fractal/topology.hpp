// Combinatorial model of a p.c.f. self-similar set: words, cells, canonical
// vertex identities and standard neighborhoods.
//
// Vertices are numbered so that V_0 ⊂ V_1 ⊂ ... are nested prefixes of the
// index space: V_0 is {0..N0-1}, and the points created when a level-k cell
// is subdivided follow all of V_k, grouped by cell in word order. A grid
// function on V_m therefore restricts to V_k by truncation.
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fractal {

/// F_i v_m = F_j v_n, all indices 0-based.
struct GluePair {
  int i, m, j, n;
};

struct FractalSpec {
  std::string name;
  int map_count = 0;       // N
  int boundary_count = 0;  // N0
  std::vector<GluePair> glue;
  std::vector<int> fixed_map;  // corner j -> the map fixing v_j
};

struct InvalidSpec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A finite word over the map alphabet {0..N-1}. Printed 1-based.
class Word {
 public:
  Word() = default;
  explicit Word(std::vector<int> letters) : letters_(std::move(letters)) {}

  static Word repeat(int letter, std::size_t count) { return Word(std::vector<int>(count, letter)); }
  /// Parses 1-based digit strings such as "112"; empty string is the empty word.
  static Word parse(const std::string& text);

  std::size_t size() const { return letters_.size(); }
  bool empty() const { return letters_.empty(); }
  int operator[](std::size_t k) const { return letters_[k]; }
  const std::vector<int>& letters() const { return letters_; }

  Word operator+(const Word& other) const;
  Word operator+(int letter) const;
  Word prefix(std::size_t n) const;
  Word suffix_from(std::size_t n) const;
  bool starts_with(const Word& p) const;

  std::string str() const;  // 1-based digits, "∅" for empty

  auto operator<=>(const Word&) const = default;
  bool operator==(const Word&) const = default;

 private:
  std::vector<int> letters_;
};

struct VertexId {
  std::uint64_t index = 0;
  auto operator<=>(const VertexId&) const = default;
  bool operator==(const VertexId&) const = default;
};

/// A (word, corner) pair naming the point F_w v_corner.
struct Address {
  Word word;
  int corner = 0;
  bool operator==(const Address&) const = default;
};

/// One cell view of a vertex: x = F_cell v_corner. Derivatives are taken
/// from these views (Definition of d_jk at nonjunction / junction vertices).
struct Side {
  Word cell;
  int corner = 0;
  bool operator==(const Side&) const = default;
};

struct VertexClass {
  bool junction = false;
  Word word;  // w: nonjunction x = F_w v_j; junction x = F_w F_j v_j'
  int corner = 0;                           // nonjunction only
  std::vector<std::pair<int, int>> pairs;   // junction only, sorted by map index
  std::vector<int> junction_set() const;    // J(x)
};

/// Corner vertex ids of every level-m cell, in word order.
struct CellTable {
  int level = 0;
  int n0 = 0;
  std::vector<std::uint32_t> corners;  // size N^m * N0
  std::size_t cell_count() const { return n0 ? corners.size() / n0 : 0; }
  const std::uint32_t* cell(std::size_t c) const { return corners.data() + c * n0; }
};

class Topology {
 public:
  explicit Topology(FractalSpec spec);

  const FractalSpec& spec() const { return spec_; }
  int N() const { return spec_.map_count; }
  int N0() const { return spec_.boundary_count; }
  int fixed_map(int corner) const { return spec_.fixed_map[corner]; }

  /// Level-1 template: point index of F_i v_a; indices < N0 are V_0 itself.
  int template_point(int map, int corner) const { return slot_point_[map * N0() + corner]; }
  int template_size() const { return template_size_; }
  int new_per_cell() const { return template_size_ - N0(); }
  /// All (map, corner) slots naming template point p, sorted.
  const std::vector<std::pair<int, int>>& template_slots(int p) const { return point_slots_[p]; }

  std::uint64_t vertex_count(int level) const;
  std::uint64_t cell_count(int level) const;
  int level_of(VertexId v) const;

  VertexId canonicalize(const Word& w, int corner) const;
  Address address(VertexId v) const;
  VertexClass classify(VertexId v) const;
  std::vector<Side> sides(VertexId v) const;
  std::vector<Word> neighborhood(VertexId v, int depth) const;
  std::vector<VertexId> vertex_set(int level) const;

  /// Corner ids of the cell F_w.
  std::vector<VertexId> cell_corners(const Word& w) const;
  std::uint64_t cell_index(const Word& w) const;
  Word cell_word(std::uint64_t index, int level) const;

  const CellTable& cells(int level) const;

  /// Parses a vertex address "w:j" with 1-based letters/corner, e.g. "112:2" or ":1".
  VertexId parse_vertex(const std::string& text) const;
  std::string describe(VertexId v) const;

 private:
  void validate_and_build();

  FractalSpec spec_;
  int template_size_ = 0;
  std::vector<int> slot_point_;
  std::vector<std::vector<std::pair<int, int>>> point_slots_;
  std::vector<std::uint64_t> offsets_;  // offsets_[k] = |V_k|
  mutable std::mutex cache_mutex_;
  mutable std::vector<std::unique_ptr<CellTable>> cache_;
};

}  // namespace fractal
