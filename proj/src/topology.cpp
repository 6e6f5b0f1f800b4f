#include "fractal/topology.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace fractal {

// ---------------------------------------------------------------- Word

Word Word::parse(const std::string& text) {
  std::vector<int> letters;
  for (char ch : text) {
    if (ch < '1' || ch > '9') throw std::invalid_argument("bad letter in word: " + text);
    letters.push_back(ch - '1');
  }
  return Word(std::move(letters));
}

Word Word::operator+(const Word& other) const {
  std::vector<int> out = letters_;
  out.insert(out.end(), other.letters_.begin(), other.letters_.end());
  return Word(std::move(out));
}

Word Word::operator+(int letter) const {
  std::vector<int> out = letters_;
  out.push_back(letter);
  return Word(std::move(out));
}

Word Word::prefix(std::size_t n) const {
  return Word(std::vector<int>(letters_.begin(), letters_.begin() + std::min(n, letters_.size())));
}

Word Word::suffix_from(std::size_t n) const {
  if (n >= letters_.size()) return Word();
  return Word(std::vector<int>(letters_.begin() + n, letters_.end()));
}

bool Word::starts_with(const Word& p) const {
  return p.size() <= size() && std::equal(p.letters_.begin(), p.letters_.end(), letters_.begin());
}

std::string Word::str() const {
  if (letters_.empty()) return "∅";
  std::string s;
  for (int l : letters_) s += std::to_string(l + 1);
  return s;
}

std::vector<int> VertexClass::junction_set() const {
  std::vector<int> out;
  for (auto [i, a] : pairs) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------- Topology

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

Topology::Topology(FractalSpec spec) : spec_(std::move(spec)) { validate_and_build(); }

void Topology::validate_and_build() {
  const int n = spec_.map_count, n0 = spec_.boundary_count;
  if (n0 < 1 || n0 > n) throw InvalidSpec("need 1 <= N0 <= N");
  if (n > 9) throw InvalidSpec("at most 9 maps are supported");
  if (static_cast<int>(spec_.fixed_map.size()) != n0) throw InvalidSpec("fixed_map must list one map per corner");
  {
    std::set<int> seen;
    for (int f : spec_.fixed_map) {
      if (f < 0 || f >= n) throw InvalidSpec("fixed_map entry out of range");
      if (!seen.insert(f).second) throw InvalidSpec("a map fixes two boundary corners");
    }
  }
  auto slot = [n0](int map, int corner) { return map * n0 + corner; };
  UnionFind uf(n * n0);
  for (const auto& g : spec_.glue) {
    if (g.i < 0 || g.i >= n || g.j < 0 || g.j >= n || g.m < 0 || g.m >= n0 || g.n < 0 || g.n >= n0)
      throw InvalidSpec("glue pair index out of range");
    if (g.i == g.j) throw InvalidSpec("glue pair must join two different cells");
    uf.unite(slot(g.i, g.m), slot(g.j, g.n));
  }
  // Group slots into classes.
  std::vector<std::vector<std::pair<int, int>>> classes;
  std::vector<int> class_of_root(n * n0, -1);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n0; ++a) {
      int r = uf.find(slot(i, a));
      if (class_of_root[r] < 0) {
        class_of_root[r] = static_cast<int>(classes.size());
        classes.emplace_back();
      }
      classes[class_of_root[r]].emplace_back(i, a);
    }
  // Boundary slots are singletons; each class touches a cell at most once.
  for (int j = 0; j < n0; ++j) {
    int c = class_of_root[uf.find(slot(spec_.fixed_map[j], j))];
    if (classes[c].size() != 1) throw InvalidSpec("boundary point v_" + std::to_string(j + 1) + " is glued to another cell");
  }
  for (const auto& cls : classes) {
    std::set<int> maps;
    for (auto [i, a] : cls)
      if (!maps.insert(i).second) throw InvalidSpec("gluing identifies two corners of the same cell");
  }
  // Two cells share at most one point; level-1 adjacency is connected.
  std::vector<std::vector<int>> shared(n, std::vector<int>(n, 0));
  for (const auto& cls : classes)
    for (auto [i, a] : cls)
      for (auto [j, b] : cls)
        if (i != j) ++shared[i][j];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (shared[i][j] > 1) throw InvalidSpec("two cells intersect in more than one point");
  {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < n; ++j)
        if (shared[i][j] && !seen[j]) {
          seen[j] = true;
          stack.push_back(j);
        }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw InvalidSpec("level-1 cell adjacency graph is disconnected");
  }

  // Number template points: V_0 first, then new points by least slot.
  slot_point_.assign(n * n0, -1);
  point_slots_.assign(n0, {});
  for (int j = 0; j < n0; ++j) {
    slot_point_[slot(spec_.fixed_map[j], j)] = j;
    point_slots_[j] = {{spec_.fixed_map[j], j}};
  }
  for (auto cls : classes) {
    if (slot_point_[slot(cls[0].first, cls[0].second)] >= 0) continue;
    std::sort(cls.begin(), cls.end());
    int p = static_cast<int>(point_slots_.size());
    for (auto [i, a] : cls) slot_point_[slot(i, a)] = p;
    point_slots_.push_back(cls);
  }
  template_size_ = static_cast<int>(point_slots_.size());
  if (template_size_ == n0) throw InvalidSpec("level-1 graph adds no new vertices");

  offsets_.clear();
  offsets_.push_back(static_cast<std::uint64_t>(n0));
  std::uint64_t cells = 1;
  const std::uint64_t cap = std::uint64_t(1) << 60;
  while (offsets_.size() < 64 && cells < cap / static_cast<std::uint64_t>(n * template_size_)) {
    offsets_.push_back(offsets_.back() + cells * static_cast<std::uint64_t>(new_per_cell()));
    cells *= static_cast<std::uint64_t>(n);
  }
}

std::uint64_t Topology::vertex_count(int level) const {
  if (level < 0 || level >= static_cast<int>(offsets_.size())) throw std::out_of_range("level out of range");
  return offsets_[level];
}

std::uint64_t Topology::cell_count(int level) const {
  std::uint64_t c = 1;
  for (int k = 0; k < level; ++k) c *= static_cast<std::uint64_t>(N());
  return c;
}

int Topology::level_of(VertexId v) const {
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), v.index);
  if (it == offsets_.end()) throw std::out_of_range("vertex index out of range");
  return static_cast<int>(it - offsets_.begin());
}

std::uint64_t Topology::cell_index(const Word& w) const {
  std::uint64_t c = 0;
  for (int l : w.letters()) c = c * static_cast<std::uint64_t>(N()) + static_cast<std::uint64_t>(l);
  return c;
}

Word Topology::cell_word(std::uint64_t index, int level) const {
  std::vector<int> letters(level);
  for (int k = level - 1; k >= 0; --k) {
    letters[k] = static_cast<int>(index % static_cast<std::uint64_t>(N()));
    index /= static_cast<std::uint64_t>(N());
  }
  return Word(std::move(letters));
}

std::vector<VertexId> Topology::cell_corners(const Word& w) const {
  const int n0 = N0();
  std::vector<VertexId> corners(n0), next(n0);
  for (int j = 0; j < n0; ++j) corners[j] = VertexId{static_cast<std::uint64_t>(j)};
  std::uint64_t cell = 0;
  for (std::size_t d = 0; d < w.size(); ++d) {
    int i = w[d];
    if (i < 0 || i >= N()) throw std::invalid_argument("invalid letter in word");
    if (d + 1 >= offsets_.size()) throw std::out_of_range("word too long");
    for (int a = 0; a < n0; ++a) {
      int p = template_point(i, a);
      next[a] = p < n0 ? corners[p]
                       : VertexId{offsets_[d] + cell * static_cast<std::uint64_t>(new_per_cell()) +
                                  static_cast<std::uint64_t>(p - n0)};
    }
    std::swap(corners, next);
    cell = cell * static_cast<std::uint64_t>(N()) + static_cast<std::uint64_t>(i);
  }
  return corners;
}

VertexId Topology::canonicalize(const Word& w, int corner) const {
  if (corner < 0 || corner >= N0()) throw std::invalid_argument("invalid corner index");
  return cell_corners(w)[corner];
}

Address Topology::address(VertexId v) const {
  int level = level_of(v);
  if (level == 0) return {Word(), static_cast<int>(v.index)};
  std::uint64_t local = v.index - offsets_[level - 1];
  std::uint64_t cell = local / static_cast<std::uint64_t>(new_per_cell());
  int p = N0() + static_cast<int>(local % static_cast<std::uint64_t>(new_per_cell()));
  auto [i, a] = point_slots_[p].front();
  return {cell_word(cell, level - 1) + i, a};
}

VertexClass Topology::classify(VertexId v) const {
  VertexClass out;
  int level = level_of(v);
  if (level == 0) {
    out.corner = static_cast<int>(v.index);
    return out;
  }
  std::uint64_t local = v.index - offsets_[level - 1];
  std::uint64_t cell = local / static_cast<std::uint64_t>(new_per_cell());
  int p = N0() + static_cast<int>(local % static_cast<std::uint64_t>(new_per_cell()));
  Word parent = cell_word(cell, level - 1);
  const auto& slots = point_slots_[p];
  if (slots.size() == 1) {
    out.word = parent + slots[0].first;
    out.corner = slots[0].second;
  } else {
    out.junction = true;
    out.word = parent;
    out.pairs = slots;
  }
  return out;
}

std::vector<Side> Topology::sides(VertexId v) const {
  VertexClass c = classify(v);
  if (!c.junction) return {Side{c.word, c.corner}};
  std::vector<Side> out;
  for (auto [i, a] : c.pairs) out.push_back(Side{c.word + i, a});
  return out;
}

std::vector<Word> Topology::neighborhood(VertexId v, int depth) const {
  if (depth < 0) throw std::invalid_argument("negative depth");
  std::vector<Word> out;
  for (const Side& s : sides(v)) out.push_back(s.cell + Word::repeat(fixed_map(s.corner), depth));
  return out;
}

std::vector<VertexId> Topology::vertex_set(int level) const {
  std::uint64_t count = vertex_count(level);
  std::vector<VertexId> out(count);
  for (std::uint64_t k = 0; k < count; ++k) out[k] = VertexId{k};
  return out;
}

const CellTable& Topology::cells(int level) const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (cache_.empty()) {
    auto t = std::make_unique<CellTable>();
    t->level = 0;
    t->n0 = N0();
    for (int j = 0; j < N0(); ++j) t->corners.push_back(static_cast<std::uint32_t>(j));
    cache_.push_back(std::move(t));
  }
  if (vertex_count(level) > 0xFFFFFFFFull) throw std::out_of_range("level too deep for a cell table");
  while (static_cast<int>(cache_.size()) <= level) {
    const CellTable& prev = *cache_.back();
    int k = prev.level;
    auto t = std::make_unique<CellTable>();
    t->level = k + 1;
    t->n0 = N0();
    t->corners.resize(prev.corners.size() * static_cast<std::size_t>(N()));
    const std::size_t npc = static_cast<std::size_t>(new_per_cell());
    for (std::size_t c = 0; c < prev.cell_count(); ++c) {
      const std::uint32_t* pc = prev.cell(c);
      for (int i = 0; i < N(); ++i) {
        std::uint32_t* child = t->corners.data() + (c * N() + i) * N0();
        for (int a = 0; a < N0(); ++a) {
          int p = template_point(i, a);
          child[a] = p < N0() ? pc[p] : static_cast<std::uint32_t>(offsets_[k] + c * npc + (p - N0()));
        }
      }
    }
    cache_.push_back(std::move(t));
  }
  return *cache_[level];
}

VertexId Topology::parse_vertex(const std::string& text) const {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("vertex address must look like w:j");
  Word w = Word::parse(text.substr(0, colon));
  for (int l : w.letters())
    if (l >= N()) throw std::invalid_argument("letter out of range in " + text);
  int corner = std::stoi(text.substr(colon + 1)) - 1;
  return canonicalize(w, corner);
}

std::string Topology::describe(VertexId v) const {
  Address a = address(v);
  std::string w = a.word.empty() ? "" : a.word.str();
  return w + ":" + std::to_string(a.corner + 1);
}

}  // namespace fractal
