#pragma once

#include <compare>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gmult {

struct GmError : std::runtime_error {
  explicit GmError(const std::string& msg) : std::runtime_error(msg) {}
};

// Batanin tree with an extrinsic dimension tag. The tree of height <= dim
// is the canonical form of a dim-pasting diagram; promotion only bumps the
// tag, so degenerate diagrams cost nothing.
struct PastingTree {
  std::vector<PastingTree> children;
  int dim = 0;

  int height() const {
    int h = 0;
    for (const auto& c : children) h = std::max(h, c.height() + 1);
    return h;
  }
  int edge_count() const {
    int n = 0;
    for (const auto& c : children) n += 1 + c.edge_count();
    return n;
  }
  bool linear() const {
    if (children.empty()) return true;
    return children.size() == 1 && children[0].linear();
  }

  friend bool operator==(const PastingTree& a, const PastingTree& b) {
    return a.dim == b.dim && a.children == b.children;
  }
  friend bool operator!=(const PastingTree& a, const PastingTree& b) { return !(a == b); }
  friend bool operator<(const PastingTree& a, const PastingTree& b) {
    if (a.dim != b.dim) return a.dim < b.dim;
    return a.children < b.children;
  }
};

// Address of one cell of the underlying globular set of a PastingTree.
// A 0-cell is a gap index at the root; a (k+1)-cell descends into child
// path[0], then path[1], ..., ending with a gap index at depth k+1.
struct CellAddress {
  std::vector<int> path;  // child indices walked down, length == dim
  int gap = 0;            // gap index at the final node

  int dim() const { return static_cast<int>(path.size()); }

  friend bool operator==(const CellAddress& a, const CellAddress& b) {
    return a.path == b.path && a.gap == b.gap;
  }
  friend bool operator!=(const CellAddress& a, const CellAddress& b) { return !(a == b); }
  friend bool operator<(const CellAddress& a, const CellAddress& b) {
    if (a.path.size() != b.path.size()) return a.path.size() < b.path.size();
    if (a.path != b.path) return a.path < b.path;
    return a.gap < b.gap;
  }
  std::string str() const;
};

// Finite globular set presented by explicit cell lists and boundary index
// maps (indices into the next lower dimension's list).
struct FinGlobSet {
  std::vector<std::vector<CellAddress>> cells;  // per dimension
  std::vector<std::vector<int>> src;            // src[k][i]: index into cells[k-1], k >= 1
  std::vector<std::vector<int>> tgt;

  int dim() const { return static_cast<int>(cells.size()) - 1; }
  int count(int k) const {
    return k >= 0 && k < static_cast<int>(cells.size()) ? static_cast<int>(cells[k].size()) : 0;
  }
};

// Canonical enumeration of the cells of a tree: by dimension, then address.
struct CellTable {
  std::vector<CellAddress> cells;        // sorted by (dim, path, gap)
  std::map<CellAddress, int> index;
  std::vector<int> firstOfDim;           // firstOfDim[k] = first index of dim k

  explicit CellTable(const PastingTree& t);
  CellTable() = default;
  int size() const { return static_cast<int>(cells.size()); }
  int at(const CellAddress& a) const;
};

PastingTree globe(int n);
PastingTree truncate(const PastingTree& t, int k);
PastingTree promote(const PastingTree& t);
PastingTree glue(const PastingTree& a, int k, const PastingTree& b);

std::vector<CellAddress> cells_of(const PastingTree& t);
CellAddress src_cell(const CellAddress& a);  // dim >= 1
CellAddress tgt_cell(const CellAddress& a);
FinGlobSet cells(const PastingTree& t);

// Injective dimension-preserving map cells(truncate(t,k)) -> cells(t);
// source picks leftmost sectors, target rightmost.
std::map<CellAddress, CellAddress> boundary_embed(const PastingTree& t, int k, bool source);

// Cell maps through glue(a, k, b): where each cell of a (resp. b) lands.
std::map<CellAddress, CellAddress> glue_embed_left(const PastingTree& a, int k, const PastingTree& b);
std::map<CellAddress, CellAddress> glue_embed_right(const PastingTree& a, int k, const PastingTree& b);

struct PdOfPds {
  PastingTree outer;
  std::map<CellAddress, PastingTree> inner;  // one entry per cell of outer
};

PastingTree multiply(const PdOfPds& d);

struct MultiplyResult {
  PastingTree tree;
  // embed[outer cell][inner cell] = cell of the result
  std::map<CellAddress, std::map<CellAddress, CellAddress>> embed;
};
MultiplyResult multiply_with_embeddings(const PdOfPds& d);

std::vector<PastingTree> enumerate_pds(int dim, int maxEdges);

std::string print_pd(const PastingTree& t);
PastingTree parse_pd(std::string_view s);

// Replace the k-cell x of t by a fresh (k+1)-cell glued along x's boundary.
struct BlowUp {
  PastingTree tree;
  CellAddress newCell;           // the inserted (k+1)-cell
  CellAddress gapLeft, gapRight; // the two k-cells the old x split into
  std::map<CellAddress, CellAddress> remap;  // old cell -> new cell (x maps to gapLeft)
};
BlowUp blow_up(const PastingTree& t, const CellAddress& x);

// Inverse of blow_up at a childless cell h (a leaf subtree): removes it and
// merges the adjacent gaps. remap sends old cells other than h to new cells;
// both gaps adjacent to h map to the merged cell.
struct Collapse {
  PastingTree tree;
  CellAddress merged;  // the k-cell the two sides of h merged into
  std::map<CellAddress, CellAddress> remap;
};
Collapse collapse_cell(const PastingTree& t, const CellAddress& h);

}  // namespace gmult
