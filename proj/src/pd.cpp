#include "gmult/pd.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace gmult {

std::string CellAddress::str() const {
  std::ostringstream os;
  os << "(";
  for (int p : path) os << p << ".";
  os << "g" << gap << ")";
  return os.str();
}

CellTable::CellTable(const PastingTree& t) {
  cells = cells_of(t);
  std::sort(cells.begin(), cells.end());
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) index[cells[i]] = i;
  firstOfDim.assign(t.dim + 2, static_cast<int>(cells.size()));
  for (int i = static_cast<int>(cells.size()) - 1; i >= 0; --i)
    firstOfDim[cells[i].dim()] = i;
}

int CellTable::at(const CellAddress& a) const {
  auto it = index.find(a);
  if (it == index.end()) throw GmError("cell address not in table: " + a.str());
  return it->second;
}

PastingTree globe(int n) {
  if (n < 0) throw GmError("globe: negative dimension");
  PastingTree t;
  t.dim = 0;
  for (int i = 0; i < n; ++i) {
    PastingTree up;
    up.children.push_back(t);
    up.dim = t.dim + 1;
    up.children[0].dim = 0;  // child dims are not meaningful; normalize to 0
    t = up;
  }
  t.dim = n;
  return t;
}

namespace {
// Children carry no dim of their own; keep them normalized to 0.
std::vector<PastingTree> trunc_children(const std::vector<PastingTree>& cs, int k) {
  std::vector<PastingTree> out;
  if (k == 0) return out;
  out.reserve(cs.size());
  for (const auto& c : cs) {
    PastingTree cc;
    cc.children = trunc_children(c.children, k - 1);
    out.push_back(std::move(cc));
  }
  return out;
}
}  // namespace

PastingTree truncate(const PastingTree& t, int k) {
  if (k < 0 || k > t.dim) throw GmError("truncate: level out of range");
  PastingTree out;
  out.children = trunc_children(t.children, k);
  out.dim = k;
  return out;
}

PastingTree promote(const PastingTree& t) {
  PastingTree out = t;
  out.dim = t.dim + 1;
  return out;
}

namespace {
std::vector<PastingTree> glue_children(const std::vector<PastingTree>& a, int k,
                                       const std::vector<PastingTree>& b) {
  if (k == 0) {
    std::vector<PastingTree> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }
  if (a.size() != b.size()) throw GmError("glue: boundary mismatch (arity)");
  std::vector<PastingTree> out;
  out.reserve(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    PastingTree c;
    c.children = glue_children(a[i].children, k - 1, b[i].children);
    out.push_back(std::move(c));
  }
  return out;
}
}  // namespace

PastingTree glue(const PastingTree& a, int k, const PastingTree& b) {
  if (a.dim != b.dim) throw GmError("glue: dimension mismatch");
  if (k < 0 || k >= a.dim) throw GmError("glue: level out of range");
  if (truncate(a, k) != truncate(b, k)) throw GmError("glue: boundary mismatch");
  PastingTree out;
  out.children = glue_children(a.children, k, b.children);
  out.dim = a.dim;
  return out;
}

namespace {
void collect_cells(const PastingTree& t, std::vector<int>& prefix,
                   std::vector<CellAddress>& out) {
  for (int g = 0; g <= static_cast<int>(t.children.size()); ++g)
    out.push_back(CellAddress{prefix, g});
  for (int i = 0; i < static_cast<int>(t.children.size()); ++i) {
    prefix.push_back(i);
    collect_cells(t.children[i], prefix, out);
    prefix.pop_back();
  }
}
}  // namespace

std::vector<CellAddress> cells_of(const PastingTree& t) {
  std::vector<CellAddress> out;
  std::vector<int> prefix;
  collect_cells(t, prefix, out);
  return out;
}

CellAddress src_cell(const CellAddress& a) {
  if (a.dim() == 0) throw GmError("src_cell: 0-cell has no source");
  if (a.dim() == 1) return CellAddress{{}, a.path[0]};
  CellAddress sub{std::vector<int>(a.path.begin() + 1, a.path.end()), a.gap};
  CellAddress s = src_cell(sub);
  s.path.insert(s.path.begin(), a.path[0]);
  return s;
}

CellAddress tgt_cell(const CellAddress& a) {
  if (a.dim() == 0) throw GmError("tgt_cell: 0-cell has no target");
  if (a.dim() == 1) return CellAddress{{}, a.path[0] + 1};
  CellAddress sub{std::vector<int>(a.path.begin() + 1, a.path.end()), a.gap};
  CellAddress s = tgt_cell(sub);
  s.path.insert(s.path.begin(), a.path[0]);
  return s;
}

FinGlobSet cells(const PastingTree& t) {
  FinGlobSet g;
  g.cells.assign(t.dim + 1, {});
  for (const auto& a : cells_of(t)) g.cells[a.dim()].push_back(a);
  for (auto& v : g.cells) std::sort(v.begin(), v.end());
  g.src.assign(t.dim + 1, {});
  g.tgt.assign(t.dim + 1, {});
  for (int k = 1; k <= t.dim; ++k) {
    std::map<CellAddress, int> lower;
    for (int i = 0; i < static_cast<int>(g.cells[k - 1].size()); ++i)
      lower[g.cells[k - 1][i]] = i;
    for (const auto& a : g.cells[k]) {
      g.src[k].push_back(lower.at(src_cell(a)));
      g.tgt[k].push_back(lower.at(tgt_cell(a)));
    }
  }
  return g;
}

namespace {
CellAddress embed_addr(const PastingTree& t, int k, bool source, const CellAddress& a) {
  if (a.path.empty()) {
    if (k == 0)
      return CellAddress{{}, source ? 0 : static_cast<int>(t.children.size())};
    return a;
  }
  int i = a.path[0];
  CellAddress sub{std::vector<int>(a.path.begin() + 1, a.path.end()), a.gap};
  CellAddress e = embed_addr(t.children[i], k - 1, source, sub);
  e.path.insert(e.path.begin(), i);
  return e;
}
}  // namespace

std::map<CellAddress, CellAddress> boundary_embed(const PastingTree& t, int k, bool source) {
  if (k < 0 || k >= t.dim) throw GmError("boundary_embed: level out of range");
  std::map<CellAddress, CellAddress> out;
  for (const auto& a : cells_of(truncate(t, k))) out[a] = embed_addr(t, k, source, a);
  return out;
}

namespace {
CellAddress glue_shift_right(const PastingTree& a, int k, const CellAddress& c) {
  // Image of a cell of b inside glue(a, k, b).
  if (k == 0) {
    int m = static_cast<int>(a.children.size());
    CellAddress out = c;
    if (out.path.empty())
      out.gap += m;
    else
      out.path[0] += m;
    return out;
  }
  if (c.path.empty()) return c;
  int i = c.path[0];
  CellAddress sub{std::vector<int>(c.path.begin() + 1, c.path.end()), c.gap};
  CellAddress e = glue_shift_right(a.children[i], k - 1, sub);
  e.path.insert(e.path.begin(), i);
  return e;
}
}  // namespace

std::map<CellAddress, CellAddress> glue_embed_left(const PastingTree& a, int k,
                                                   const PastingTree& b) {
  (void)k;
  (void)b;
  std::map<CellAddress, CellAddress> out;
  for (const auto& c : cells_of(a)) out[c] = c;
  return out;
}

std::map<CellAddress, CellAddress> glue_embed_right(const PastingTree& a, int k,
                                                    const PastingTree& b) {
  std::map<CellAddress, CellAddress> out;
  for (const auto& c : cells_of(b)) out[c] = glue_shift_right(a, k, c);
  return out;
}

namespace {

void check_pd_of_pds(const PdOfPds& d) {
  for (const auto& a : cells_of(d.outer)) {
    auto it = d.inner.find(a);
    if (it == d.inner.end()) throw GmError("multiply: missing inner tree at " + a.str());
    if (it->second.dim != a.dim())
      throw GmError("multiply: inner dimension mismatch at " + a.str());
    if (a.dim() >= 1) {
      PastingTree bd = truncate(it->second, a.dim() - 1);
      if (bd != d.inner.at(src_cell(a)) || bd != d.inner.at(tgt_cell(a)))
        throw GmError("multiply: boundary-incompatible inner assignment at " + a.str());
    }
  }
}

struct SsmulOut {
  PastingTree tree;
  std::map<CellAddress, std::map<CellAddress, CellAddress>> embed;
};

void remap_embeds(std::map<CellAddress, std::map<CellAddress, CellAddress>>& em,
                  const std::map<CellAddress, CellAddress>& through) {
  for (auto& [oc, inner] : em)
    for (auto& [ic, v] : inner) v = through.at(v);
}

SsmulOut ssmul(int s, const PastingTree& sigma, const std::vector<int>& prefix,
               const PdOfPds& d) {
  SsmulOut out;
  if (sigma.children.empty()) {
    CellAddress oc{prefix, 0};
    PastingTree p = d.inner.at(oc);
    p.dim = sigma.dim + s;
    out.tree = p;
    auto& m = out.embed[oc];
    for (const auto& z : cells_of(p)) m[z] = z;
    return out;
  }
  int mchildren = static_cast<int>(sigma.children.size());
  std::vector<SsmulOut> blocks;
  blocks.reserve(mchildren);
  for (int i = 0; i < mchildren; ++i) {
    std::vector<int> pre = prefix;
    pre.push_back(i);
    PastingTree child = sigma.children[i];
    child.dim = sigma.dim - 1;
    blocks.push_back(ssmul(s + 1, child, pre, d));
  }
  // Gap cells of sigma carry s-pds; they land on the shared s-boundaries.
  std::vector<PastingTree> blockTrees;
  for (auto& b : blocks) blockTrees.push_back(b.tree);

  out.tree = blocks[0].tree;
  out.embed = blocks[0].embed;
  std::vector<std::map<CellAddress, CellAddress>> blockToResult(mchildren);
  blockToResult[0] = glue_embed_left(blocks[0].tree, s, blocks[0].tree);  // identity
  for (int i = 1; i < mchildren; ++i) {
    PastingTree glued = glue(out.tree, s, blocks[i].tree);
    auto leftMap = glue_embed_left(out.tree, s, blocks[i].tree);
    auto rightMap = glue_embed_right(out.tree, s, blocks[i].tree);
    remap_embeds(out.embed, leftMap);
    for (int j = 0; j < i; ++j)
      for (auto& [k, v] : blockToResult[j]) v = leftMap.at(v);
    blockToResult[i] = rightMap;
    auto em = blocks[i].embed;
    remap_embeds(em, rightMap);
    for (auto& [oc, inner] : em) out.embed[oc] = std::move(inner);
    out.tree = std::move(glued);
  }
  for (int g = 0; g <= mchildren; ++g) {
    CellAddress oc{prefix, g};
    PastingTree pg = d.inner.at(oc);
    int blk = std::min(g, mchildren - 1);
    bool source = (g < mchildren);
    PastingTree bt = blockTrees[blk];
    if (truncate(bt, s) != PastingTree{pg.children, s})
      throw GmError("multiply: gap tree does not match block boundary at " + oc.str());
    auto bemb = boundary_embed(bt, s, source);
    auto& m = out.embed[oc];
    for (const auto& z : cells_of(pg)) m[z] = blockToResult[blk].at(bemb.at(z));
  }
  return out;
}

}  // namespace

PastingTree multiply(const PdOfPds& d) { return multiply_with_embeddings(d).tree; }

MultiplyResult multiply_with_embeddings(const PdOfPds& d) {
  check_pd_of_pds(d);
  SsmulOut o = ssmul(0, d.outer, {}, d);
  MultiplyResult r;
  r.tree = std::move(o.tree);
  r.embed = std::move(o.embed);
  return r;
}

namespace {
// All trees of height <= maxHeight with exactly `edges` edges, sorted.
std::vector<PastingTree> enum_trees(int maxHeight, int edges);

std::vector<std::vector<PastingTree>> enum_child_lists(int maxHeight, int edges) {
  std::vector<std::vector<PastingTree>> out;
  if (edges == 0) {
    out.push_back({});
    return out;
  }
  if (maxHeight <= 0) return out;
  for (int firstCost = 1; firstCost <= edges; ++firstCost) {
    auto firsts = enum_trees(maxHeight - 1, firstCost - 1);
    auto rests = enum_child_lists(maxHeight, edges - firstCost);
    for (const auto& f : firsts)
      for (const auto& r : rests) {
        std::vector<PastingTree> lst;
        lst.push_back(f);
        lst.insert(lst.end(), r.begin(), r.end());
        out.push_back(std::move(lst));
      }
  }
  return out;
}

std::vector<PastingTree> enum_trees(int maxHeight, int edges) {
  std::vector<PastingTree> out;
  for (auto& cs : enum_child_lists(maxHeight, edges)) {
    PastingTree t;
    t.children = std::move(cs);
    t.dim = 0;
    out.push_back(std::move(t));
  }
  return out;
}
}  // namespace

std::vector<PastingTree> enumerate_pds(int dim, int maxEdges) {
  std::vector<PastingTree> out;
  for (int e = 0; e <= maxEdges; ++e)
    for (auto& t : enum_trees(dim, e)) {
      t.dim = dim;
      out.push_back(std::move(t));
    }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {
void print_children(const PastingTree& t, std::ostringstream& os) {
  os << "[";
  for (size_t i = 0; i < t.children.size(); ++i) {
    if (i) os << ",";
    print_children(t.children[i], os);
  }
  os << "]";
}
}  // namespace

std::string print_pd(const PastingTree& t) {
  std::ostringstream os;
  print_children(t, os);
  os << "@" << t.dim;
  return os.str();
}

namespace {
struct PdParser {
  std::string_view s;
  size_t pos = 0;
  void skip() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  char peek() {
    skip();
    return pos < s.size() ? s[pos] : '\0';
  }
  void expect(char c) {
    if (peek() != c) throw GmError(std::string("pd parse: expected '") + c + "'");
    ++pos;
  }
  PastingTree node() {
    expect('[');
    PastingTree t;
    if (peek() != ']') {
      t.children.push_back(node());
      while (peek() == ',') {
        ++pos;
        t.children.push_back(node());
      }
    }
    expect(']');
    return t;
  }
  int number() {
    skip();
    if (pos >= s.size() || !isdigit(static_cast<unsigned char>(s[pos])))
      throw GmError("pd parse: expected number");
    int n = 0;
    while (pos < s.size() && isdigit(static_cast<unsigned char>(s[pos])))
      n = n * 10 + (s[pos++] - '0');
    return n;
  }
};
}  // namespace

PastingTree parse_pd(std::string_view sv) {
  PdParser p{sv};
  PastingTree t = p.node();
  if (p.peek() != '@') throw GmError("pd parse: expected '@dim'");
  ++p.pos;
  t.dim = p.number();
  p.skip();
  if (p.pos != sv.size()) throw GmError("pd parse: trailing input");
  if (t.height() > t.dim) throw GmError("pd parse: height exceeds dimension");
  return t;
}

namespace {
PastingTree* node_at(PastingTree& t, const std::vector<int>& path) {
  PastingTree* n = &t;
  for (int i : path) {
    if (i < 0 || i >= static_cast<int>(n->children.size()))
      throw GmError("bad node path");
    n = &n->children[i];
  }
  return n;
}

// Remap addresses through an insertion (delta=+1) or deletion (delta=-1) of a
// child at position g under `path`.
CellAddress shift_at(const CellAddress& a, const std::vector<int>& path, int g, int delta) {
  CellAddress out = a;
  size_t d = path.size();
  if (a.path.size() < d) return out;
  for (size_t i = 0; i < d; ++i)
    if (a.path[i] != path[i]) return out;
  if (a.path.size() == d) {
    // gap at the node itself
    if (delta > 0) {
      if (a.gap > g) out.gap += 1;
    } else {
      if (a.gap > g + 1) out.gap -= 1;
    }
    return out;
  }
  int i = a.path[d];
  if (delta > 0) {
    if (i >= g) out.path[d] += 1;
  } else {
    if (i > g) out.path[d] -= 1;
  }
  return out;
}
}  // namespace

BlowUp blow_up(const PastingTree& t, const CellAddress& x) {
  if (x.dim() >= t.dim) throw GmError("blow_up: cell dimension must be below tree dimension");
  BlowUp out;
  out.tree = t;
  PastingTree* n = node_at(out.tree, x.path);
  if (x.gap < 0 || x.gap > static_cast<int>(n->children.size()))
    throw GmError("blow_up: bad gap");
  n->children.insert(n->children.begin() + x.gap, PastingTree{});
  out.newCell = CellAddress{x.path, 0};
  out.newCell.path.push_back(x.gap);
  out.newCell.gap = 0;
  out.gapLeft = CellAddress{x.path, x.gap};
  out.gapRight = CellAddress{x.path, x.gap + 1};
  for (const auto& a : cells_of(t)) {
    CellAddress img = shift_at(a, x.path, x.gap, +1);
    if (a == x) img = out.gapLeft;
    out.remap[a] = img;
  }
  // shift_at with delta=+1 moves gaps strictly greater than g; the blown gap
  // itself maps to gapLeft by the explicit override above.
  return out;
}

Collapse collapse_cell(const PastingTree& t, const CellAddress& h) {
  if (h.dim() < 1) throw GmError("collapse: need a cell of dimension >= 1");
  if (h.gap != 0) throw GmError("collapse: cell is not the unique gap of a leaf node");
  std::vector<int> parent(h.path.begin(), h.path.end() - 1);
  int g = h.path.back();
  Collapse out;
  out.tree = t;
  PastingTree* pn = node_at(out.tree, parent);
  if (g < 0 || g >= static_cast<int>(pn->children.size()))
    throw GmError("collapse: bad child index");
  if (!pn->children[g].children.empty())
    throw GmError("collapse: cell has cells above it");
  pn->children.erase(pn->children.begin() + g);
  out.merged = CellAddress{parent, g};
  for (const auto& a : cells_of(t)) {
    if (a == h) continue;
    // cells inside the removed leaf: only h itself (it is childless)
    CellAddress img = shift_at(a, parent, g, -1);
    if (a.path == parent && (a.gap == g || a.gap == g + 1)) img = out.merged;
    if (a.path.size() > parent.size() && std::equal(parent.begin(), parent.end(), a.path.begin()) &&
        a.path[parent.size()] == g)
      throw GmError("collapse: unexpected cell inside removed leaf");
    out.remap[a] = img;
  }
  return out;
}

}  // namespace gmult
