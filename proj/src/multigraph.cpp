#include "gmult/multigraph.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace gmult {

std::string TypeExprX::str() const {
  if (hom == 0) return base;
  std::ostringstream os;
  if (hom == 1)
    os << "H(" << base << ")";
  else
    os << "H^" << hom << "(" << base << ")";
  return os.str();
}

std::string ContextX::str() const {
  std::ostringstream os;
  os << print_pd(shape) << "{";
  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) os << ",";
    os << labels[i].str();
  }
  os << "}";
  return os.str();
}

const TypeGen* Presentation::find_type(const std::string& n) const {
  for (const auto& t : types)
    if (t.name == n) return &t;
  return nullptr;
}
const TermGen* Presentation::find_term(const std::string& n) const {
  for (const auto& t : terms)
    if (t.name == n) return &t;
  return nullptr;
}
const TypeGen& Presentation::type(const std::string& n) const {
  const TypeGen* t = find_type(n);
  if (!t) throw GmError("unknown type: " + n);
  return *t;
}
const TermGen& Presentation::term(const std::string& n) const {
  const TermGen* t = find_term(n);
  if (!t) throw GmError("unknown term: " + n);
  return *t;
}

TypeExprX make_type(const Presentation& p, const std::string& base, int hom) {
  return TypeExprX{base, hom, p.type(base).dim};
}

TypeExprX hom_type(const TypeExprX& t) { return TypeExprX{t.base, t.hom + 1, t.baseDim}; }

TypeExprX src_type(const Presentation& p, const TypeExprX& t) {
  if (t.dim() == 0) throw GmError("src_type: 0-type has no boundary");
  if (t.hom > 0) return TypeExprX{t.base, t.hom - 1, t.baseDim};
  return make_type(p, p.type(t.base).srcName, 0);
}

TypeExprX tgt_type(const Presentation& p, const TypeExprX& t) {
  if (t.dim() == 0) throw GmError("tgt_type: 0-type has no boundary");
  if (t.hom > 0) return TypeExprX{t.base, t.hom - 1, t.baseDim};
  return make_type(p, p.type(t.base).tgtName, 0);
}

TypeExprX iter_src_type(const Presentation& p, TypeExprX t, int downTo) {
  while (t.dim() > downTo) t = src_type(p, t);
  return t;
}
TypeExprX iter_tgt_type(const Presentation& p, TypeExprX t, int downTo) {
  while (t.dim() > downTo) t = tgt_type(p, t);
  return t;
}

const TypeExprX& label_at(const ContextX& c, const CellAddress& a) {
  CellTable tab(c.shape);
  return c.labels[tab.at(a)];
}

ContextX globe_context(const Presentation& p, const TypeExprX& a) {
  int n = a.dim();
  ContextX c;
  c.shape = globe(n);
  CellTable tab(c.shape);
  c.labels.resize(tab.size());
  for (int i = 0; i < tab.size(); ++i) {
    const CellAddress& cell = tab.cells[i];
    int k = cell.dim();
    if (k == n)
      c.labels[i] = a;
    else
      c.labels[i] = cell.gap == 0 ? iter_src_type(p, a, k) : iter_tgt_type(p, a, k);
  }
  return c;
}

ContextX promote_context(const ContextX& c) {
  ContextX out = c;
  out.shape = promote(c.shape);
  return out;
}

ContextX boundary_context(const Presentation& p, const ContextX& c, bool source) {
  (void)p;
  int n = c.shape.dim;
  if (n == 0) throw GmError("boundary_context: 0-context has no boundary");
  ContextX out;
  out.shape = truncate(c.shape, n - 1);
  CellTable outTab(out.shape);
  CellTable inTab(c.shape);
  auto emb = boundary_embed(c.shape, n - 1, source);
  out.labels.resize(outTab.size());
  for (int i = 0; i < outTab.size(); ++i)
    out.labels[i] = c.labels[inTab.at(emb.at(outTab.cells[i]))];
  return out;
}

void check_context(const Presentation& p, const ContextX& c) {
  CellTable tab(c.shape);
  if (static_cast<int>(c.labels.size()) != tab.size())
    throw GmError("context: label count mismatch");
  for (int i = 0; i < tab.size(); ++i) {
    const CellAddress& a = tab.cells[i];
    const TypeExprX& l = c.labels[i];
    if (l.dim() != a.dim()) throw GmError("context: label dimension mismatch at " + a.str());
    if (a.dim() >= 1) {
      if (!(src_type(p, l) == c.labels[tab.at(src_cell(a))]))
        throw GmError("context: source label mismatch at " + a.str());
      if (!(tgt_type(p, l) == c.labels[tab.at(tgt_cell(a))]))
        throw GmError("context: target label mismatch at " + a.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Shape inference

InferredContext infer_context(const Presentation& p, const std::vector<RawCell>& cells,
                              int contextDim) {
  std::map<std::string, const RawCell*> byName;
  for (const auto& c : cells) {
    if (byName.count(c.name)) throw GmError("context: duplicate cell name " + c.name);
    byName[c.name] = &c;
  }
  for (const auto& c : cells) {
    if (c.type.dim() > contextDim)
      throw GmError("context: cell " + c.name + " exceeds context dimension");
    if (c.type.dim() >= 1) {
      if (!byName.count(c.srcRef) || !byName.count(c.tgtRef))
        throw GmError("context: unresolved boundary reference on " + c.name);
      const RawCell* s = byName.at(c.srcRef);
      const RawCell* t = byName.at(c.tgtRef);
      if (s->type.dim() != c.type.dim() - 1 || t->type.dim() != c.type.dim() - 1)
        throw GmError("context: boundary dimension mismatch on " + c.name);
      if (!(s->type == src_type(p, c.type)) || !(t->type == tgt_type(p, c.type)))
        throw GmError("context: boundary type mismatch on " + c.name);
      if (c.type.dim() >= 2) {
        if (s->srcRef != t->srcRef || s->tgtRef != t->tgtRef)
          throw GmError("context: globularity violation on " + c.name);
      }
    } else if (!c.srcRef.empty() || !c.tgtRef.empty()) {
      throw GmError("context: 0-cell " + c.name + " cannot have boundaries");
    }
  }

  struct Builder {
    const std::map<std::string, const RawCell*>& byName;

    std::string base0(const std::string& name, bool src) const {
      const RawCell* c = byName.at(name);
      if (c->type.dim() == 0) return name;
      return base0(src ? c->srcRef : c->tgtRef, src);
    }

    // Build the tree for a flat list; fills addr with name -> address.
    PastingTree build(const std::vector<const RawCell*>& cs, int dimLeft,
                      std::map<std::string, CellAddress>& addr) const {
      std::vector<const RawCell*> zeros, higher;
      for (const RawCell* c : cs)
        (c->type.dim() == 0 ? zeros : higher).push_back(c);
      if (zeros.empty()) throw GmError("context: not a pasting scheme (no 0-cells)");
      if (higher.empty()) {
        if (zeros.size() != 1)
          throw GmError("context: not a pasting scheme (disconnected points)");
        addr[zeros[0]->name] = CellAddress{{}, 0};
        PastingTree t;
        t.dim = dimLeft;
        return t;
      }
      if (dimLeft < 1) throw GmError("context: dimension overflow");
      // Order the 0-cells along the 1-dimensional spine.
      std::map<std::string, std::string> step;  // x -> next 0-cell
      std::set<std::string> isTarget;
      for (const RawCell* c : higher) {
        std::string s = base0(c->name, true), t = base0(c->name, false);
        if (s == t) throw GmError("context: not a pasting scheme (loop at " + s + ")");
        auto it = step.find(s);
        if (it != step.end() && it->second != t)
          throw GmError("context: not a pasting scheme (branching at " + s + ")");
        step[s] = t;
        isTarget.insert(t);
      }
      std::string start;
      for (const RawCell* z : zeros)
        if (!isTarget.count(z->name)) {
          if (!start.empty())
            throw GmError("context: not a pasting scheme (disconnected)");
          start = z->name;
        }
      if (start.empty()) throw GmError("context: not a pasting scheme (cyclic)");
      std::vector<std::string> order{start};
      while (step.count(order.back())) order.push_back(step.at(order.back()));
      if (order.size() != zeros.size())
        throw GmError("context: not a pasting scheme (unreachable 0-cells)");
      std::map<std::string, int> pos;
      for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);

      PastingTree t;
      t.dim = dimLeft;
      int blocks = static_cast<int>(order.size()) - 1;
      for (int b = 0; b < blocks; ++b) {
        std::vector<const RawCell*> blockCells;
        for (const RawCell* c : higher)
          if (pos.at(base0(c->name, true)) == b) {
            if (pos.at(base0(c->name, false)) != b + 1)
              throw GmError("context: not a pasting scheme (skipping cell " + c->name + ")");
            blockCells.push_back(c);
          }
        if (blockCells.empty())
          throw GmError("context: not a pasting scheme (empty block)");
        // Shift dimensions down: 1-cells of the block become 0-cells.
        std::vector<RawCell> shifted;
        shifted.reserve(blockCells.size());
        for (const RawCell* c : blockCells) {
          RawCell s = *c;
          if (c->type.dim() == 1) {
            s.srcRef.clear();
            s.tgtRef.clear();
          }
          s.type.hom -= 1;  // fake dimension shift; only dim() is consulted below
          shifted.push_back(std::move(s));
        }
        // Recurse with a view of the shifted cells.
        std::vector<const RawCell*> view;
        for (const auto& s : shifted) view.push_back(&s);
        std::map<std::string, CellAddress> sub;
        PastingTree child = build(view, dimLeft - 1, sub);
        child.dim = 0;
        for (auto& [name, a] : sub) {
          CellAddress full = a;
          full.path.insert(full.path.begin(), b);
          addr[name] = full;
        }
        t.children.push_back(std::move(child));
      }
      for (int g = 0; g <= blocks; ++g) addr[order[g]] = CellAddress{{}, g};
      return t;
    }
  };

  // The dimension shift above subtracts from hom, which can go negative for
  // generator-based labels; dim() is the only thing consulted during build,
  // and baseDim + hom still decreases by exactly one per level.
  std::vector<const RawCell*> view;
  for (const auto& c : cells) view.push_back(&c);
  Builder b{byName};
  InferredContext out;
  std::map<std::string, CellAddress> addr;
  out.ctx.shape = b.build(view, contextDim, addr);
  out.ctx.shape.dim = contextDim;
  out.nameToCell = addr;

  CellTable tab(out.ctx.shape);
  if (static_cast<int>(addr.size()) != tab.size())
    throw GmError("context: cell count mismatch after inference");
  out.ctx.labels.resize(tab.size());
  out.cellNames.resize(tab.size());
  for (const auto& [name, a] : addr) {
    int i = tab.at(a);
    out.ctx.labels[i] = byName.at(name)->type;
    out.cellNames[i] = name;
  }
  // Verify the inferred addresses reproduce the declared boundaries exactly.
  for (const auto& c : cells)
    if (c.type.dim() >= 1) {
      if (src_cell(addr.at(c.name)) != addr.at(c.srcRef) ||
          tgt_cell(addr.at(c.name)) != addr.at(c.tgtRef))
        throw GmError("context: not a pasting scheme (boundary mismatch at " + c.name + ")");
    }
  check_context(p, out.ctx);
  return out;
}

// ---------------------------------------------------------------------------
// DSL parser

namespace {

struct Lexer {
  std::string s;
  size_t pos = 0;

  void skip() {
    for (;;) {
      while (pos < s.size() && isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos < s.size() && s[pos] == '#') {
        while (pos < s.size() && s[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
  }
  bool eof() {
    skip();
    return pos >= s.size();
  }
  bool peek_is(char c) {
    skip();
    return pos < s.size() && s[pos] == c;
  }
  bool accept(char c) {
    if (peek_is(c)) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) throw GmError(std::string("presentation parse: expected '") + c + "' at offset " + std::to_string(pos));
  }
  bool accept_word(const std::string& w) {
    skip();
    if (s.compare(pos, w.size(), w) == 0) {
      size_t end = pos + w.size();
      if (end >= s.size() || !(isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_')) {
        pos = end;
        return true;
      }
    }
    return false;
  }
  std::string ident() {
    skip();
    size_t start = pos;
    while (pos < s.size() && (isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
    if (start == pos) throw GmError("presentation parse: expected identifier at offset " + std::to_string(pos));
    return s.substr(start, pos - start);
  }
  int number() {
    skip();
    size_t start = pos;
    while (pos < s.size() && isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (start == pos) throw GmError("presentation parse: expected number");
    return std::stoi(s.substr(start, pos - start));
  }
};

TypeExprX parse_typeexpr(Lexer& lx, const Presentation& p) {
  lx.skip();
  if (lx.accept_word("H")) {
    int k = 1;
    if (lx.accept('^')) k = lx.number();
    lx.expect('(');
    TypeExprX inner = parse_typeexpr(lx, p);
    lx.expect(')');
    inner.hom += k;
    return inner;
  }
  std::string name = lx.ident();
  return make_type(p, name, 0);
}

}  // namespace

Presentation parse_presentation(const std::string& text) {
  Lexer lx{text};
  Presentation p;
  while (!lx.eof()) {
    if (lx.accept_word("type")) {
      TypeGen t;
      t.name = lx.ident();
      if (p.find_type(t.name) || p.find_term(t.name))
        throw GmError("duplicate declaration: " + t.name);
      if (lx.accept(':')) {
        t.srcName = lx.ident();
        lx.skip();
        if (!(lx.accept('-') && lx.accept('>')))
          throw GmError("presentation parse: expected '->'");
        t.tgtName = lx.ident();
        const TypeGen& s = p.type(t.srcName);
        const TypeGen& g = p.type(t.tgtName);
        if (s.dim != g.dim) throw GmError("type " + t.name + ": boundary dimension mismatch");
        t.dim = s.dim + 1;
        if (t.dim >= 2) {
          if (s.srcName != g.srcName || s.tgtName != g.tgtName)
            throw GmError("type " + t.name + ": globularity violation");
        }
      }
      p.types.push_back(t);
    } else if (lx.accept_word("term")) {
      TermGen t;
      t.name = lx.ident();
      if (p.find_type(t.name) || p.find_term(t.name))
        throw GmError("duplicate declaration: " + t.name);
      lx.expect('(');
      std::vector<RawCell> cells;
      for (;;) {
        RawCell c;
        c.name = lx.ident();
        lx.expect(':');
        c.type = parse_typeexpr(lx, p);
        if (lx.accept('(')) {
          c.srcRef = lx.ident();
          lx.expect(',');
          c.tgtRef = lx.ident();
          lx.expect(')');
        }
        cells.push_back(c);
        if (!lx.accept(',')) break;
      }
      lx.expect(')');
      lx.expect(':');
      t.cod = parse_typeexpr(lx, p);
      InferredContext ic = infer_context(p, cells, t.cod.dim());
      t.ctx = ic.ctx;
      t.cellNames = ic.cellNames;
      if (lx.accept_word("src")) {
        t.srcName = lx.ident();
        if (!lx.accept_word("tgt")) throw GmError("presentation parse: expected tgt");
        t.tgtName = lx.ident();
      }
      int n = t.cod.dim();
      if (n >= 1) {
        if (t.srcName.empty())
          throw GmError("term " + t.name + ": src/tgt required for dimension >= 1");
        const TermGen& sg = p.term(t.srcName);
        const TermGen& tg = p.term(t.tgtName);
        if (sg.cod.dim() != n - 1 || tg.cod.dim() != n - 1)
          throw GmError("term " + t.name + ": boundary dimension mismatch");
        ContextX sctx = boundary_context(p, t.ctx, true);
        ContextX tctx = boundary_context(p, t.ctx, false);
        if (sg.ctx != sctx || tg.ctx != tctx)
          throw GmError("term " + t.name + ": boundary context mismatch");
        if (!(sg.cod == src_type(p, t.cod)) || !(tg.cod == tgt_type(p, t.cod)))
          throw GmError("term " + t.name + ": boundary codomain mismatch");
        if (n >= 2 && (sg.srcName != tg.srcName || sg.tgtName != tg.tgtName))
          throw GmError("term " + t.name + ": globularity violation");
      } else if (!t.srcName.empty()) {
        throw GmError("term " + t.name + ": 0-term cannot have src/tgt");
      }
      p.terms.push_back(t);
    } else {
      throw GmError("presentation parse: expected 'type' or 'term' at offset " + std::to_string(lx.pos));
    }
  }
  return p;
}

std::string print_presentation(const Presentation& p) {
  std::ostringstream os;
  for (const auto& t : p.types) {
    os << "type " << t.name;
    if (t.dim > 0) os << " : " << t.srcName << " -> " << t.tgtName;
    os << "\n";
  }
  for (const auto& t : p.terms) {
    os << "term " << t.name << " (";
    CellTable tab(t.ctx.shape);
    for (int i = 0; i < tab.size(); ++i) {
      if (i) os << ", ";
      os << t.cellNames[i] << ":" << t.ctx.labels[i].str();
      if (tab.cells[i].dim() >= 1) {
        os << "(" << t.cellNames[tab.at(src_cell(tab.cells[i]))] << ","
           << t.cellNames[tab.at(tgt_cell(tab.cells[i]))] << ")";
      }
    }
    os << ") : " << t.cod.str();
    if (!t.srcName.empty()) os << " src " << t.srcName << " tgt " << t.tgtName;
    os << "\n";
  }
  return os.str();
}

ValidationReport validate(const Presentation& p) {
  ValidationReport r;
  std::set<std::string> seen;
  auto fail = [&](const std::string& m) { r.failures.push_back(m); };
  for (size_t i = 0; i < p.types.size(); ++i) {
    const TypeGen& t = p.types[i];
    if (!seen.insert(t.name).second) fail("duplicate name: " + t.name);
    if (t.dim > 0) {
      const TypeGen* s = nullptr;
      const TypeGen* g = nullptr;
      for (size_t j = 0; j < i; ++j) {
        if (p.types[j].name == t.srcName) s = &p.types[j];
        if (p.types[j].name == t.tgtName) g = &p.types[j];
      }
      if (!s || !g) {
        fail("type " + t.name + ": boundary not previously declared");
        continue;
      }
      if (s->dim != t.dim - 1 || g->dim != t.dim - 1)
        fail("type " + t.name + ": dimension mismatch");
      if (t.dim >= 2 && (s->srcName != g->srcName || s->tgtName != g->tgtName))
        fail("type " + t.name + ": globularity");
    }
  }
  for (size_t i = 0; i < p.terms.size(); ++i) {
    const TermGen& t = p.terms[i];
    if (!seen.insert(t.name).second) fail("duplicate name: " + t.name);
    try {
      check_context(p, t.ctx);
    } catch (const GmError& e) {
      fail("term " + t.name + ": " + e.what());
      continue;
    }
    if (t.cod.dim() != t.ctx.shape.dim) fail("term " + t.name + ": dimension mismatch");
    if (!p.find_type(t.cod.base)) fail("term " + t.name + ": unknown codomain base");
    int n = t.cod.dim();
    if (n >= 1) {
      const TermGen* sg = nullptr;
      const TermGen* tg = nullptr;
      for (size_t j = 0; j < i; ++j) {
        if (p.terms[j].name == t.srcName) sg = &p.terms[j];
        if (p.terms[j].name == t.tgtName) tg = &p.terms[j];
      }
      if (!sg || !tg) {
        fail("term " + t.name + ": boundary terms not previously declared");
        continue;
      }
      if (sg->ctx != boundary_context(p, t.ctx, true) ||
          tg->ctx != boundary_context(p, t.ctx, false))
        fail("term " + t.name + ": boundary context mismatch");
      if (!(sg->cod == src_type(p, t.cod)) || !(tg->cod == tgt_type(p, t.cod)))
        fail("term " + t.name + ": boundary codomain mismatch");
      if (n >= 2 && (sg->srcName != tg->srcName || sg->tgtName != tg->tgtName))
        fail("term " + t.name + ": globularity");
    }
  }
  return r;
}

ValidationReport validate_map(const GraphMap& m, const Presentation& dom,
                              const Presentation& cod) {
  ValidationReport r;
  auto fail = [&](const std::string& s) { r.failures.push_back(s); };
  for (const auto& t : dom.types) {
    auto it = m.typeMap.find(t.name);
    if (it == m.typeMap.end()) {
      fail("type " + t.name + " unmapped");
      continue;
    }
    const TypeGen* u = cod.find_type(it->second);
    if (!u) {
      fail("type " + t.name + " maps to unknown " + it->second);
      continue;
    }
    if (u->dim != t.dim) fail("type " + t.name + ": dimension not preserved");
    if (t.dim > 0) {
      if (m.typeMap.count(t.srcName) && m.typeMap.at(t.srcName) != u->srcName)
        fail("type " + t.name + ": source square does not commute");
      if (m.typeMap.count(t.tgtName) && m.typeMap.at(t.tgtName) != u->tgtName)
        fail("type " + t.name + ": target square does not commute");
    }
  }
  for (const auto& t : dom.terms) {
    auto it = m.termMap.find(t.name);
    if (it == m.termMap.end()) {
      fail("term " + t.name + " unmapped");
      continue;
    }
    const TermGen* u = cod.find_term(it->second);
    if (!u) {
      fail("term " + t.name + " maps to unknown " + it->second);
      continue;
    }
    if (u->ctx.shape != t.ctx.shape) fail("term " + t.name + ": context shape not preserved");
    if (u->cod.hom != t.cod.hom || (m.typeMap.count(t.cod.base) && m.typeMap.at(t.cod.base) != u->cod.base))
      fail("term " + t.name + ": codomain not preserved");
    if (!t.srcName.empty()) {
      if (m.termMap.count(t.srcName) && m.termMap.at(t.srcName) != u->srcName)
        fail("term " + t.name + ": source square does not commute");
      if (m.termMap.count(t.tgtName) && m.termMap.at(t.tgtName) != u->tgtName)
        fail("term " + t.name + ": target square does not commute");
    }
  }
  return r;
}

bool is_cofibration(const GraphMap& m, const Presentation& dom, const Presentation& cod) {
  if (!validate_map(m, dom, cod).ok()) throw GmError("is_cofibration: invalid map");
  std::set<std::string> seen;
  for (const auto& [k, v] : m.typeMap) {
    (void)k;
    if (!seen.insert("T:" + v).second) return false;
  }
  for (const auto& [k, v] : m.termMap) {
    (void)k;
    if (!seen.insert("t:" + v).second) return false;
  }
  return true;
}

bool is_arrow_theory(const Presentation& p) {
  for (const auto& t : p.types)
    if (t.dim != 0) return false;
  for (const auto& t : p.terms) {
    if (!t.ctx.shape.children.empty()) return false;  // single 0-cell contexts only
    if (t.ctx.labels.size() != 1 || t.ctx.labels[0].hom != 0) return false;
    if (t.cod.hom != t.cod.dim()) return false;  // codomain is H^n of a 0-type
  }
  return true;
}

}  // namespace gmult
