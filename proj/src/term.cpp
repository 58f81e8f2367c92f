#include "gmult/term.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace gmult {

namespace {

size_t hash_combine(size_t a, size_t b) {
  return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}
size_t hash_str(const std::string& s) { return std::hash<std::string>{}(s); }
size_t hash_type(const TypeExprX& t) { return hash_combine(hash_str(t.base), t.hom); }
size_t hash_cell(const CellAddress& a) {
  size_t h = 0x51ed;
  for (int i : a.path) h = hash_combine(h, static_cast<size_t>(i) + 1);
  return hash_combine(h, static_cast<size_t>(a.gap) + 77);
}

size_t hash_node(const TermNode& n) {
  size_t h = static_cast<size_t>(n.kind) * 0x9e3779b9;
  h = hash_combine(h, hash_type(n.type));
  h = hash_combine(h, hash_str(n.gen));
  h = hash_combine(h, hash_cell(n.jvar));
  if (n.body) h = hash_combine(h, n.body->hashv);
  if (n.js) h = hash_combine(h, n.js->hashv);
  if (n.jt) h = hash_combine(h, n.jt->hashv);
  if (n.args)
    for (const auto& c : n.args->comps) h = hash_combine(h, c->hashv);
  return h;
}

int node_size(const TermNode& n) {
  int s = 1;
  if (n.body) s += n.body->size;
  if (n.js) s += n.js->size;
  if (n.jt) s += n.jt->size;
  if (n.args)
    for (const auto& c : n.args->comps) s += c->size;
  return s;
}

TermPtr finish(TermNode n) {
  n.hashv = hash_node(n);
  n.size = node_size(n);
  return std::make_shared<const TermNode>(std::move(n));
}

bool subst_eq(const Subst& a, const Subst& b) {
  if (!(a.target == b.target)) return false;
  if (a.comps.size() != b.comps.size()) return false;
  for (size_t i = 0; i < a.comps.size(); ++i)
    if (!term_eq(a.comps[i], b.comps[i])) return false;
  return true;
}

}  // namespace

bool term_eq(const TermPtr& a, const TermPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->hashv != b->hashv) return false;
  if (a->kind != b->kind || !(a->type == b->type) || a->gen != b->gen || a->jvar != b->jvar)
    return false;
  if (!term_eq(a->body, b->body) || !term_eq(a->js, b->js) || !term_eq(a->jt, b->jt))
    return false;
  if (a->args.has_value() != b->args.has_value()) return false;
  if (a->args && !subst_eq(*a->args, *b->args)) return false;
  return true;
}

bool parallel(const TermPtr& a, const TermPtr& b) {
  return a->ctx == b->ctx && a->cod == b->cod;
}

std::vector<int> maximal_cells(const ContextX& ctx) {
  CellTable tab(ctx.shape);
  std::vector<bool> bounded(tab.size(), false);
  for (int i = 0; i < tab.size(); ++i) {
    const CellAddress& a = tab.cells[i];
    if (a.dim() >= 1) {
      bounded[tab.at(src_cell(a))] = true;
      bounded[tab.at(tgt_cell(a))] = true;
    }
  }
  std::vector<int> out;
  for (int i = 0; i < tab.size(); ++i)
    if (!bounded[i]) out.push_back(i);
  return out;
}

namespace {

// Derive the component at an arbitrary cell, walking up to a stored maximal one.
TermPtr derived_comp(const Presentation& p, const Subst& s, const CellTable& tab,
                     const CellAddress& a) {
  for (size_t i = 0; i < s.maximalIdx.size(); ++i)
    if (tab.cells[s.maximalIdx[i]] == a) return s.comps[i];
  // prefer a source parent, then a target parent, smallest address first
  int want = a.dim() + 1;
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < tab.size(); ++i) {
      const CellAddress& d = tab.cells[i];
      if (d.dim() != want) continue;
      if (pass == 0 && src_cell(d) == a)
        return term_src(p, derived_comp(p, s, tab, d));
      if (pass == 1 && tgt_cell(d) == a)
        return term_tgt(p, derived_comp(p, s, tab, d));
    }
  throw GmError("substitution: no component derivable at " + a.str());
}

}  // namespace

TermPtr Subst::comp_at(const CellAddress& a) const {
  throw GmError("Subst::comp_at requires a presentation; use subst_comp_at");
}

TermPtr subst_comp_at(const Presentation& p, const Subst& s, const CellAddress& a) {
  CellTable tab(s.target.shape);
  return derived_comp(p, s, tab, a);
}

bool Subst::identity() const {
  CellTable tab(target.shape);
  for (size_t i = 0; i < comps.size(); ++i) {
    if (comps[i]->kind != TermKind::Var) return false;
    if (!(comps[i]->type == target.labels[maximalIdx[i]])) return false;
  }
  return true;
}

Subst make_subst(const Presentation& p, const ContextX& target,
                 const std::vector<TermPtr>& maximalComps) {
  Subst s;
  s.target = target;
  CellTable tab(target.shape);
  s.maximalIdx = maximal_cells(target);
  if (maximalComps.size() != s.maximalIdx.size())
    throw GmError("substitution: expected " + std::to_string(s.maximalIdx.size()) +
                  " components, got " + std::to_string(maximalComps.size()));
  s.comps = maximalComps;
  for (size_t i = 0; i < s.comps.size(); ++i) {
    if (!s.comps[i]) throw GmError("substitution: null component");
    if (!(s.comps[i]->cod == target.labels[s.maximalIdx[i]]))
      throw GmError("substitution: codomain mismatch at " +
                    tab.cells[s.maximalIdx[i]].str() + ": component has " +
                    s.comps[i]->cod.str() + ", cell is " +
                    target.labels[s.maximalIdx[i]].str());
  }
  // Full component family and pasting validity.
  std::vector<TermPtr> full(tab.size());
  for (int i = 0; i < tab.size(); ++i) full[i] = derived_comp(p, s, tab, tab.cells[i]);
  for (int i = 0; i < tab.size(); ++i) {
    const CellAddress& a = tab.cells[i];
    if (a.dim() == 0) continue;
    TermPtr bs = term_src(p, full[i]);
    TermPtr bt = term_tgt(p, full[i]);
    const TermPtr& cs = full[tab.at(src_cell(a))];
    const TermPtr& ct = full[tab.at(tgt_cell(a))];
    if (!term_eq(bs, cs) && !eq_defn(p, bs, cs))
      throw GmError("substitution: components do not paste at source of " + a.str());
    if (!term_eq(bt, ct) && !eq_defn(p, bt, ct))
      throw GmError("substitution: components do not paste at target of " + a.str());
  }
  // Domain context and the per-component region embeddings.
  PdOfPds d;
  d.outer = target.shape;
  for (int i = 0; i < tab.size(); ++i) d.inner[tab.cells[i]] = full[i]->ctx.shape;
  MultiplyResult mr = multiply_with_embeddings(d);
  s.domain.shape = mr.tree;
  CellTable domTab(s.domain.shape);
  s.domain.labels.assign(domTab.size(), TypeExprX{});
  std::vector<bool> seen(domTab.size(), false);
  s.regions.resize(tab.size());
  for (int i = 0; i < tab.size(); ++i) {
    CellTable compTab(full[i]->ctx.shape);
    const auto& em = mr.embed.at(tab.cells[i]);
    s.regions[i].resize(compTab.size());
    for (int j = 0; j < compTab.size(); ++j) {
      CellAddress img = em.at(compTab.cells[j]);
      s.regions[i][j] = img;
      int di = domTab.at(img);
      const TypeExprX& lbl = full[i]->ctx.labels[j];
      if (seen[di] && !(s.domain.labels[di] == lbl))
        throw GmError("substitution: conflicting domain labels");
      s.domain.labels[di] = lbl;
      seen[di] = true;
    }
  }
  for (bool b : seen)
    if (!b) throw GmError("substitution: uncovered domain cell");
  return s;
}

Subst identity_subst(const Presentation& p, const ContextX& ctx) {
  std::vector<TermPtr> comps;
  CellTable tab(ctx.shape);
  for (int i : maximal_cells(ctx)) comps.push_back(mk_var(p, ctx.labels[i]));
  Subst s = make_subst(p, ctx, comps);
  if (!(s.domain == ctx)) throw GmError("identity substitution: domain mismatch");
  return s;
}

Subst restrict_subst(const Presentation& p, const Subst& s, bool source) {
  ContextX btarget = boundary_context(p, s.target, source);
  int n = s.target.shape.dim;
  auto emb = boundary_embed(s.target.shape, n - 1, source);
  std::vector<TermPtr> comps;
  CellTable btab(btarget.shape);
  for (int i : maximal_cells(btarget))
    comps.push_back(subst_comp_at(p, s, emb.at(btab.cells[i])));
  return make_subst(p, btarget, comps);
}

Subst compose_subst(const Presentation& p, const Subst& outer, const Subst& inner) {
  if (!(outer.target == inner.domain))
    throw GmError("compose: substitution domains do not match");
  CellTable tab(inner.target.shape);
  std::vector<TermPtr> comps;
  for (int i : maximal_cells(inner.target)) {
    TermPtr c = derived_comp(p, inner, tab, tab.cells[i]);
    CellTable ctab(c->ctx.shape);
    std::vector<TermPtr> subComps;
    for (int j : maximal_cells(c->ctx))
      subComps.push_back(subst_comp_at(p, outer, inner.regions[i][j]));
    Subst sub = make_subst(p, c->ctx, subComps);
    comps.push_back(compose(p, sub, c));
  }
  return make_subst(p, inner.target, comps);
}

// ---------------------------------------------------------------------------
// Constructors

TermPtr mk_var(const Presentation& p, const TypeExprX& a) {
  TermNode n;
  n.kind = TermKind::Var;
  n.type = a;
  n.ctx = globe_context(p, a);
  n.cod = a;
  return finish(std::move(n));
}

TermPtr mk_gen(const Presentation& p, const std::string& name, const Subst& args) {
  const TermGen& g = p.term(name);
  if (!(args.target == g.ctx)) throw GmError("mk_gen: argument context mismatch for " + name);
  TermNode n;
  n.kind = TermKind::Gen;
  n.gen = name;
  n.args = args;
  n.ctx = args.domain;
  n.cod = g.cod;
  return finish(std::move(n));
}

TermPtr mk_gen(const Presentation& p, const std::string& name) {
  return mk_gen(p, name, identity_subst(p, p.term(name).ctx));
}

TermPtr mk_refl(const Presentation& p, const TermPtr& e) {
  TypeExprX a = e->cod;
  ContextX opctx = promote_context(globe_context(p, a));
  Subst args = make_subst(p, opctx, {e});
  TermNode n;
  n.kind = TermKind::Refl;
  n.type = a;
  n.args = args;
  n.ctx = args.domain;
  n.cod = hom_type(a);
  return finish(std::move(n));
}

ContextExtension extend_context(const Presentation& p, const ContextX& gamma,
                                const CellAddress& x) {
  if (x.dim() >= gamma.shape.dim)
    throw GmError("extend_context: variable dimension must be below context dimension");
  CellTable gtab(gamma.shape);
  int xi = gtab.at(x);
  ContextExtension out;
  BlowUp bu = blow_up(gamma.shape, x);
  out.hCell = bu.newCell;
  out.gapLeft = bu.gapLeft;
  out.gapRight = bu.gapRight;
  out.remap = bu.remap;
  out.extended.shape = bu.tree;
  CellTable etab(bu.tree);
  out.extended.labels.assign(etab.size(), TypeExprX{});
  for (int i = 0; i < gtab.size(); ++i)
    out.extended.labels[etab.at(bu.remap.at(gtab.cells[i]))] = gamma.labels[i];
  out.extended.labels[etab.at(bu.newCell)] = hom_type(gamma.labels[xi]);
  out.extended.labels[etab.at(bu.gapRight)] = gamma.labels[xi];
  check_context(p, out.extended);

  std::vector<TermPtr> comps;
  std::map<CellAddress, CellAddress> inv;
  for (const auto& [o, nw] : bu.remap) inv[nw] = o;
  for (int i : maximal_cells(out.extended)) {
    const CellAddress& c = etab.cells[i];
    if (c == bu.newCell) {
      comps.push_back(mk_refl(p, mk_var(p, gamma.labels[xi])));
    } else {
      auto it = inv.find(c);
      if (it == inv.end()) throw GmError("extend_context: unexpected maximal cell");
      comps.push_back(mk_var(p, gamma.labels[gtab.at(it->second)]));
    }
  }
  out.reflSubst = make_subst(p, out.extended, comps);
  if (!(out.reflSubst.domain == gamma))
    throw GmError("extend_context: reflexivity substitution has wrong domain");
  return out;
}

TermPtr mk_j1(const Presentation& p, const CellAddress& x, const TermPtr& body,
              const std::optional<Subst>& argsOpt) {
  int n = body->dim();
  if (n < 1) throw GmError("mk_j1: body must have dimension >= 1");
  if (x.dim() != n - 1) throw GmError("mk_j1: variable must have dimension n-1");
  ContextExtension ext = extend_context(p, body->ctx, x);
  Subst args = argsOpt ? *argsOpt : identity_subst(p, ext.extended);
  if (!(args.target == ext.extended)) throw GmError("mk_j1: argument context mismatch");
  TermNode nd;
  nd.kind = TermKind::J1;
  nd.jvar = x;
  nd.body = body;
  nd.args = args;
  nd.ctx = args.domain;
  nd.cod = body->cod;
  return finish(std::move(nd));
}

TermPtr mk_j2(const Presentation& p, const CellAddress& x, const TermPtr& js,
              const TermPtr& jt, const TermPtr& body, const std::optional<Subst>& argsOpt) {
  int n = body->dim();
  if (n < 2) throw GmError("mk_j2: body must have dimension >= 2");
  int k = x.dim();
  if (k > n - 2) throw GmError("mk_j2: variable dimension must be at most n-2");
  ContextExtension ext = extend_context(p, body->ctx, x);
  // Source/target fillers live over the extension of the boundary contexts at
  // the same variable; for k <= n-2 the truncation keeps x's address.
  for (int side = 0; side < 2; ++side) {
    bool source = side == 0;
    const TermPtr& filler = source ? js : jt;
    ContextX bctx = boundary_context(p, body->ctx, source);
    ContextExtension bext = extend_context(p, bctx, x);
    if (!(filler->ctx == bext.extended))
      throw GmError("mk_j2: filler context mismatch");
    TypeExprX want = source ? src_type(p, body->cod) : tgt_type(p, body->cod);
    if (!(filler->cod == want)) throw GmError("mk_j2: filler codomain mismatch");
    TermPtr plugged = compose(p, bext.reflSubst, filler);
    TermPtr bound = source ? term_src(p, body) : term_tgt(p, body);
    if (!eq_defn(p, plugged, bound))
      throw GmError("mk_j2: J-side-condition failure");
  }
  Subst args = argsOpt ? *argsOpt : identity_subst(p, ext.extended);
  if (!(args.target == ext.extended)) throw GmError("mk_j2: argument context mismatch");
  TermNode nd;
  nd.kind = TermKind::J2;
  nd.jvar = x;
  nd.body = body;
  nd.js = js;
  nd.jt = jt;
  nd.args = args;
  nd.ctx = args.domain;
  nd.cod = body->cod;
  return finish(std::move(nd));
}

namespace {

TermPtr with_args(const TermPtr& e, Subst args) {
  TermNode n;
  n.kind = e->kind;
  n.type = e->type;
  n.gen = e->gen;
  n.jvar = e->jvar;
  n.body = e->body;
  n.js = e->js;
  n.jt = e->jt;
  n.args = std::move(args);
  n.ctx = n.args->domain;
  n.cod = e->cod;
  return finish(std::move(n));
}

TermPtr gen_boundary_term(const Presentation& p, const std::string& name, bool source) {
  const TermGen& g = p.term(name);
  if (g.srcName.empty()) throw GmError("generator has no boundary: " + name);
  return mk_gen(p, source ? g.srcName : g.tgtName);
}

CellAddress top_cell_of(const ContextX& ctx) {
  auto mx = maximal_cells(ctx);
  if (mx.size() != 1) throw GmError("context does not have a unique maximal cell");
  CellTable tab(ctx.shape);
  return tab.cells[mx[0]];
}

}  // namespace

TermPtr term_src(const Presentation& p, const TermPtr& e) {
  if (e->srcCache) return e->srcCache;
  if (e->dim() < 1) throw GmError("term_src: 0-term has no source");
  TermPtr out;
  switch (e->kind) {
    case TermKind::Var:
      out = mk_var(p, src_type(p, e->type));
      break;
    case TermKind::Refl:
      out = subst_comp_at(p, *e->args, top_cell_of(e->args->target));
      break;
    case TermKind::Gen:
      out = compose(p, restrict_subst(p, *e->args, true), gen_boundary_term(p, e->gen, true));
      break;
    case TermKind::J1:
      out = compose(p, restrict_subst(p, *e->args, true), term_src(p, e->body));
      break;
    case TermKind::J2:
      out = compose(p, restrict_subst(p, *e->args, true), e->js);
      break;
  }
  e->srcCache = out;
  return out;
}

TermPtr term_tgt(const Presentation& p, const TermPtr& e) {
  if (e->tgtCache) return e->tgtCache;
  if (e->dim() < 1) throw GmError("term_tgt: 0-term has no target");
  TermPtr out;
  switch (e->kind) {
    case TermKind::Var:
      out = mk_var(p, tgt_type(p, e->type));
      break;
    case TermKind::Refl:
      out = subst_comp_at(p, *e->args, top_cell_of(e->args->target));
      break;
    case TermKind::Gen:
      out = compose(p, restrict_subst(p, *e->args, false), gen_boundary_term(p, e->gen, false));
      break;
    case TermKind::J1:
      out = compose(p, restrict_subst(p, *e->args, false), term_tgt(p, e->body));
      break;
    case TermKind::J2:
      out = compose(p, restrict_subst(p, *e->args, false), e->jt);
      break;
  }
  e->tgtCache = out;
  return out;
}

TermPtr compose(const Presentation& p, const Subst& s, const TermPtr& e) {
  if (!(s.target == e->ctx)) throw GmError("compose: context mismatch");
  if (e->kind == TermKind::Var) return subst_comp_at(p, s, top_cell_of(e->ctx));
  return with_args(e, compose_subst(p, s, *e->args));
}

TermPtr compose_single(const Presentation& p, const TermPtr& e1, const TermPtr& e2) {
  CellAddress top = top_cell_of(e2->ctx);
  (void)top;
  Subst s = make_subst(p, e2->ctx, {e1});
  return compose(p, s, e2);
}

// ---------------------------------------------------------------------------
// Reduction: orient r_x ; J_x(f) = f left to right.

namespace {

bool j_redex(const Presentation& p, const TermPtr& e, CellAddress* hOut) {
  if (e->kind != TermKind::J1 && e->kind != TermKind::J2) return false;
  BlowUp bu = blow_up(e->body->ctx.shape, e->jvar);
  TermPtr h = subst_comp_at(p, *e->args, bu.newCell);
  if (h->kind != TermKind::Refl) return false;
  *hOut = bu.newCell;
  return true;
}

TermPtr contract(const Presentation& p, const TermPtr& e) {
  BlowUp bu = blow_up(e->body->ctx.shape, e->jvar);
  TermPtr reflComp = subst_comp_at(p, *e->args, bu.newCell);
  TermPtr plugged = subst_comp_at(p, *reflComp->args, top_cell_of(reflComp->args->target));
  CellTable gtab(e->body->ctx.shape);
  std::vector<TermPtr> comps;
  for (int i : maximal_cells(e->body->ctx)) {
    const CellAddress& c = gtab.cells[i];
    if (c == e->jvar)
      comps.push_back(plugged);
    else
      comps.push_back(subst_comp_at(p, *e->args, bu.remap.at(c)));
  }
  Subst tilde = make_subst(p, e->body->ctx, comps);
  TermPtr out = compose(p, tilde, e->body);
  if (!(out->ctx == e->ctx) || !(out->cod == e->cod))
    throw GmError("reduce: contraction changed the boundary");
  return out;
}

}  // namespace

TermPtr reduce(const Presentation& p, const TermPtr& e) {
  if (e->reduceCache) return e->reduceCache;
  TermPtr out;
  if (e->kind == TermKind::Var) {
    out = e;
  } else {
    TermNode n;
    n.kind = e->kind;
    n.type = e->type;
    n.gen = e->gen;
    n.jvar = e->jvar;
    n.body = e->body ? reduce(p, e->body) : nullptr;
    n.js = e->js ? reduce(p, e->js) : nullptr;
    n.jt = e->jt ? reduce(p, e->jt) : nullptr;
    if (n.body && !(n.body->ctx == e->body->ctx))
      throw GmError("reduce: body context changed");
    std::vector<TermPtr> comps;
    for (const auto& c : e->args->comps) comps.push_back(reduce(p, c));
    n.args = make_subst(p, e->args->target, comps);
    n.ctx = n.args->domain;
    n.cod = e->cod;
    TermPtr rebuilt = finish(std::move(n));
    CellAddress h;
    if (j_redex(p, rebuilt, &h))
      out = reduce(p, contract(p, rebuilt));
    else
      out = rebuilt;
  }
  e->reduceCache = out;
  out->reduceCache = out;
  return out;
}

bool eq_defn(const Presentation& p, const TermPtr& a, const TermPtr& b) {
  if (!parallel(a, b)) throw GmError("eq_defn: boundary mismatch");
  return term_eq(reduce(p, a), reduce(p, b));
}

// ---------------------------------------------------------------------------
// Transformations

Transformation trans_identity(const Presentation& p, const TermPtr& f) {
  return Transformation{f, f, mk_refl(p, f)};
}

namespace {

// J on an identity term, extended at the source or target boundary cell of
// the identity's globe context: the mediator consuming an H-cell pasted onto
// a term along its (d-1)-boundary.
TermPtr mediator(const Presentation& p, const TypeExprX& b, bool atSource) {
  ContextX gctx = globe_context(p, b);
  int d = b.dim();
  CellAddress edge;
  edge.path.assign(d - 1, 0);
  edge.gap = atSource ? 0 : 1;
  return mk_j1(p, edge, mk_var(p, b));
}

}  // namespace

TermPtr trans_compose_right(const Presentation& p, const Transformation& phi, const TermPtr& g) {
  int d = g->dim();
  if (d < 1) throw GmError("trans_compose_right: term must have dimension >= 1");
  if (phi.body->dim() != d) throw GmError("trans_compose_right: dimension mismatch");
  TermPtr m = mediator(p, g->cod, true);
  CellTable tab(m->ctx.shape);
  std::vector<TermPtr> comps;
  for (int i : maximal_cells(m->ctx)) {
    const CellAddress& c = tab.cells[i];
    if (m->ctx.labels[i].hom > 0 && c.dim() == d)
      comps.push_back(phi.body);
    else
      comps.push_back(g);
  }
  Subst s = make_subst(p, m->ctx, comps);
  return compose(p, s, m);
}

TermPtr trans_compose_left(const Presentation& p, const TermPtr& g, const Transformation& phi) {
  int d = g->dim();
  if (d < 1) throw GmError("trans_compose_left: term must have dimension >= 1");
  if (phi.body->dim() != d) throw GmError("trans_compose_left: dimension mismatch");
  TermPtr m = mediator(p, g->cod, false);
  CellTable tab(m->ctx.shape);
  std::vector<TermPtr> comps;
  for (int i : maximal_cells(m->ctx)) {
    const CellAddress& c = tab.cells[i];
    if (m->ctx.labels[i].hom > 0 && c.dim() == d && label_at(m->ctx, c).hom > 0 &&
        hom_type(tgt_type(p, g->cod)) == m->ctx.labels[i])
      comps.push_back(phi.body);
    else
      comps.push_back(g);
  }
  Subst s = make_subst(p, m->ctx, comps);
  return compose(p, s, m);
}

namespace {

// Recover Gamma and the blown variable from an H-cell of Delta.
struct Unextension {
  ContextX gamma;
  CellAddress x;
  ContextExtension ext;
};

Unextension unextend(const Presentation& p, const ContextX& delta, const CellAddress& hCell) {
  CellTable dtab(delta.shape);
  const TypeExprX& hl = delta.labels[dtab.at(hCell)];
  if (hl.hom == 0) throw GmError("unextend: cell is not H-labeled");
  Collapse col = collapse_cell(delta.shape, hCell);
  Unextension out;
  out.gamma.shape = col.tree;
  CellTable gtab(col.tree);
  out.gamma.labels.assign(gtab.size(), TypeExprX{});
  for (const auto& [o, nw] : col.remap)
    out.gamma.labels[gtab.at(nw)] = delta.labels[dtab.at(o)];
  out.x = col.merged;
  out.ext = extend_context(p, out.gamma, out.x);
  if (!(out.ext.extended == delta))
    throw GmError("unextend: context is not an H-extension at that cell");
  return out;
}

}  // namespace

Transformation reflex_equiv(const Presentation& p, const TermPtr& f, const TermPtr& f2,
                            const CellAddress& hCell) {
  if (!parallel(f, f2)) throw GmError("reflex_equiv: terms not parallel");
  Unextension ux = unextend(p, f->ctx, hCell);
  TermPtr rf = compose(p, ux.ext.reflSubst, f);
  TermPtr rf2 = compose(p, ux.ext.reflSubst, f2);
  if (!eq_defn(p, rf, rf2))
    throw GmError("reflex_equiv: r_x precomposites are not definitionally equal");
  TermPtr body = mk_refl(p, rf);
  TermPtr tr = mk_j2(p, ux.x, f, f2, body);
  return Transformation{f, f2, tr};
}

// ---------------------------------------------------------------------------
// Surface syntax

namespace {

struct TermLexer {
  std::string s;
  size_t pos = 0;
  void skip() {
    while (pos < s.size() && isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eof() {
    skip();
    return pos >= s.size();
  }
  char peek() {
    skip();
    return pos < s.size() ? s[pos] : '\0';
  }
  bool accept(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }
  bool accept2(const char* two) {
    skip();
    if (s.compare(pos, 2, two) == 0) {
      pos += 2;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c))
      throw GmError(std::string("term parse: expected '") + c + "' at offset " +
                    std::to_string(pos));
  }
  std::string ident() {
    skip();
    size_t st = pos;
    while (pos < s.size() && (isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    if (st == pos) throw GmError("term parse: expected identifier at offset " + std::to_string(pos));
    return s.substr(st, pos - st);
  }
  int number() {
    skip();
    size_t st = pos;
    while (pos < s.size() && isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (st == pos) throw GmError("term parse: expected number");
    return std::stoi(s.substr(st, pos - st));
  }
};

struct TermParser {
  const Presentation& p;
  TermLexer lx;

  TypeExprX typeExpr() {
    lx.skip();
    if (lx.s.compare(lx.pos, 1, "H") == 0) {
      size_t save = lx.pos;
      ++lx.pos;
      int k = 1;
      if (lx.accept('^')) k = lx.number();
      if (lx.accept('(')) {
        TypeExprX inner = typeExpr();
        lx.expect(')');
        inner.hom += k;
        return inner;
      }
      lx.pos = save;
    }
    return make_type(p, lx.ident(), 0);
  }

  // Named components for an operation context. Generator contexts use the
  // declared cell names; built-in contexts use canonical x<i> names.
  Subst argsFor(const ContextX& ctx, const std::vector<std::string>* declaredNames) {
    CellTable tab(ctx.shape);
    auto nameOf = [&](int i) {
      return declaredNames ? (*declaredNames)[i] : "x" + std::to_string(i);
    };
    std::map<std::string, TermPtr> given;
    if (lx.accept('{')) {
      for (;;) {
        std::string nm = lx.ident();
        if (!lx.accept2(":=")) throw GmError("term parse: expected ':='");
        given[nm] = expr();
        if (!lx.accept(',')) break;
      }
      lx.expect('}');
    }
    std::vector<TermPtr> comps;
    for (int i : maximal_cells(ctx)) {
      auto it = given.find(nameOf(i));
      if (it != given.end()) {
        comps.push_back(it->second);
        given.erase(it);
      } else {
        comps.push_back(mk_var(p, ctx.labels[i]));
      }
    }
    if (!given.empty())
      throw GmError("term parse: assignment to unknown or non-maximal cell '" +
                    given.begin()->first + "'");
    return make_subst(p, ctx, comps);
  }

  TermPtr atom() {
    lx.skip();
    if (lx.accept('(')) {
      TermPtr e = expr();
      lx.expect(')');
      return e;
    }
    std::string name = lx.ident();
    if (name == "id") {
      lx.expect('(');
      TypeExprX t = typeExpr();
      lx.expect(')');
      return mk_var(p, t);
    }
    if (name == "r") {
      lx.expect('(');
      TypeExprX t = typeExpr();
      lx.expect(')');
      ContextX opctx = promote_context(globe_context(p, t));
      if (lx.peek() == '{') {
        Subst s = argsFor(opctx, nullptr);
        CellAddress top = top_cell_of(opctx);
        return mk_refl_with(s, top);
      }
      return mk_refl(p, mk_var(p, t));
    }
    if (name == "J") {
      lx.expect('[');
      std::string var = lx.ident();
      TermPtr jsT, jtT;
      bool hasFillers = false;
      if (lx.accept(';')) {
        hasFillers = true;
        jsT = expr();
        lx.expect(',');
        jtT = expr();
      }
      lx.expect(']');
      lx.expect('(');
      TermPtr body = expr();
      lx.expect(')');
      CellTable btab(body->ctx.shape);
      if (var.size() < 2 || var[0] != 'x')
        throw GmError("term parse: J variable must be a canonical cell name x<i>");
      int idx = std::stoi(var.substr(1));
      if (idx < 0 || idx >= btab.size()) throw GmError("term parse: J variable out of range");
      CellAddress x = btab.cells[idx];
      ContextExtension ext = extend_context(p, body->ctx, x);
      std::optional<Subst> args;
      if (lx.peek() == '{') args = argsFor(ext.extended, nullptr);
      if (hasFillers) return mk_j2(p, x, jsT, jtT, body, args);
      return mk_j1(p, x, body, args);
    }
    const TermGen* g = p.find_term(name);
    if (!g) throw GmError("term parse: unknown generator " + name);
    if (lx.peek() == '{') return mk_gen(p, name, argsFor(g->ctx, &g->cellNames));
    return mk_gen(p, name);
  }

  TermPtr mk_refl_with(const Subst& s, const CellAddress& top) {
    TermPtr e = subst_comp_at(p, s, top);
    TermPtr r = mk_refl(p, e);
    // mk_refl already uses exactly this substitution shape; rebuild to honor
    // any non-derived lower assignments (there are none: top is unique maximal).
    return r;
  }

  TermPtr expr() {
    TermPtr e = atom();
    while (lx.peek() == ';') {
      ++lx.pos;
      TermPtr f = atom();
      e = compose_single(p, e, f);
    }
    return e;
  }
};

}  // namespace

TermPtr parse_term(const Presentation& p, const std::string& text) {
  TermParser tp{p, TermLexer{text}};
  TermPtr e = tp.expr();
  if (!tp.lx.eof()) throw GmError("term parse: trailing input");
  return e;
}

namespace {

void print_args(const TermPtr& e, const Presentation& p, std::ostringstream& os,
                const std::vector<std::string>* names) {
  const Subst& s = *e->args;
  if (s.identity()) return;
  os << "{";
  bool first = true;
  for (size_t i = 0; i < s.comps.size(); ++i) {
    int idx = s.maximalIdx[i];
    std::string nm = names ? (*names)[idx] : "x" + std::to_string(idx);
    if (!first) os << ", ";
    first = false;
    os << nm << " := " << print_term(s.comps[i], p);
  }
  os << "}";
}

}  // namespace

std::string print_term(const TermPtr& e, const Presentation& p) {
  std::ostringstream os;
  switch (e->kind) {
    case TermKind::Var:
      os << "id(" << e->type.str() << ")";
      break;
    case TermKind::Refl:
      os << "r(" << e->type.str() << ")";
      print_args(e, p, os, nullptr);
      break;
    case TermKind::Gen: {
      os << e->gen;
      const TermGen& g = p.term(e->gen);
      print_args(e, p, os, &g.cellNames);
      break;
    }
    case TermKind::J1:
    case TermKind::J2: {
      CellTable btab(e->body->ctx.shape);
      os << "J[x" << btab.at(e->jvar);
      if (e->kind == TermKind::J2)
        os << "; " << print_term(e->js, p) << ", " << print_term(e->jt, p);
      os << "](" << print_term(e->body, p) << ")";
      print_args(e, p, os, nullptr);
      break;
    }
  }
  return os.str();
}

}  // namespace gmult
