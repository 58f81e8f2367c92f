#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gmult/multigraph.hpp"
#include "gmult/pd.hpp"

namespace gmult {

enum class TermKind { Var, Gen, Refl, J1, J2 };

struct TermNode;
using TermPtr = std::shared_ptr<const TermNode>;

// A substitution into `target`. Only the components at maximal cells (cells
// that bound nothing above them) are stored; every other component is the
// source or target of some stored one and is derived on demand.
struct Subst {
  ContextX target;
  std::vector<int> maximalIdx;   // indices into the canonical cell order of target
  std::vector<TermPtr> comps;    // parallel to maximalIdx
  ContextX domain;
  // regions[i], for the i-th canonical cell c of target: the addresses in
  // `domain` of the cells of ctx(component at c), in canonical order.
  std::vector<std::vector<CellAddress>> regions;

  bool identity() const;
};

TermPtr subst_comp_at(const Presentation& p, const Subst& s, const CellAddress& a);

struct TermNode {
  TermKind kind = TermKind::Var;
  TypeExprX type;      // Var: the variable's type; Refl: the A of r_A
  std::string gen;     // Gen
  CellAddress jvar;    // J1/J2: variable of ctx(body) at which H was added
  TermPtr body, js, jt;
  std::optional<Subst> args;  // absent for Var

  ContextX ctx;
  TypeExprX cod;
  int size = 1;  // structural size: 1 per operation node, over stored data

  mutable TermPtr srcCache, tgtCache, reduceCache;
  size_t hashv = 0;

  int dim() const { return cod.dim(); }
};

bool term_eq(const TermPtr& a, const TermPtr& b);
std::string print_term(const TermPtr& e, const Presentation& p);

TermPtr mk_var(const Presentation& p, const TypeExprX& a);
TermPtr mk_gen(const Presentation& p, const std::string& name, const Subst& args);
TermPtr mk_gen(const Presentation& p, const std::string& name);  // identity args
TermPtr mk_refl(const Presentation& p, const TermPtr& e);        // e ; r_{cod e}
TermPtr mk_j1(const Presentation& p, const CellAddress& x, const TermPtr& body,
              const std::optional<Subst>& args = std::nullopt);
TermPtr mk_j2(const Presentation& p, const CellAddress& x, const TermPtr& js,
              const TermPtr& jt, const TermPtr& body,
              const std::optional<Subst>& args = std::nullopt);

// Substitution constructors. Components are given for the maximal cells of
// `target` in canonical order; everything lower is derived.
Subst make_subst(const Presentation& p, const ContextX& target,
                 const std::vector<TermPtr>& maximalComps);
Subst identity_subst(const Presentation& p, const ContextX& ctx);
Subst restrict_subst(const Presentation& p, const Subst& s, bool source);
Subst compose_subst(const Presentation& p, const Subst& outer, const Subst& inner);

std::vector<int> maximal_cells(const ContextX& ctx);

TermPtr term_src(const Presentation& p, const TermPtr& e);
TermPtr term_tgt(const Presentation& p, const TermPtr& e);

TermPtr compose(const Presentation& p, const Subst& s, const TermPtr& e);

// Plug e1 at the unique maximal cell of ctx(e2); boundaries derived.
TermPtr compose_single(const Presentation& p, const TermPtr& e1, const TermPtr& e2);

TermPtr reduce(const Presentation& p, const TermPtr& e);
bool eq_defn(const Presentation& p, const TermPtr& a, const TermPtr& b);
bool parallel(const TermPtr& a, const TermPtr& b);

// Gamma + H_x together with the reflexivity substitution r_x : Gamma -> Gamma + H_x.
struct ContextExtension {
  ContextX extended;
  CellAddress hCell;          // the new H-labeled cell
  CellAddress gapLeft, gapRight;
  std::map<CellAddress, CellAddress> remap;  // cells of Gamma -> cells of extended
  Subst reflSubst;
};
ContextExtension extend_context(const Presentation& p, const ContextX& gamma,
                                const CellAddress& x);

struct Transformation {
  TermPtr src, tgt, body;  // body : ctx(src)+ -> H_{cod src}, s(body) ~ src, t(body) ~ tgt
};

Transformation trans_identity(const Presentation& p, const TermPtr& f);

// (phi . g); m  with m = J on an identity term: composition of a transformation
// with a term along its source boundary. Requires t(body phi) = s(g).
TermPtr trans_compose_right(const Presentation& p, const Transformation& phi, const TermPtr& g);
// Dual: plugs phi at the target boundary of g. Requires t(g) = s(body phi).
TermPtr trans_compose_left(const Presentation& p, const TermPtr& g, const Transformation& phi);

// Lemma "reflexEquiv": for parallel f, f' over Gamma + H_x with r_x;f = r_x;f'
// up to reduction, J2 with fillers f, f' over the body r_x;f;r_A.
// `hCell` names the H-cell in ctx(f) that x's extension created.
Transformation reflex_equiv(const Presentation& p, const TermPtr& f, const TermPtr& f2,
                            const CellAddress& hCell);

// Surface syntax.
TermPtr parse_term(const Presentation& p, const std::string& text);

}  // namespace gmult
