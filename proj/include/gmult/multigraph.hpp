#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gmult/pd.hpp"

namespace gmult {

// A type expression over a presentation: hom-fold applied to a generator.
// hom = 0 is the bare generator; hom = j denotes H^j(base).
struct TypeExprX {
  std::string base;
  int hom = 0;
  int baseDim = 0;

  int dim() const { return baseDim + hom; }
  friend bool operator==(const TypeExprX& a, const TypeExprX& b) {
    return a.base == b.base && a.hom == b.hom;
  }
  friend bool operator!=(const TypeExprX& a, const TypeExprX& b) { return !(a == b); }
  friend bool operator<(const TypeExprX& a, const TypeExprX& b) {
    if (a.base != b.base) return a.base < b.base;
    return a.hom < b.hom;
  }
  std::string str() const;
};

// A pasting-shaped context: every cell of the shape carries a type whose
// dimension matches the cell's and whose boundaries match the shape's.
struct ContextX {
  PastingTree shape;
  std::vector<TypeExprX> labels;  // indexed by CellTable canonical order

  friend bool operator==(const ContextX& a, const ContextX& b) {
    return a.shape == b.shape && a.labels == b.labels;
  }
  friend bool operator!=(const ContextX& a, const ContextX& b) { return !(a == b); }
  std::string str() const;
};

struct TypeGen {
  std::string name;
  int dim = 0;
  std::string srcName, tgtName;  // empty for dim 0
};

struct TermGen {
  std::string name;
  ContextX ctx;
  TypeExprX cod;
  std::string srcName, tgtName;            // empty for dim 0
  std::vector<std::string> cellNames;      // canonical order of ctx cells
};

struct Presentation {
  std::vector<TypeGen> types;
  std::vector<TermGen> terms;

  const TypeGen* find_type(const std::string& n) const;
  const TermGen* find_term(const std::string& n) const;
  const TypeGen& type(const std::string& n) const;
  const TermGen& term(const std::string& n) const;
};

TypeExprX make_type(const Presentation& p, const std::string& base, int hom);
TypeExprX hom_type(const TypeExprX& t);           // H(t)
TypeExprX src_type(const Presentation& p, const TypeExprX& t);
TypeExprX tgt_type(const Presentation& p, const TypeExprX& t);
TypeExprX iter_src_type(const Presentation& p, TypeExprX t, int downTo);
TypeExprX iter_tgt_type(const Presentation& p, TypeExprX t, int downTo);

const TypeExprX& label_at(const ContextX& c, const CellAddress& a);
ContextX globe_context(const Presentation& p, const TypeExprX& a);
ContextX promote_context(const ContextX& c);
ContextX boundary_context(const Presentation& p, const ContextX& c, bool source);
void check_context(const Presentation& p, const ContextX& c);

struct ValidationReport {
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

Presentation parse_presentation(const std::string& text);
std::string print_presentation(const Presentation& p);
ValidationReport validate(const Presentation& p);

struct GraphMap {
  std::map<std::string, std::string> typeMap;
  std::map<std::string, std::string> termMap;
};

ValidationReport validate_map(const GraphMap& m, const Presentation& dom, const Presentation& cod);
bool is_cofibration(const GraphMap& m, const Presentation& dom, const Presentation& cod);
bool is_arrow_theory(const Presentation& p);

// Shape inference for term contexts written as flat cell lists.
struct InferredContext {
  ContextX ctx;
  std::vector<std::string> cellNames;                 // canonical order
  std::map<std::string, CellAddress> nameToCell;
};

struct RawCell {
  std::string name;
  TypeExprX type;
  std::string srcRef, tgtRef;  // empty for dim-0 cells
};

InferredContext infer_context(const Presentation& p, const std::vector<RawCell>& cells,
                              int contextDim);

}  // namespace gmult
