#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hiertest/util.hpp"

namespace hiertest {

// A hierarchy is a nested family of attributes (subsets of the pattern set)
// arranged as a tree, one singleton leaf per pattern. Attribute ids follow
// depth-first order; every attribute spans a contiguous range of pattern
// indices, which makes subset/disjointness checks interval arithmetic.

struct Attribute {
    std::string name;
    int parent = -1;
    std::vector<int> children;
    int depth = 0;       // root depth 0
    int lo = 0, hi = 0;  // pattern index range [lo, hi)
    bool perfect = false;

    int scope() const { return hi - lo; }
};

struct HierarchySpec {
    std::string id;
    std::vector<HierarchySpec> children;  // empty = leaf naming a pattern
};

struct Hierarchy {
    std::vector<std::string> patterns;
    std::vector<Attribute> attrs;
    std::vector<int> roots;
    bool augmented = false;
    double unit_post_cost = 1.0;  // c*

    int attr_count() const { return static_cast<int>(attrs.size()); }
    int pattern_count() const { return static_cast<int>(patterns.size()); }

    std::uint64_t attr_mask(int a) const {
        const Attribute& at = attrs[a];
        if (at.scope() == 64) return ~0ull;
        return ((1ull << at.scope()) - 1) << at.lo;
    }

    std::uint64_t all_mask() const {
        int n = pattern_count();
        return n == 64 ? ~0ull : (1ull << n) - 1;
    }

    bool contains(int outer, int inner) const {
        return attrs[outer].lo <= attrs[inner].lo && attrs[inner].hi <= attrs[outer].hi;
    }

    bool is_original_leaf(int a) const {
        const Attribute& at = attrs[a];
        if (at.perfect || at.scope() != 1) return false;
        if (at.children.empty()) return true;
        return at.children.size() == 1 && attrs[at.children[0]].perfect;
    }

    int find(const std::string& name) const {
        for (int i = 0; i < attr_count(); ++i)
            if (attrs[i].name == name) return i;
        return -1;
    }

    int depth() const {
        int d = 0;
        for (const auto& a : attrs) d = std::max(d, a.depth + 1);
        return d;
    }
};

namespace detail {

struct ProtoNode {
    std::string name;
    bool perfect = false;
    std::vector<ProtoNode> children;
};

inline void proto_collect(const ProtoNode& node, int parent, int depth, Hierarchy& h,
                          std::set<std::string>& pattern_names,
                          std::set<std::string>& attr_names) {
    int id = h.attr_count();
    if (!attr_names.insert(node.name).second)
        throw ConfigError("duplicate attribute id '" + node.name + "' (non-tree spec)");
    Attribute a;
    a.name = node.name;
    a.parent = parent;
    a.depth = depth;
    a.perfect = node.perfect;
    h.attrs.push_back(a);
    if (parent >= 0) h.attrs[parent].children.push_back(id);

    if (node.perfect) {
        if (!node.children.empty())
            throw ConfigError("perfect test '" + node.name + "' cannot have children");
        if (parent < 0 || h.attrs[parent].hi != h.attrs[parent].lo + 1)
            throw ConfigError("perfect test '" + node.name + "' must hang under a singleton leaf");
        h.attrs[id].lo = h.attrs[parent].lo;
        h.attrs[id].hi = h.attrs[parent].hi;
        return;
    }

    bool pattern_leaf = true;  // leaf = all children (if any) are perfect tests
    int perfect_children = 0;
    for (const auto& c : node.children) {
        if (c.perfect)
            ++perfect_children;
        else
            pattern_leaf = false;
    }
    if (!pattern_leaf && perfect_children > 0)
        throw ConfigError("attribute '" + node.name + "' mixes perfect and ordinary children");
    if (perfect_children > 1)
        throw ConfigError("leaf '" + node.name + "' has more than one perfect child");

    if (pattern_leaf) {
        if (!pattern_names.insert(node.name).second)
            throw ConfigError("duplicate pattern id '" + node.name + "'");
        h.attrs[id].lo = h.pattern_count();
        h.patterns.push_back(node.name);
        h.attrs[id].hi = h.pattern_count();
        for (const auto& c : node.children)
            proto_collect(c, id, depth + 1, h, pattern_names, attr_names);
        return;
    }
    h.attrs[id].lo = h.pattern_count();
    for (const auto& c : node.children)
        proto_collect(c, id, depth + 1, h, pattern_names, attr_names);
    h.attrs[id].hi = h.pattern_count();
    if (h.attrs[id].scope() == 0) throw ConfigError("empty attribute '" + node.name + "'");
}

inline Hierarchy build_from_protos(const std::vector<ProtoNode>& protoroots,
                                   double unit_post_cost, bool augmented) {
    Hierarchy h;
    h.unit_post_cost = unit_post_cost;
    h.augmented = augmented;
    std::set<std::string> pattern_names, attr_names;
    for (const auto& r : protoroots) {
        h.roots.push_back(h.attr_count());
        proto_collect(r, -1, 0, h, pattern_names, attr_names);
    }
    if (h.patterns.empty()) throw ConfigError("hierarchy spec has no patterns");
    if (h.pattern_count() > 64)
        throw GuardError("hierarchy exceeds 64 patterns (desk-scale limit)");
    return h;
}

inline ProtoNode spec_to_proto(const HierarchySpec& s) {
    ProtoNode p;
    p.name = s.id;
    for (const auto& c : s.children) p.children.push_back(spec_to_proto(c));
    return p;
}

inline ProtoNode attr_to_proto(const Hierarchy& h, int id) {
    ProtoNode p;
    p.name = h.attrs[id].name;
    p.perfect = h.attrs[id].perfect;
    for (int c : h.attrs[id].children) p.children.push_back(attr_to_proto(h, c));
    return p;
}

}  // namespace detail

inline Hierarchy build_forest(const std::vector<HierarchySpec>& roots,
                              double unit_post_cost = 1.0) {
    std::vector<detail::ProtoNode> protos;
    protos.reserve(roots.size());
    for (const auto& r : roots) protos.push_back(detail::spec_to_proto(r));
    return detail::build_from_protos(protos, unit_post_cost, false);
}

inline Hierarchy build_hierarchy(const HierarchySpec& spec, double unit_post_cost = 1.0) {
    return build_forest({spec}, unit_post_cost);
}

/// Appends one perfect singleton test (power 1, cost c*) under every original
/// leaf. Attribute ids are re-assigned in depth-first order of the result.
inline Hierarchy augment(const Hierarchy& h, double c_star) {
    if (h.augmented) throw ValidationError("hierarchy is already augmented");
    if (c_star < 0) throw ConfigError("c_star must be nonnegative");
    std::vector<detail::ProtoNode> protos;
    for (int r : h.roots) protos.push_back(detail::attr_to_proto(h, r));
    struct Rec {
        static void add_perfect(detail::ProtoNode& n) {
            if (n.children.empty() && !n.perfect) {
                detail::ProtoNode p;
                p.name = n.name + "!";
                p.perfect = true;
                n.children.push_back(p);
                return;
            }
            for (auto& c : n.children) add_perfect(c);
        }
    };
    for (auto& p : protos) Rec::add_perfect(p);
    return detail::build_from_protos(protos, c_star, true);
}

/// The hierarchy of all attributes contained in attribute b.
inline Hierarchy subhierarchy(const Hierarchy& h, int b) {
    if (b < 0 || b >= h.attr_count()) throw ValidationError("unknown attribute id");
    detail::ProtoNode proto = detail::attr_to_proto(h, b);
    bool aug = h.augmented;
    if (proto.perfect) {  // degenerates to a one-attribute hierarchy
        proto.perfect = false;
        aug = false;
    }
    return detail::build_from_protos({proto}, h.unit_post_cost, aug);
}

/// Complete dyadic hierarchy of depth L over 2^(L-1) patterns.
inline HierarchySpec dyadic_spec(int L) {
    if (L < 1) throw ConfigError("dyadic depth must be >= 1");
    struct Rec {
        static HierarchySpec node(int level, int L, int index) {
            HierarchySpec s;
            if (level == L) {
                s.id = "y" + std::to_string(index + 1);
                return s;
            }
            s.id = "A" + std::to_string(level) + "." + std::to_string(index + 1);
            s.children.push_back(node(level + 1, L, 2 * index));
            s.children.push_back(node(level + 1, L, 2 * index + 1));
            return s;
        }
    };
    if (L == 1) {
        HierarchySpec s;
        s.id = "y1";
        return s;
    }
    return Rec::node(1, L, 0);
}

inline Hierarchy dyadic_hierarchy(int L, double unit_post_cost = 1.0) {
    return build_hierarchy(dyadic_spec(L), unit_post_cost);
}

/// Single-pattern chain of L nested attributes (a vine).
inline HierarchySpec vine_spec(int L) {
    if (L < 1) throw ConfigError("vine length must be >= 1");
    HierarchySpec leaf;
    leaf.id = "y1";
    HierarchySpec cur = leaf;
    for (int l = L - 1; l >= 1; --l) {
        HierarchySpec n;
        n.id = "A" + std::to_string(l);
        n.children.push_back(cur);
        cur = n;
    }
    return cur;
}

inline Hierarchy vine_hierarchy(int L, double unit_post_cost = 1.0) {
    return build_hierarchy(vine_spec(L), unit_post_cost);
}

struct Covering {
    std::vector<int> attrs;  // ascending ids; pattern sets partition the leaves

    bool operator<(const Covering& o) const { return attrs < o.attrs; }
    bool operator==(const Covering& o) const { return attrs == o.attrs; }
};

/// All antichain coverings (each pattern covered exactly once), deterministic
/// order: at every attribute the covering {A} precedes the child combinations.
inline std::vector<Covering> enumerate_coverings(const Hierarchy& h, int guard = 16) {
    if (h.attr_count() > guard)
        throw GuardError("enumerate_coverings: hierarchy has " +
                         std::to_string(h.attr_count()) + " attributes, guard is " +
                         std::to_string(guard));
    struct Rec {
        const Hierarchy& h;
        std::vector<std::vector<int>> covers(int a) const {
            std::vector<std::vector<int>> out{{a}};
            const auto& ch = h.attrs[a].children;
            if (ch.empty()) return out;
            std::vector<std::vector<int>> combo{{}};
            for (int c : ch) {
                auto sub = covers(c);
                std::vector<std::vector<int>> next;
                for (const auto& head : combo)
                    for (const auto& tail : sub) {
                        auto v = head;
                        v.insert(v.end(), tail.begin(), tail.end());
                        next.push_back(std::move(v));
                    }
                combo = std::move(next);
            }
            out.insert(out.end(), combo.begin(), combo.end());
            return out;
        }
    } rec{h};
    std::vector<std::vector<int>> combo{{}};
    for (int r : h.roots) {
        auto sub = rec.covers(r);
        std::vector<std::vector<int>> next;
        for (const auto& head : combo)
            for (const auto& tail : sub) {
                auto v = head;
                v.insert(v.end(), tail.begin(), tail.end());
                next.push_back(std::move(v));
            }
        combo = std::move(next);
    }
    std::vector<Covering> out;
    out.reserve(combo.size());
    for (auto& v : combo) {
        std::sort(v.begin(), v.end());
        out.push_back(Covering{std::move(v)});
    }
    return out;
}

inline bool is_covering(const Hierarchy& h, const std::vector<int>& attrs) {
    std::uint64_t u = 0;
    for (int a : attrs) u |= h.attr_mask(a);
    return u == h.all_mask();
}

/// Structural invariant check; returns human-readable violations (empty = ok).
inline std::vector<std::string> hierarchy_violations(const Hierarchy& h) {
    std::vector<std::string> out;
    int n = h.attr_count();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const auto& a = h.attrs[i];
            const auto& b = h.attrs[j];
            bool disjoint = a.hi <= b.lo || b.hi <= a.lo;
            bool nested = (a.lo <= b.lo && b.hi <= a.hi) || (b.lo <= a.lo && a.hi <= b.hi);
            if (!disjoint && !nested)
                out.push_back("nesting violated between '" + a.name + "' and '" + b.name + "'");
        }
    for (int i = 0; i < n; ++i) {
        const auto& a = h.attrs[i];
        if (!a.children.empty() && !a.perfect) {
            int pos = a.lo;
            bool contiguous = true;
            int span = 0;
            for (int c : a.children) {
                if (h.attrs[c].perfect) {
                    span = a.scope();  // perfect child copies the singleton
                    continue;
                }
                if (h.attrs[c].lo != pos) contiguous = false;
                pos = h.attrs[c].hi;
                span += h.attrs[c].scope();
            }
            if (!contiguous || span != a.scope())
                out.push_back("children of '" + a.name + "' do not partition it");
        }
        if (a.children.empty() && !a.perfect && a.scope() != 1)
            out.push_back("leaf '" + a.name + "' is not a singleton");
    }
    if (h.augmented) {
        for (int i = 0; i < n; ++i)
            if (h.is_original_leaf(i) && (h.attrs[i].children.size() != 1 ||
                                          !h.attrs[h.attrs[i].children[0]].perfect))
                out.push_back("augmented leaf '" + h.attrs[i].name + "' lacks a perfect child");
    }
    return out;
}

}  // namespace hiertest
