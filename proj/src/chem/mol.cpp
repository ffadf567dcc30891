#include "delicate/chem/mol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "delicate/error.hpp"

namespace delicate::chem {

namespace {

struct ElementInfo {
    std::vector<int> valences;   // standard valences, ascending
    bool organic_subset;
    bool can_be_aromatic;
};

const std::unordered_map<std::string, ElementInfo>& element_table() {
    static const std::unordered_map<std::string, ElementInfo> table = {
        {"H", {{1}, false, false}},
        {"B", {{3}, true, true}},
        {"C", {{4}, true, true}},
        {"N", {{3}, true, true}},
        {"O", {{2}, true, true}},
        {"P", {{3, 5}, true, true}},
        {"S", {{2, 4, 6}, true, true}},
        {"F", {{1}, true, false}},
        {"Cl", {{1}, true, false}},
        {"Br", {{1}, true, false}},
        {"I", {{1}, true, false}},
    };
    return table;
}

// Charge-adjusted valence targets for the handful of charged species the
// corpus chemistry uses. Everything else keeps its element valences.
std::vector<int> adjusted_valences(const std::string& element, int charge) {
    if (element == "N" && charge == 1) return {4};
    if (element == "N" && charge == -1) return {2};
    if (element == "O" && charge == 1) return {3};
    if (element == "O" && charge == -1) return {1};
    if (element == "C" && charge == -1) return {3};
    if (element == "S" && charge == 1) return {3};
    return element_table().at(element).valences;
}

struct ParsedAtom {
    Atom atom;
    bool explicit_h = false;   // bracket atom: implicit_h was stated, not computed
    std::size_t position = 0;  // character offset, for error messages
};

struct RingOpening {
    int atom = -1;
    double pending_order = 0.0;  // 0 = unspecified
    std::size_t position = 0;
};

[[noreturn]] void fail(const std::string& what, std::size_t pos) {
    throw data_error(what + " at position " + std::to_string(pos));
}

}  // namespace

int MolGraph::fragment_count() const {
    const int n = atom_count();
    if (n == 0) return 0;
    std::vector<int> parent(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
    std::vector<int>& p = parent;
    auto find = [&p](int x) {
        while (p[static_cast<std::size_t>(x)] != x) {
            p[static_cast<std::size_t>(x)] = p[static_cast<std::size_t>(p[static_cast<std::size_t>(x)])];
            x = p[static_cast<std::size_t>(x)];
        }
        return x;
    };
    int components = n;
    for (const auto& bond : bonds) {
        int ra = find(bond.a), rb = find(bond.b);
        if (ra != rb) {
            p[static_cast<std::size_t>(ra)] = rb;
            --components;
        }
    }
    return components;
}

int MolGraph::ring_count() const {
    return bond_count() - atom_count() + fragment_count();
}

std::vector<int> MolGraph::heavy_degree() const {
    std::vector<int> deg(static_cast<std::size_t>(atom_count()), 0);
    for (const auto& bond : bonds) {
        if (atoms[static_cast<std::size_t>(bond.a)].element != "H" &&
            atoms[static_cast<std::size_t>(bond.b)].element != "H") {
            ++deg[static_cast<std::size_t>(bond.a)];
            ++deg[static_cast<std::size_t>(bond.b)];
        }
    }
    return deg;
}

void mark_ring_bonds(MolGraph& mol) {
    // Bridge detection: an edge is in a ring iff it is not a bridge.
    const int n = mol.atom_count();
    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n));  // (neighbor, bond idx)
    for (int i = 0; i < mol.bond_count(); ++i) {
        const auto& bond = mol.bonds[static_cast<std::size_t>(i)];
        adj[static_cast<std::size_t>(bond.a)].push_back({bond.b, i});
        adj[static_cast<std::size_t>(bond.b)].push_back({bond.a, i});
    }
    std::vector<int> disc(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
    int timer = 0;
    // Iterative DFS to avoid deep recursion on long chains.
    struct Frame {
        int node;
        int parent_edge;
        std::size_t next_child;
    };
    for (int start = 0; start < n; ++start) {
        if (disc[static_cast<std::size_t>(start)] != -1) continue;
        std::vector<Frame> stack;
        stack.push_back({start, -1, 0});
        disc[static_cast<std::size_t>(start)] = low[static_cast<std::size_t>(start)] = timer++;
        while (!stack.empty()) {
            Frame& fr = stack.back();
            auto& edges = adj[static_cast<std::size_t>(fr.node)];
            if (fr.next_child < edges.size()) {
                auto [nb, edge] = edges[fr.next_child++];
                if (edge == fr.parent_edge) continue;
                if (disc[static_cast<std::size_t>(nb)] == -1) {
                    disc[static_cast<std::size_t>(nb)] = low[static_cast<std::size_t>(nb)] = timer++;
                    stack.push_back({nb, edge, 0});
                } else {
                    low[static_cast<std::size_t>(fr.node)] =
                        std::min(low[static_cast<std::size_t>(fr.node)], disc[static_cast<std::size_t>(nb)]);
                    mol.bonds[static_cast<std::size_t>(edge)].in_ring = true;  // back edge closes a cycle
                }
            } else {
                int node = fr.node;
                int parent_edge = fr.parent_edge;
                stack.pop_back();
                if (!stack.empty()) {
                    int parent = stack.back().node;
                    low[static_cast<std::size_t>(parent)] =
                        std::min(low[static_cast<std::size_t>(parent)], low[static_cast<std::size_t>(node)]);
                    if (low[static_cast<std::size_t>(node)] <= disc[static_cast<std::size_t>(parent)])
                        mol.bonds[static_cast<std::size_t>(parent_edge)].in_ring = true;
                }
            }
        }
    }
}

namespace {

class SmilesParser {
public:
    explicit SmilesParser(const std::string& text) : text_(text) {}

    MolGraph parse() {
        while (pos_ < text_.size()) step();
        finish();
        MolGraph mol;
        mol.atoms.reserve(atoms_.size());
        for (auto& pa : atoms_) mol.atoms.push_back(pa.atom);
        mol.bonds = bonds_;
        assign_hydrogens(mol);
        mark_ring_bonds(mol);
        return mol;
    }

private:
    void step() {
        char c = text_[pos_];
        if (c == '(') {
            if (prev_ < 0) fail("branch opened before any atom", pos_);
            branch_stack_.push_back(prev_);
            ++pos_;
        } else if (c == ')') {
            if (branch_stack_.empty()) fail("unmatched closing parenthesis", pos_);
            prev_ = branch_stack_.back();
            branch_stack_.pop_back();
            ++pos_;
        } else if (c == '.') {
            if (pending_order_ != 0.0) fail("bond symbol before fragment separator", pos_);
            prev_ = -1;
            ++pos_;
        } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
            if (pending_order_ != 0.0) fail("two bond symbols in a row", pos_);
            switch (c) {
                case '=': pending_order_ = 2.0; break;
                case '#': pending_order_ = 3.0; break;
                case ':': pending_order_ = 1.5; break;
                default: pending_order_ = 1.0; break;  // '-', '/' and '\\' (stereo discarded)
            }
            ++pos_;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            ring_closure(c - '0', pos_);
            ++pos_;
        } else if (c == '%') {
            if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
                !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2])))
                fail("malformed %nn ring closure", pos_);
            ring_closure((text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0'), pos_);
            pos_ += 3;
        } else if (c == '[') {
            bracket_atom();
        } else {
            organic_atom();
        }
    }

    void organic_atom() {
        std::size_t start = pos_;
        char c = text_[pos_];
        std::string symbol;
        bool aromatic = false;
        if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
            symbol = "Cl";
            pos_ += 2;
        } else if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
            symbol = "Br";
            pos_ += 2;
        } else if (std::isupper(static_cast<unsigned char>(c))) {
            symbol = std::string(1, c);
            ++pos_;
        } else if (std::islower(static_cast<unsigned char>(c))) {
            symbol = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            aromatic = true;
            ++pos_;
        } else {
            fail(std::string("unexpected character '") + c + "'", pos_);
        }
        auto it = element_table().find(symbol);
        if (it == element_table().end() || !it->second.organic_subset)
            fail("unknown organic-subset element '" + symbol + "'", start);
        if (aromatic && !it->second.can_be_aromatic)
            fail("element '" + symbol + "' cannot be aromatic", start);
        Atom atom;
        atom.element = symbol;
        atom.aromatic = aromatic;
        add_atom(atom, /*explicit_h=*/false, start);
    }

    void bracket_atom() {
        std::size_t start = pos_;
        std::size_t close = text_.find(']', pos_);
        if (close == std::string::npos) fail("unterminated bracket", start);
        std::string body = text_.substr(pos_ + 1, close - pos_ - 1);
        pos_ = close + 1;

        std::size_t i = 0;
        auto more = [&]() { return i < body.size(); };
        // isotope: parsed and discarded
        while (more() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
        if (!more()) fail("bracket atom without element symbol", start);

        std::string symbol;
        bool aromatic = false;
        char c = body[i];
        if (std::isupper(static_cast<unsigned char>(c))) {
            symbol = std::string(1, c);
            ++i;
            if (more() && std::islower(static_cast<unsigned char>(body[i]))) {
                std::string two = symbol + body[i];
                if (element_table().count(two)) {
                    symbol = two;
                    ++i;
                }
            }
        } else if (std::islower(static_cast<unsigned char>(c))) {
            symbol = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            aromatic = true;
            ++i;
        } else {
            fail("bracket atom without element symbol", start);
        }
        auto it = element_table().find(symbol);
        if (it == element_table().end()) fail("unknown element '" + symbol + "'", start);
        if (aromatic && !it->second.can_be_aromatic)
            fail("element '" + symbol + "' cannot be aromatic", start);

        // chirality: parsed and discarded
        while (more() && body[i] == '@') ++i;

        int hydrogens = 0;
        if (more() && body[i] == 'H') {
            ++i;
            hydrogens = 1;
            if (more() && std::isdigit(static_cast<unsigned char>(body[i]))) {
                hydrogens = body[i] - '0';
                ++i;
            }
        }

        int charge = 0;
        if (more() && (body[i] == '+' || body[i] == '-')) {
            int sign = body[i] == '+' ? 1 : -1;
            char sym = body[i];
            ++i;
            if (more() && std::isdigit(static_cast<unsigned char>(body[i]))) {
                charge = sign * (body[i] - '0');
                ++i;
            } else {
                charge = sign;
                while (more() && body[i] == sym) {
                    charge += sign;
                    ++i;
                }
            }
        }

        // atom class: parsed and discarded
        if (more() && body[i] == ':') {
            ++i;
            if (!more() || !std::isdigit(static_cast<unsigned char>(body[i])))
                fail("malformed atom class", start);
            while (more() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
        }
        if (more()) fail("trailing characters in bracket atom", start);

        Atom atom;
        atom.element = symbol;
        atom.aromatic = aromatic;
        atom.charge = charge;
        atom.implicit_h = hydrogens;
        add_atom(atom, /*explicit_h=*/true, start);
    }

    void add_atom(const Atom& atom, bool explicit_h, std::size_t position) {
        int index = static_cast<int>(atoms_.size());
        atoms_.push_back({atom, explicit_h, position});
        if (prev_ >= 0) add_bond(prev_, index, consume_pending(index), position);
        else if (pending_order_ != 0.0)
            fail("bond symbol before first atom of a fragment", position);
        prev_ = index;
    }

    double consume_pending(int to_atom) {
        double order = pending_order_;
        pending_order_ = 0.0;
        if (order == 0.0) {
            // default bond: aromatic when both ends are aromatic
            if (atoms_[static_cast<std::size_t>(prev_)].atom.aromatic &&
                atoms_[static_cast<std::size_t>(to_atom)].atom.aromatic)
                return 1.5;
            return 1.0;
        }
        return order;
    }

    void add_bond(int a, int b, double order, std::size_t position) {
        if (a == b) fail("self-bond", position);
        for (const auto& bond : bonds_) {
            if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a))
                fail("duplicate bond between atoms " + std::to_string(a) + " and " + std::to_string(b),
                     position);
        }
        Bond bond;
        bond.a = a;
        bond.b = b;
        bond.order = order;
        bonds_.push_back(bond);
    }

    void ring_closure(int label, std::size_t position) {
        if (prev_ < 0) fail("ring closure before any atom", position);
        double order_here = pending_order_;
        pending_order_ = 0.0;
        auto it = open_rings_.find(label);
        if (it == open_rings_.end()) {
            open_rings_[label] = {prev_, order_here, position};
            return;
        }
        RingOpening opening = it->second;
        open_rings_.erase(it);
        double order;
        if (opening.pending_order != 0.0 && order_here != 0.0 && opening.pending_order != order_here)
            fail("conflicting bond orders for ring closure " + std::to_string(label), position);
        if (opening.pending_order != 0.0)
            order = opening.pending_order;
        else if (order_here != 0.0)
            order = order_here;
        else if (atoms_[static_cast<std::size_t>(opening.atom)].atom.aromatic &&
                 atoms_[static_cast<std::size_t>(prev_)].atom.aromatic)
            order = 1.5;
        else
            order = 1.0;
        add_bond(opening.atom, prev_, order, position);
    }

    void finish() {
        if (!branch_stack_.empty()) fail("unmatched opening parenthesis", text_.size());
        if (!open_rings_.empty()) {
            auto& [label, opening] = *open_rings_.begin();
            fail("unmatched ring closure " + std::to_string(label), opening.position);
        }
        if (pending_order_ != 0.0) fail("dangling bond symbol", text_.size());
        if (atoms_.empty()) fail("no atoms", 0);
    }

    // Bond-order sum rounded half-up; implicit H tops the atom up to the
    // smallest standard valence that fits. Bracket atoms keep their stated
    // hydrogen count.
    void assign_hydrogens(MolGraph& mol) const {
        std::vector<double> order_sum(static_cast<std::size_t>(mol.atom_count()), 0.0);
        for (const auto& bond : mol.bonds) {
            order_sum[static_cast<std::size_t>(bond.a)] += bond.order;
            order_sum[static_cast<std::size_t>(bond.b)] += bond.order;
        }
        for (int i = 0; i < mol.atom_count(); ++i) {
            const ParsedAtom& pa = atoms_[static_cast<std::size_t>(i)];
            if (pa.explicit_h) continue;
            Atom& atom = mol.atoms[static_cast<std::size_t>(i)];
            int sum = static_cast<int>(std::floor(order_sum[static_cast<std::size_t>(i)] + 0.5));
            int h = -1;
            for (int v : adjusted_valences(atom.element, atom.charge)) {
                if (v >= sum) {
                    h = v - sum;
                    break;
                }
            }
            if (h < 0)
                fail("valence impossible for " + atom.element + " with bond order sum " +
                         std::to_string(sum),
                     pa.position);
            atom.implicit_h = h;
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    std::vector<ParsedAtom> atoms_;
    std::vector<Bond> bonds_;
    std::vector<int> branch_stack_;
    std::map<int, RingOpening> open_rings_;
    int prev_ = -1;
    double pending_order_ = 0.0;
};

}  // namespace

MolGraph parse_smiles(const std::string& smiles) {
    if (smiles.empty()) throw data_error("cannot parse an empty SMILES string");
    SmilesParser parser(smiles);
    return parser.parse();
}

}  // namespace delicate::chem
