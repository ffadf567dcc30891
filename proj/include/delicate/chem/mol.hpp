#pragma once

#include <string>
#include <vector>

namespace delicate::chem {

struct Atom {
    std::string element;   // canonical symbol, e.g. "C", "Cl"
    int charge = 0;
    bool aromatic = false;
    int implicit_h = 0;
};

struct Bond {
    int a = 0;
    int b = 0;
    double order = 1.0;    // 1, 2, 3, or 1.5 for aromatic
    bool in_ring = false;
};

// Simple undirected molecular graph. Bond endpoints are valid and distinct,
// no duplicate bonds, implicit_h >= 0 on every atom.
struct MolGraph {
    std::vector<Atom> atoms;
    std::vector<Bond> bonds;

    int atom_count() const { return static_cast<int>(atoms.size()); }
    int bond_count() const { return static_cast<int>(bonds.size()); }

    // Number of connected components.
    int fragment_count() const;

    // Cycle rank E - V + C.
    int ring_count() const;

    std::vector<int> heavy_degree() const;
};

// Parses a SMILES string over the organic subset (B, C, N, O, P, S, F, Cl,
// Br, I), aromatic lowercase forms, bracket atoms with charge/explicit H,
// branches, ring closures (digits and %nn), bond symbols - = # :, and the
// `.` fragment separator. Stereo markers (/ \ @) and isotopes are parsed
// and discarded. Errors name the offending character position.
MolGraph parse_smiles(const std::string& smiles);

// Marks Bond::in_ring on every bond that lies on a cycle (non-bridge edges).
void mark_ring_bonds(MolGraph& mol);

}  // namespace delicate::chem
