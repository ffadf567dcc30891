#include "delicate/chem/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "delicate/error.hpp"

namespace delicate::chem {

const std::array<std::string, kDescriptorCount>& descriptor_names() {
    static const std::array<std::string, kDescriptorCount> names = {
        "heavy_atoms",      "mol_weight",     "ring_count",      "aromatic_atoms",
        "aromatic_fraction", "hetero_atoms",  "nitrogen_count",  "oxygen_count",
        "halogen_count",    "sulfur_count",   "hbond_donors",    "hbond_acceptors",
        "rotatable_bonds",  "net_charge",     "total_implicit_h", "fragment_count",
    };
    return names;
}

double atomic_mass(const std::string& element) {
    static const std::unordered_map<std::string, double> masses = {
        {"H", 1.008},   {"B", 10.811},  {"C", 12.011},  {"N", 14.007},
        {"O", 15.999},  {"F", 18.998},  {"P", 30.974},  {"S", 32.06},
        {"Cl", 35.45},  {"Br", 79.904}, {"I", 126.904},
    };
    auto it = masses.find(element);
    if (it == masses.end()) throw data_error("no atomic mass for element " + element);
    return it->second;
}

DescriptorVector descriptors(const MolGraph& mol) {
    DescriptorVector d{};
    const auto heavy_deg = mol.heavy_degree();

    int heavy = 0, aromatic = 0, hetero = 0, nitrogen = 0, oxygen = 0, halogen = 0, sulfur = 0;
    int donors = 0, net_charge = 0, implicit_h = 0;
    double weight = 0.0;

    std::vector<int> explicit_h_neighbors(static_cast<std::size_t>(mol.atom_count()), 0);
    for (const auto& bond : mol.bonds) {
        if (mol.atoms[static_cast<std::size_t>(bond.a)].element == "H")
            ++explicit_h_neighbors[static_cast<std::size_t>(bond.b)];
        if (mol.atoms[static_cast<std::size_t>(bond.b)].element == "H")
            ++explicit_h_neighbors[static_cast<std::size_t>(bond.a)];
    }

    for (int i = 0; i < mol.atom_count(); ++i) {
        const Atom& atom = mol.atoms[static_cast<std::size_t>(i)];
        weight += atomic_mass(atom.element) + atom.implicit_h * atomic_mass("H");
        net_charge += atom.charge;
        implicit_h += atom.implicit_h;
        if (atom.element == "H") continue;
        ++heavy;
        if (atom.aromatic) ++aromatic;
        if (atom.element != "C") ++hetero;
        if (atom.element == "N") ++nitrogen;
        if (atom.element == "O") ++oxygen;
        if (atom.element == "S") ++sulfur;
        if (atom.element == "F" || atom.element == "Cl" || atom.element == "Br" || atom.element == "I")
            ++halogen;
        if ((atom.element == "N" || atom.element == "O") &&
            (atom.implicit_h + explicit_h_neighbors[static_cast<std::size_t>(i)]) >= 1)
            ++donors;
    }

    int rotatable = 0;
    for (const auto& bond : mol.bonds) {
        if (bond.in_ring || bond.order != 1.0) continue;
        const Atom& a = mol.atoms[static_cast<std::size_t>(bond.a)];
        const Atom& b = mol.atoms[static_cast<std::size_t>(bond.b)];
        if (a.element == "H" || b.element == "H") continue;
        if (heavy_deg[static_cast<std::size_t>(bond.a)] >= 2 &&
            heavy_deg[static_cast<std::size_t>(bond.b)] >= 2)
            ++rotatable;
    }

    d[kHeavyAtoms] = heavy;
    d[kMolWeight] = weight;
    d[kRingCount] = mol.ring_count();
    d[kAromaticAtoms] = aromatic;
    d[kAromaticFraction] = heavy > 0 ? static_cast<double>(aromatic) / heavy : 0.0;
    d[kHeteroAtoms] = hetero;
    d[kNitrogenCount] = nitrogen;
    d[kOxygenCount] = oxygen;
    d[kHalogenCount] = halogen;
    d[kSulfurCount] = sulfur;
    d[kHBondDonors] = donors;
    d[kHBondAcceptors] = nitrogen + oxygen;
    d[kRotatableBonds] = rotatable;
    d[kNetCharge] = net_charge;
    d[kTotalImplicitH] = implicit_h;
    d[kFragmentCount] = mol.fragment_count();
    return d;
}

NormStats fit_norm(const std::vector<DescriptorVector>& corpus) {
    if (corpus.empty()) throw data_error("cannot fit normalization on an empty corpus");
    if (corpus.size() < 2) throw data_error("normalization fit requires at least 2 molecules");
    NormStats stats;
    const double n = static_cast<double>(corpus.size());
    for (const auto& vec : corpus)
        for (int k = 0; k < kDescriptorCount; ++k) stats.mean[static_cast<std::size_t>(k)] += vec[static_cast<std::size_t>(k)];
    for (int k = 0; k < kDescriptorCount; ++k) stats.mean[static_cast<std::size_t>(k)] /= n;
    for (const auto& vec : corpus)
        for (int k = 0; k < kDescriptorCount; ++k) {
            double diff = vec[static_cast<std::size_t>(k)] - stats.mean[static_cast<std::size_t>(k)];
            stats.std[static_cast<std::size_t>(k)] += diff * diff;
        }
    for (int k = 0; k < kDescriptorCount; ++k) {
        double s = std::sqrt(stats.std[static_cast<std::size_t>(k)] / n);
        // columns that are constant up to accumulation round-off pass through
        double tolerance = 1e-12 * std::max(1.0, std::fabs(stats.mean[static_cast<std::size_t>(k)]));
        stats.std[static_cast<std::size_t>(k)] = s > tolerance ? s : 1.0;
    }
    return stats;
}

DescriptorVector apply_norm(const DescriptorVector& vec, const NormStats& stats) {
    DescriptorVector out{};
    for (int k = 0; k < kDescriptorCount; ++k) {
        double z = (vec[static_cast<std::size_t>(k)] - stats.mean[static_cast<std::size_t>(k)]) /
                   stats.std[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(k)] = std::clamp(z, -10.0, 10.0);
    }
    return out;
}

}  // namespace delicate::chem
