#pragma once

#include <array>
#include <string>
#include <vector>

#include "delicate/chem/mol.hpp"

namespace delicate::chem {

inline constexpr int kDescriptorCount = 16;

// Fixed descriptor layout. Indices are part of the model contract (the
// auxiliary prediction head emits exactly this vector).
enum DescriptorIndex : int {
    kHeavyAtoms = 0,
    kMolWeight = 1,
    kRingCount = 2,
    kAromaticAtoms = 3,
    kAromaticFraction = 4,
    kHeteroAtoms = 5,
    kNitrogenCount = 6,
    kOxygenCount = 7,
    kHalogenCount = 8,
    kSulfurCount = 9,
    kHBondDonors = 10,
    kHBondAcceptors = 11,
    kRotatableBonds = 12,
    kNetCharge = 13,
    kTotalImplicitH = 14,
    kFragmentCount = 15,
};

using DescriptorVector = std::array<double, kDescriptorCount>;

const std::array<std::string, kDescriptorCount>& descriptor_names();

// Atomic mass of a supported element symbol, in amu.
double atomic_mass(const std::string& element);

DescriptorVector descriptors(const MolGraph& mol);

// Per-descriptor mean and population standard deviation over a corpus.
// Constant descriptors get std 1 so they pass through normalization.
struct NormStats {
    std::array<double, kDescriptorCount> mean{};
    std::array<double, kDescriptorCount> std{};
};

NormStats fit_norm(const std::vector<DescriptorVector>& corpus);

// Z-score per descriptor, clipped to [-10, 10].
DescriptorVector apply_norm(const DescriptorVector& vec, const NormStats& stats);

}  // namespace delicate::chem
