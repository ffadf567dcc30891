#pragma once

#include <string>
#include <vector>

namespace delicate::chem {

// One SMILES per line; blank lines and `#` comments ignored.
std::vector<std::string> read_corpus(const std::string& path);

void write_corpus(const std::string& path, const std::vector<std::string>& smiles);

}  // namespace delicate::chem
