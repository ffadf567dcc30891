#include "delicate/chem/io.hpp"

#include <fstream>

#include "delicate/error.hpp"

namespace delicate::chem {

std::vector<std::string> read_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open corpus file: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // `#` opens a comment only at line start or after whitespace; inside
        // a SMILES it is a triple bond and SMILES never contain spaces
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] != '#') continue;
            if (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t') {
                line.erase(i);
                break;
            }
        }
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        out.push_back(line.substr(start));
    }
    return out;
}

void write_corpus(const std::string& path, const std::vector<std::string>& smiles) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open corpus file for writing: " + path);
    for (const auto& s : smiles) out << s << '\n';
}

}  // namespace delicate::chem
