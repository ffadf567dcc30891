#include "delicate/chem/vocab.hpp"

#include <fstream>

#include "delicate/chem/tokenizer.hpp"
#include "delicate/error.hpp"

namespace delicate::chem {

const std::vector<std::string>& Vocab::special_tokens() {
    static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    return specials;
}

Vocab::Vocab() {
    for (const auto& tok : special_tokens()) {
        index_.emplace(tok, static_cast<int>(tokens_.size()));
        tokens_.push_back(tok);
    }
}

int Vocab::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    index_.emplace(token, id);
    tokens_.push_back(token);
    return id;
}

int Vocab::lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(const std::string& token) const { return index_.count(token) != 0; }

const std::string& Vocab::token_of(int id) const {
    if (id < 0 || id >= size()) throw data_error("vocab id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open vocab file for writing: " + path);
    for (const auto& tok : tokens_) out << tok << '\n';
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open vocab file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    if (lines.size() < static_cast<std::size_t>(kNumSpecials))
        throw data_error("vocab file too short: " + path);
    for (int i = 0; i < kNumSpecials; ++i) {
        if (lines[static_cast<std::size_t>(i)] != special_tokens()[static_cast<std::size_t>(i)])
            throw data_error("vocab file is missing special token at id " + std::to_string(i));
    }
    Vocab v;
    for (std::size_t i = kNumSpecials; i < lines.size(); ++i) {
        if (lines[i].empty()) throw data_error("empty token at vocab line " + std::to_string(i + 1));
        if (v.contains(lines[i])) throw data_error("duplicate token in vocab file: " + lines[i]);
        v.add(lines[i]);
    }
    return v;
}

Vocab build_vocab(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw data_error("cannot build a vocab from an empty corpus");
    Vocab v;
    for (const auto& smiles : corpus) {
        for (const auto& tok : scan_tokens(smiles)) v.add(tok);
    }
    return v;
}

}  // namespace delicate::chem
