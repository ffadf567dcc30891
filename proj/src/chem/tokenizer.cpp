#include "delicate/chem/tokenizer.hpp"

#include "delicate/error.hpp"

namespace delicate::chem {

std::vector<std::string> scan_tokens(const std::string& smiles) {
    if (smiles.empty()) throw data_error("cannot tokenize an empty SMILES string");
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t n = smiles.size();
    while (i < n) {
        char c = smiles[i];
        if (c == '[') {
            std::size_t close = smiles.find(']', i);
            if (close == std::string::npos)
                throw data_error("unterminated bracket at position " + std::to_string(i));
            out.push_back(smiles.substr(i, close - i + 1));
            i = close + 1;
        } else if (c == '%') {
            if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(smiles[i + 1])) ||
                !std::isdigit(static_cast<unsigned char>(smiles[i + 2])))
                throw data_error("malformed %nn ring closure at position " + std::to_string(i));
            out.push_back(smiles.substr(i, 3));
            i += 3;
        } else if ((c == 'C' || c == 'B') && i + 1 < n &&
                   ((c == 'C' && smiles[i + 1] == 'l') || (c == 'B' && smiles[i + 1] == 'r'))) {
            out.push_back(smiles.substr(i, 2));
            i += 2;
        } else {
            out.push_back(std::string(1, c));
            i += 1;
        }
    }
    return out;
}

TokenSeq tokenize(const std::string& smiles, const Vocab& vocab, int max_len) {
    TokenSeq seq;
    auto raw = scan_tokens(smiles);
    seq.ids.reserve(raw.size() + 2);
    seq.ids.push_back(Vocab::kCls);
    for (const auto& tok : raw) seq.ids.push_back(vocab.lookup(tok));
    seq.ids.push_back(Vocab::kSep);
    if (max_len > 0 && seq.length() > max_len)
        throw data_error("token sequence of length " + std::to_string(seq.length()) +
                         " exceeds maximum " + std::to_string(max_len));
    return seq;
}

std::string detokenize(const TokenSeq& seq, const Vocab& vocab) {
    std::string out;
    for (int id : seq.ids) {
        if (vocab.is_special(id)) continue;
        out += vocab.token_of(id);
    }
    return out;
}

}  // namespace delicate::chem
