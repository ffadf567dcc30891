#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace delicate::chem {

// Fixed token <-> id table. Ids 0..4 are the reserved special tokens, in
// this order; observed tokens follow in first-occurrence order.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumSpecials = 5;

    static const std::vector<std::string>& special_tokens();

    Vocab();

    // Appends `token` if absent; returns its id either way.
    int add(const std::string& token);

    // Id for `token`, or kUnk when not present.
    int lookup(const std::string& token) const;

    bool contains(const std::string& token) const;

    const std::string& token_of(int id) const;

    int size() const { return static_cast<int>(tokens_.size()); }

    bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

    const std::vector<std::string>& tokens() const { return tokens_; }

    // One token per line; line number == id.
    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Specials at ids 0..4, then observed tokens in first-occurrence order.
// Deterministic for a fixed corpus order.
Vocab build_vocab(const std::vector<std::string>& corpus);

}  // namespace delicate::chem
