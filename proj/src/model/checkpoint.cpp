#include "delicate/model/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace delicate::model {

using tensor::Precision;
using tensor::Shape;
using tensor::Tensor;

namespace {

constexpr char kMagic[4] = {'D', 'L', 'C', 'T'};
constexpr std::int64_t kDropoutScale = 1000000;  // dropout_p stored in micro-units

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw io_error("cannot open checkpoint for writing: " + path);
    }

    void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), n); }

    void u8(std::uint8_t v) { bytes(&v, 1); }

    void u32(std::uint32_t v) {
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(b, 4);
    }

    void u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(b, 8);
    }

    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    bool good() const { return static_cast<bool>(out_); }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw io_error("cannot open checkpoint: " + path);
    }

    void bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), n);
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw CheckpointError(CheckpointError::Reason::truncated, "checkpoint file is truncated");
    }

    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }

    std::uint32_t u32() {
        std::uint8_t b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        std::uint8_t b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

    std::string str() {
        std::uint32_t n = u32();
        if (n > (1u << 20))
            throw CheckpointError(CheckpointError::Reason::truncated,
                                  "implausible string length in checkpoint");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

    bool at_eof() { return in_.peek() == std::ifstream::traits_type::eof(); }

private:
    std::ifstream in_;
};

std::vector<std::pair<std::string, std::int64_t>> config_fields(const ModelConfig& c) {
    return {
        {"hidden_size", c.hidden_size},
        {"num_layers", c.num_layers},
        {"num_heads", c.num_heads},
        {"ffn_size", c.ffn_size},
        {"max_seq_len", c.max_seq_len},
        {"vocab_size", c.vocab_size},
        {"share_layers", c.share_layers ? 1 : 0},
        {"dropout_p_micro", static_cast<std::int64_t>(std::llround(c.dropout_p * kDropoutScale))},
    };
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);

    auto fields = config_fields(store.config);
    w.u32(static_cast<std::uint32_t>(fields.size()));
    for (const auto& [name, value] : fields) {
        w.str(name);
        w.i64(value);
    }

    w.u32(static_cast<std::uint32_t>(store.params.size()));
    for (const auto& [name, param] : store.params) {
        w.str(name);
        const Tensor& t = param.value;
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) w.u64(static_cast<std::uint64_t>(t.dim(d)));
        w.u8(static_cast<std::uint8_t>(store.precision));
        if (store.precision == Precision::f32) {
            for (std::int64_t i = 0; i < t.numel(); ++i) {
                auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(t.data()[i]));
                std::uint8_t b[4];
                for (int k = 0; k < 4; ++k) b[k] = static_cast<std::uint8_t>(bits >> (8 * k));
                w.bytes(b, 4);
            }
        } else {
            for (std::int64_t i = 0; i < t.numel(); ++i) {
                auto bits = std::bit_cast<std::uint64_t>(t.data()[i]);
                w.u64(bits);
            }
        }
    }
    if (!w.good()) throw io_error("failed writing checkpoint: " + path);
}

ParamStore load_checkpoint(const std::string& path, const ModelConfig* expect) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError(CheckpointError::Reason::bad_magic_or_version,
                              "not a checkpoint file (bad magic): " + path);
    std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw CheckpointError(CheckpointError::Reason::bad_magic_or_version,
                              "unsupported checkpoint version " + std::to_string(version));

    ModelConfig config;
    std::uint32_t nfields = r.u32();
    for (std::uint32_t i = 0; i < nfields; ++i) {
        std::string name = r.str();
        std::int64_t value = r.i64();
        if (name == "hidden_size") config.hidden_size = static_cast<int>(value);
        else if (name == "num_layers") config.num_layers = static_cast<int>(value);
        else if (name == "num_heads") config.num_heads = static_cast<int>(value);
        else if (name == "ffn_size") config.ffn_size = static_cast<int>(value);
        else if (name == "max_seq_len") config.max_seq_len = static_cast<int>(value);
        else if (name == "vocab_size") config.vocab_size = static_cast<int>(value);
        else if (name == "share_layers") config.share_layers = value != 0;
        else if (name == "dropout_p_micro") config.dropout_p = static_cast<double>(value) / kDropoutScale;
        else
            throw CheckpointError(CheckpointError::Reason::mismatch,
                                  "unknown config field in checkpoint: " + name);
    }
    config.validate();
    if (expect != nullptr && !config.same_architecture(*expect))
        throw CheckpointError(CheckpointError::Reason::mismatch,
                              "checkpoint architecture does not match the requested config "
                              "(tied/untied or dimensions differ)");

    auto layout = param_layout(config);
    std::uint32_t ntensors = r.u32();
    if (ntensors != layout.size())
        throw CheckpointError(CheckpointError::Reason::mismatch,
                              "checkpoint holds " + std::to_string(ntensors) + " tensors, config needs " +
                                  std::to_string(layout.size()));

    ParamStore store;
    store.config = config;
    bool precision_set = false;
    // ParamMap iterates sorted by name; the file was written the same way.
    std::map<std::string, Shape> expected(layout.begin(), layout.end());
    for (std::uint32_t i = 0; i < ntensors; ++i) {
        std::string name = r.str();
        auto it = expected.find(name);
        if (it == expected.end())
            throw CheckpointError(CheckpointError::Reason::mismatch,
                                  "unexpected tensor in checkpoint: " + name);
        std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<std::int64_t>(r.u64());
        if (shape != it->second)
            throw CheckpointError(CheckpointError::Reason::mismatch,
                                  "tensor '" + name + "' has shape " + tensor::shape_str(shape) +
                                      ", config needs " + tensor::shape_str(it->second));
        std::uint8_t tag = r.u8();
        if (tag != 4 && tag != 8)
            throw CheckpointError(CheckpointError::Reason::mismatch,
                                  "bad precision tag in tensor '" + name + "'");
        Precision prec = static_cast<Precision>(tag);
        if (!precision_set) {
            store.precision = prec;
            precision_set = true;
        } else if (store.precision != prec) {
            throw CheckpointError(CheckpointError::Reason::mismatch,
                                  "mixed precision tags in checkpoint");
        }
        Tensor t(shape);
        if (prec == Precision::f32) {
            for (std::int64_t k = 0; k < t.numel(); ++k) {
                std::uint8_t b[4];
                r.bytes(b, 4);
                std::uint32_t bits = 0;
                for (int j = 0; j < 4; ++j) bits |= static_cast<std::uint32_t>(b[j]) << (8 * j);
                t.data()[k] = static_cast<double>(std::bit_cast<float>(bits));
            }
        } else {
            for (std::int64_t k = 0; k < t.numel(); ++k)
                t.data()[k] = std::bit_cast<double>(r.u64());
        }
        store.params.emplace(name, tensor::Param(std::move(t)));
        expected.erase(it);
    }
    if (!expected.empty())
        throw CheckpointError(CheckpointError::Reason::mismatch,
                              "checkpoint is missing tensor '" + expected.begin()->first + "'");
    if (!r.at_eof())
        throw CheckpointError(CheckpointError::Reason::mismatch,
                              "trailing bytes after last tensor in checkpoint");
    return store;
}

}  // namespace delicate::model
