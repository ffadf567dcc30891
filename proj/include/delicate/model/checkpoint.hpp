#pragma once

#include <string>

#include "delicate/error.hpp"
#include "delicate/model/params.hpp"

namespace delicate::model {

// Binary checkpoint:
//   magic "DLCT", format version u32 LE,
//   config block: u32 field count, then per field u32 name length + UTF-8
//     name + i64 LE value,
//   u32 tensor count, then per tensor: u32 name length + UTF-8 name,
//     u32 rank, u64 LE dims, u8 precision tag (4 = f32, 8 = f64),
//     raw little-endian row-major payload.
// Round trips are bit-exact.

class CheckpointError : public Error {
public:
    enum class Reason { bad_magic_or_version, truncated, mismatch };

    CheckpointError(Reason reason, const std::string& message)
        : Error(ErrorKind::data, message), reason_(reason) {}

    Reason reason() const noexcept { return reason_; }

private:
    Reason reason_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamStore& store, const std::string& path);

// Loads and validates against the embedded config. When `expect` is given,
// the stored config must match its architecture exactly (tied/untied
// included) or a mismatch error is raised before any state is returned.
ParamStore load_checkpoint(const std::string& path, const ModelConfig* expect = nullptr);

}  // namespace delicate::model
