#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace vidinr {

/// Versioned binary tensor container.
///
///   magic "VINRCKPT" | u32 version | u64 config digest | u32 record count
///   per record: u32 name length | name | u8 dtype | u32 ndim | i64 dims[ndim]
///               | u64 payload bytes | payload (little-endian)
///   trailer: u64 FNV-1a of every preceding byte
inline constexpr std::uint32_t kArchiveVersion = 1;

struct TensorRecord {
    std::string name;
    torch::Tensor tensor;
};

struct TensorArchive {
    std::uint32_t version = kArchiveVersion;
    std::uint64_t digest = 0;
    std::vector<TensorRecord> records;

    const torch::Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;
};

std::string encode_archive(const TensorArchive& archive);
/// Throws ParseError with the byte offset of the first inconsistency.
TensorArchive decode_archive(const std::string& bytes);

/// Writes to a temporary sibling, then renames over `path`.
void write_archive(const std::string& path, const TensorArchive& archive);
TensorArchive read_archive(const std::string& path);

torch::Tensor text_tensor(const std::string& text);
std::string tensor_text(const torch::Tensor& t);

}  // namespace vidinr
