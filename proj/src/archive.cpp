#include "vidinr/archive.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vidinr/errors.hpp"
#include "vidinr/rng.hpp"

static_assert(std::endian::native == std::endian::little, "archive IO assumes a little-endian host");

namespace vidinr {

namespace {

constexpr char kMagic[8] = {'V', 'I', 'N', 'R', 'C', 'K', 'P', 'T'};

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i64 = 2, u8 = 3 };

DType dtype_code(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat32: return DType::f32;
        case torch::kFloat64: return DType::f64;
        case torch::kInt64: return DType::i64;
        case torch::kUInt8: return DType::u8;
        default: throw std::invalid_argument("archive: unsupported tensor dtype");
    }
}

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <class T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string take(std::uint64_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void need(std::uint64_t n, const char* what) const {
        if (n > bytes_.size() - pos_) throw ParseError(std::string("archive truncated while reading ") + what, pos_);
    }
    std::uint64_t pos() const { return pos_; }

private:
    const std::string& bytes_;
    std::uint64_t pos_ = 0;
};

}  // namespace

const torch::Tensor& TensorArchive::at(const std::string& name) const {
    for (const auto& r : records)
        if (r.name == name) return r.tensor;
    throw std::out_of_range("archive has no record '" + name + "'");
}

bool TensorArchive::contains(const std::string& name) const {
    for (const auto& r : records)
        if (r.name == name) return true;
    return false;
}

std::string encode_archive(const TensorArchive& archive) {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, archive.version);
    put<std::uint64_t>(out, archive.digest);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.records.size()));
    for (const auto& r : archive.records) {
        auto t = r.tensor.detach().contiguous().cpu();
        put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
        out += r.name;
        put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype_code(t.scalar_type())));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
        for (auto s : t.sizes()) put<std::int64_t>(out, s);
        const auto nbytes = static_cast<std::uint64_t>(t.numel() * t.element_size());
        put<std::uint64_t>(out, nbytes);
        out.append(static_cast<const char*>(t.data_ptr()), nbytes);
    }
    put<std::uint64_t>(out, fnv1a64(out));
    return out;
}

TensorArchive decode_archive(const std::string& bytes) {
    Reader rd(bytes);
    if (rd.take(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) throw ParseError("bad archive magic", 0);
    TensorArchive a;
    a.version = rd.get<std::uint32_t>("version");
    if (a.version != kArchiveVersion)
        throw ParseError("unsupported archive version " + std::to_string(a.version), rd.pos() - 4);
    a.digest = rd.get<std::uint64_t>("digest");
    const auto count = rd.get<std::uint32_t>("record count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = rd.get<std::uint32_t>("name length");
        TensorRecord rec;
        rec.name = rd.take(name_len, "record name");
        const auto code_pos = rd.pos();
        const auto code = rd.get<std::uint8_t>("dtype");
        torch::ScalarType st;
        switch (static_cast<DType>(code)) {
            case DType::f32: st = torch::kFloat32; break;
            case DType::f64: st = torch::kFloat64; break;
            case DType::i64: st = torch::kInt64; break;
            case DType::u8: st = torch::kUInt8; break;
            default: throw ParseError("unknown dtype code " + std::to_string(code), code_pos);
        }
        const auto ndim = rd.get<std::uint32_t>("ndim");
        if (ndim > 16) throw ParseError("implausible tensor rank " + std::to_string(ndim), rd.pos() - 4);
        std::vector<std::int64_t> dims(ndim);
        std::uint64_t numel = 1;
        for (auto& d : dims) {
            d = rd.get<std::int64_t>("dims");
            if (d < 0) throw ParseError("negative dimension", rd.pos() - 8);
            numel *= static_cast<std::uint64_t>(d);
        }
        const auto nbytes_pos = rd.pos();
        const auto nbytes = rd.get<std::uint64_t>("payload size");
        if (nbytes != numel * torch::elementSize(st))
            throw ParseError("payload size does not match shape of '" + rec.name + "'", nbytes_pos);
        auto payload = rd.take(nbytes, "payload");
        rec.tensor = torch::empty(dims, torch::TensorOptions().dtype(st));
        if (nbytes) std::memcpy(rec.tensor.data_ptr(), payload.data(), nbytes);
        a.records.push_back(std::move(rec));
    }
    const auto body_end = rd.pos();
    const auto checksum = rd.get<std::uint64_t>("checksum");
    if (checksum != fnv1a64(std::string_view(bytes.data(), body_end))) throw ParseError("archive checksum mismatch", body_end);
    if (rd.pos() != bytes.size()) throw ParseError("trailing bytes after archive", rd.pos());
    return a;
}

void write_archive(const std::string& path, const TensorArchive& archive) {
    const auto bytes = encode_archive(archive);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

TensorArchive read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_archive(ss.str());
}

torch::Tensor text_tensor(const std::string& text) {
    auto t = torch::empty({static_cast<std::int64_t>(text.size())}, torch::kUInt8);
    if (!text.empty()) std::memcpy(t.data_ptr(), text.data(), text.size());
    return t;
}

std::string tensor_text(const torch::Tensor& t) {
    auto c = t.contiguous();
    return std::string(static_cast<const char*>(c.data_ptr()), static_cast<std::size_t>(c.numel()));
}

}  // namespace vidinr
