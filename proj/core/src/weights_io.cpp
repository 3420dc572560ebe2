#include "stickernet/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include "stickernet/error.hpp"

namespace stickernet::nn {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw DataError("weight file truncated");
    }
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

NamedArray to_named(const std::string& name, const std::vector<std::uint32_t>& dims,
                    const std::vector<double>& values) {
    NamedArray a{name, dims, {}};
    a.data.reserve(values.size());
    for (double v : values) a.data.push_back(static_cast<float>(v));
    return a;
}

}  // namespace

std::vector<unsigned char> encode_weights(std::span<const NamedArray> arrays) {
    std::vector<unsigned char> out(std::begin(kWeightMagic), std::end(kWeightMagic));
    put_u32(out, kWeightVersion);
    put_u32(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
        if (element_count(a.dims) != a.data.size()) {
            throw InputError("weight entry " + a.name + ": data length does not match dims");
        }
        put_u32(out, static_cast<std::uint32_t>(a.name.size()));
        out.insert(out.end(), a.name.begin(), a.name.end());
        put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
        for (auto d : a.dims) put_u32(out, d);
        for (float f : a.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

std::vector<NamedArray> decode_weights(std::span<const unsigned char> bytes) {
    Reader r(bytes);
    if (r.str(4) != std::string(kWeightMagic, 4)) throw DataError("not a weight file (bad magic)");
    const auto version = r.u32();
    if (version != kWeightVersion) throw DataError("unsupported weight file version " + std::to_string(version));
    const auto count = r.u32();
    std::vector<NamedArray> arrays;
    arrays.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = r.str(r.u32());
        const auto rank = r.u32();
        for (std::uint32_t d = 0; d < rank; ++d) a.dims.push_back(r.u32());
        const std::size_t n = element_count(a.dims);
        a.data.resize(n);
        for (std::size_t j = 0; j < n; ++j) a.data[j] = std::bit_cast<float>(r.u32());
        arrays.push_back(std::move(a));
    }
    if (!r.done()) throw DataError("trailing bytes after weight entries");
    return arrays;
}

void write_weight_file(const std::filesystem::path& path, std::span<const NamedArray> arrays) {
    const auto bytes = encode_weights(arrays);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

std::vector<NamedArray> read_weight_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weight file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_weights(bytes);
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const SgdMomentum* optimizer,
                     std::optional<int> epoch) {
    std::vector<NamedArray> arrays;
    for (const auto& p : params) arrays.push_back(to_named(p.name, p.dims, p.value));
    if (optimizer != nullptr && optimizer->velocity().size() == params.size()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            arrays.push_back(to_named(kVelocityPrefix + params[i].name, params[i].dims, optimizer->velocity()[i]));
        }
    }
    if (epoch) arrays.push_back(NamedArray{kEpochEntry, {1}, {static_cast<float>(*epoch)}});
    write_weight_file(path, arrays);
}

std::optional<int> load_checkpoint(const std::filesystem::path& path, ModelParams& params,
                                   SgdMomentum* optimizer) {
    const auto arrays = read_weight_file(path);
    std::unordered_map<std::string, const NamedArray*> by_name;
    for (const auto& a : arrays) by_name.emplace(a.name, &a);

    auto fetch = [&](const std::string& name, const Parameter& p) -> const NamedArray* {
        auto it = by_name.find(name);
        if (it == by_name.end()) return nullptr;
        if (it->second->dims != p.dims) throw DataError("weight entry " + name + " has mismatched shape");
        return it->second;
    };

    for (auto& p : params) {
        const NamedArray* a = fetch(p.name, p);
        if (a == nullptr) throw DataError("weight file " + path.string() + " lacks parameter " + p.name);
        p.value.assign(a->data.begin(), a->data.end());
    }
    if (optimizer != nullptr) {
        std::vector<std::vector<double>> velocity;
        for (const auto& p : params) {
            const NamedArray* a = fetch(kVelocityPrefix + p.name, p);
            if (a == nullptr) break;
            velocity.emplace_back(a->data.begin(), a->data.end());
        }
        if (velocity.size() == params.size()) optimizer->velocity() = std::move(velocity);
    }
    if (auto it = by_name.find(kEpochEntry); it != by_name.end() && it->second->data.size() == 1) {
        return static_cast<int>(it->second->data[0]);
    }
    return std::nullopt;
}

}  // namespace stickernet::nn
