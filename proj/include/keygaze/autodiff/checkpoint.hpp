#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>

#include "keygaze/autodiff/optim.hpp"
#include "keygaze/autodiff/tensor.hpp"
#include "keygaze/core/io.hpp"

namespace keygaze::ad {

/// Binary container: magic "KGCKPT01", u32 version, u64 step, u32 metadata
/// length + UTF-8 JSON metadata, u32 tensor count, then per tensor
/// u32 name length, name, u64 rows, u64 cols, rows*cols f64 (row-major).
/// All integers and reals little-endian.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    std::uint64_t step = 0;
    std::string metadata = "{}";
    std::map<std::string, Mat> tensors;

    const Mat& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
        return it->second;
    }
};

namespace detail {

constexpr char kMagic[8] = {'K', 'G', 'C', 'K', 'P', 'T', '0', '1'};

template <class T>
void put(std::string& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& s) : s_(s) {}
    template <class T>
    T get() {
        need(sizeof(T));
        unsigned char b[sizeof(T)];
        std::memcpy(b, s_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        T v;
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    bool done() const { return pos_ == s_.size(); }

private:
    void need(std::size_t n) const {
        if (s_.size() - pos_ < n) throw DataError("checkpoint: truncated file");
    }
    const std::string& s_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize(const Checkpoint& c) {
    std::string out(detail::kMagic, 8);
    detail::put<std::uint32_t>(out, Checkpoint::kVersion);
    detail::put<std::uint64_t>(out, c.step);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.metadata.size()));
    out += c.metadata;
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, m] : c.tensors) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
        detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) detail::put<double>(out, m.data()[i]);
    }
    return out;
}

inline Checkpoint deserialize(const std::string& bytes) {
    detail::Reader r(bytes);
    if (r.bytes(8) != std::string(detail::kMagic, 8)) throw DataError("checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != Checkpoint::kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint c;
    c.step = r.get<std::uint64_t>();
    c.metadata = r.bytes(r.get<std::uint32_t>());
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < n; ++k) {
        std::string name = r.bytes(r.get<std::uint32_t>());
        const auto rows = r.get<std::uint64_t>();
        const auto cols = r.get<std::uint64_t>();
        if (rows > (1u << 24) || cols > (1u << 24)) throw DataError("checkpoint: implausible shape for " + name);
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.get<double>();
        c.tensors.emplace(std::move(name), std::move(m));
    }
    if (!r.done()) throw DataError("checkpoint: trailing bytes");
    return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    io::write_file_atomic(path, serialize(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

/// Parameters plus Adam moments ("adam.m/<name>", "adam.v/<name>").
inline void store_optimizer(Checkpoint& c, const Adam& opt) {
    c.step = opt.steps();
    for (std::size_t i = 0; i < opt.params().size(); ++i) {
        const auto& p = opt.params()[i];
        c.tensors[p.name] = p.tensor.value();
        c.tensors["adam.m/" + p.name] = opt.first_moments()[i];
        c.tensors["adam.v/" + p.name] = opt.second_moments()[i];
    }
}

inline void restore_optimizer(const Checkpoint& c, Adam& opt) {
    for (std::size_t i = 0; i < opt.params().size(); ++i) {
        const auto& p = opt.params()[i];
        Tensor t = p.tensor;
        const Mat& v = c.at(p.name);
        if (v.rows() != t.rows() || v.cols() != t.cols())
            throw DataError("checkpoint: shape mismatch for " + p.name + " " + shape_str(v) + " vs " +
                            shape_str(t.value()));
        t.mutable_value() = v;
        opt.first_moments()[i] = c.at("adam.m/" + p.name);
        opt.second_moments()[i] = c.at("adam.v/" + p.name);
    }
    opt.set_steps(c.step);
}

/// Loads parameter values only.
inline void load_parameters(const Checkpoint& c, const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
        Tensor t = p.tensor;
        const Mat& v = c.at(p.name);
        if (v.rows() != t.rows() || v.cols() != t.cols())
            throw DataError("checkpoint: shape mismatch for " + p.name + " " + shape_str(v) + " vs " +
                            shape_str(t.value()));
        t.mutable_value() = v;
    }
}

} // namespace keygaze::ad
