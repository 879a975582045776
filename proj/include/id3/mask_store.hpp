#pragma once

#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "id3/model.hpp"
#include "id3/selection.hpp"

namespace id3 {

// Sparse checkpoint: only unmasked scalars, as (row, col, value) per named
// tensor block. Canonical: blocks in registry order, entries sorted by
// (row, col), empty blocks omitted, little-endian throughout.
//
// layout: magic "IDMK", version u32, block count u32;
//         per block: name length u32, name bytes, entry count u32,
//         entries of row u32, col u32, value f64.
struct SparseEntry {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    double value = 0.0;

    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

struct SparseBlock {
    std::string name;
    std::vector<SparseEntry> entries;

    friend bool operator==(const SparseBlock&, const SparseBlock&) = default;
};

struct SparseCheckpoint {
    std::uint32_t version = 1;
    std::vector<SparseBlock> blocks;

    std::size_t entry_count() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.entries.size();
        return n;
    }

    friend bool operator==(const SparseCheckpoint&, const SparseCheckpoint&) = default;
};

inline constexpr char kSparseMagic[4] = {'I', 'D', 'M', 'K'};
inline constexpr std::size_t kSparseEntryBytes = 16;

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>(u >> (8 * i)));
    }
    void raw(const std::string& s) { bytes_.append(s); }
    std::string take() { return std::move(bytes_); }

private:
    std::string bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
                 << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64() {
        need(8, "f64");
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i)
            u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
                 << (8 * i);
        pos_ += 8;
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }

    std::string raw(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (pos_ + n > bytes_.size())
            throw FormatError(std::string("truncated stream reading ") + what, pos_);
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

// Checkpoint of the masked scalars of a model. Rank-1 tensors use
// row = flat offset, col = 0.
inline SparseCheckpoint make_checkpoint(const Model& model, const MaskSet& mask) {
    SparseCheckpoint ckpt;
    const auto& reg = model.registry();
    for (std::size_t t = 0; t < reg.size(); ++t) {
        const Tensor& v = reg[t].value;
        if (v.rows() >= (1ULL << 32) || v.cols() >= (1ULL << 32)) {
            throw CapacityError("tensor " + reg[t].name + " exceeds 32-bit index range");
        }
        SparseBlock block;
        block.name = reg[t].name;
        const std::size_t cols = v.rank() == 2 ? v.cols() : 1;
        for (std::size_t o = 0; o < v.size(); ++o) {
            if (!mask.contains({static_cast<std::uint32_t>(t), o})) continue;
            block.entries.push_back({static_cast<std::uint32_t>(o / cols),
                                     static_cast<std::uint32_t>(o % cols), v[o]});
        }
        if (!block.entries.empty()) ckpt.blocks.push_back(std::move(block));
    }
    return ckpt;
}

inline std::string encode(const SparseCheckpoint& ckpt) {
    detail::ByteWriter w;
    w.raw(std::string(kSparseMagic, 4));
    w.u32(ckpt.version);
    w.u32(static_cast<std::uint32_t>(ckpt.blocks.size()));
    for (const auto& b : ckpt.blocks) {
        w.u32(static_cast<std::uint32_t>(b.name.size()));
        w.raw(b.name);
        w.u32(static_cast<std::uint32_t>(b.entries.size()));
        for (const auto& e : b.entries) {
            w.u32(e.row);
            w.u32(e.col);
            w.f64(e.value);
        }
    }
    return w.take();
}

inline std::string encode(const Model& model, const MaskSet& mask) {
    return encode(make_checkpoint(model, mask));
}

inline SparseCheckpoint decode(const std::string& bytes) {
    detail::ByteReader r(bytes);
    const std::string magic = r.raw(4, "magic");
    if (std::memcmp(magic.data(), kSparseMagic, 4) != 0) {
        throw FormatError("bad magic, expected IDMK", 0);
    }
    SparseCheckpoint ckpt;
    ckpt.version = r.u32();
    const std::uint32_t nblocks = r.u32();
    for (std::uint32_t i = 0; i < nblocks; ++i) {
        SparseBlock block;
        const std::uint32_t name_len = r.u32();
        block.name = r.raw(name_len, "tensor name");
        const std::uint32_t nentries = r.u32();
        for (std::uint32_t j = 0; j < nentries; ++j) {
            const std::size_t at = r.pos();
            SparseEntry e{r.u32(), r.u32(), r.f64()};
            if (!block.entries.empty()) {
                const SparseEntry& prev = block.entries.back();
                if (std::tie(e.row, e.col) <= std::tie(prev.row, prev.col)) {
                    throw FormatError("unsorted or duplicate entry in block '" + block.name +
                                          "'",
                                      at);
                }
            }
            block.entries.push_back(e);
        }
        ckpt.blocks.push_back(std::move(block));
    }
    if (!r.done()) throw FormatError("trailing bytes after last block", r.pos());
    return ckpt;
}

// Overwrite the addressed scalars of a pretrained model; everything else
// is left untouched.
inline void apply(const SparseCheckpoint& ckpt, Model& model) {
    for (const auto& b : ckpt.blocks) {
        auto t = model.find_tensor(b.name);
        if (!t) throw ApplyError("unknown tensor '" + b.name + "' in checkpoint");
        Tensor& v = model.registry_mut()[*t].value;
        const std::size_t rows = v.rows();
        const std::size_t cols = v.rank() == 2 ? v.cols() : 1;
        for (const auto& e : b.entries) {
            if (e.row >= rows || e.col >= cols) {
                throw ApplyError("index (" + std::to_string(e.row) + ", " +
                                 std::to_string(e.col) + ") out of range for tensor '" +
                                 b.name + "' " + v.shape_string());
            }
            v[e.row * cols + e.col] = e.value;
        }
    }
}

}  // namespace id3
