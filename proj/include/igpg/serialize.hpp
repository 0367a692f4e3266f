#pragma once

// Little-endian binary containers. Every file is [magic bytes][payload]
// [crc32 of payload], so truncation and bit corruption surface as structured
// errors instead of garbage reads.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "igpg/tensor.hpp"

namespace igpg {

struct IoError : std::runtime_error {
    explicit IoError(const std::string &what) : std::runtime_error(what) {}
};

inline uint32_t crc32(const uint8_t *data, size_t len, uint32_t seed = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t c = seed ^ 0xffffffffu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }

    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }

    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }

    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }

    void str(const std::string &s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    void f64_array(const std::vector<double> &v) {
        u64(v.size());
        for (double x : v) f64(x);
    }

    const std::vector<uint8_t> &bytes() const { return buf_; }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t *data, size_t len) : data_(data), len_(len) {}

    uint8_t u8() { return take(1)[0]; }

    uint32_t u32() {
        const uint8_t *p = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        return v;
    }

    uint64_t u64() {
        const uint8_t *p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        return v;
    }

    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string str() {
        const uint32_t n = u32();
        const uint8_t *p = take(n);
        return std::string(reinterpret_cast<const char *>(p), n);
    }

    std::vector<double> f64_array() {
        const uint64_t n = u64();
        if (n > len_ - pos_) throw IoError("truncated file: array of " + std::to_string(n) + " values");
        std::vector<double> v(n);
        for (auto &x : v) x = f64();
        return v;
    }

    bool done() const { return pos_ == len_; }

private:
    const uint8_t *take(size_t n) {
        if (pos_ + n > len_) throw IoError("truncated file: wanted " + std::to_string(n) + " more bytes");
        const uint8_t *p = data_ + pos_;
        pos_ += n;
        return p;
    }

    const uint8_t *data_;
    size_t len_;
    size_t pos_ = 0;
};

inline void write_file(const std::string &path, const std::string &magic, const std::vector<uint8_t> &payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
    out.write(reinterpret_cast<const char *>(payload.data()), static_cast<std::streamsize>(payload.size()));
    const uint32_t crc = crc32(payload.data(), payload.size());
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>(crc >> (8 * i)));
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<uint8_t> read_file(const std::string &path, const std::string &magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<uint8_t> all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (all.size() < magic.size() + 4) throw IoError(path + ": file too short");
    if (std::memcmp(all.data(), magic.data(), magic.size()) != 0) {
        throw IoError(path + ": bad magic, expected " + magic);
    }
    const size_t payload_len = all.size() - magic.size() - 4;
    const uint8_t *payload = all.data() + magic.size();
    uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<uint32_t>(all[all.size() - 4 + i]) << (8 * i);
    if (crc32(payload, payload_len) != stored) throw IoError(path + ": checksum mismatch");
    return std::vector<uint8_t>(payload, payload + payload_len);
}

// Named-tensor container shared by the tokenizer and prior checkpoints:
// string metadata plus named f64 tensors with shapes.
struct TensorStore {
    std::map<std::string, std::string> meta;
    std::map<std::string, std::pair<Shape, std::vector<double>>> tensors;

    void put(const std::string &name, const Tensor &t) { tensors[name] = {t.shape(), t.data()}; }

    void put_meta(const std::string &key, const std::string &value) { meta[key] = value; }

    int64_t meta_int(const std::string &key) const { return std::stoll(meta_at(key)); }
    double meta_double(const std::string &key) const { return std::stod(meta_at(key)); }

    const std::string &meta_at(const std::string &key) const {
        auto it = meta.find(key);
        if (it == meta.end()) throw IoError("checkpoint missing metadata key: " + key);
        return it->second;
    }

    Tensor get(const std::string &name, bool requires_grad = false) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw IoError("checkpoint missing tensor: " + name);
        return Tensor::from_data(it->second.first, it->second.second, requires_grad);
    }

    void save(const std::string &path, const std::string &magic) const {
        ByteWriter w;
        w.u32(static_cast<uint32_t>(meta.size()));
        for (const auto &[k, v] : meta) {
            w.str(k);
            w.str(v);
        }
        w.u32(static_cast<uint32_t>(tensors.size()));
        for (const auto &[name, sv] : tensors) {
            w.str(name);
            w.u32(static_cast<uint32_t>(sv.first.size()));
            for (int d : sv.first) w.u32(static_cast<uint32_t>(d));
            w.f64_array(sv.second);
        }
        write_file(path, magic, w.bytes());
    }

    static TensorStore load(const std::string &path, const std::string &magic) {
        const auto payload = read_file(path, magic);
        ByteReader r(payload.data(), payload.size());
        TensorStore s;
        const uint32_t nm = r.u32();
        for (uint32_t i = 0; i < nm; ++i) {
            std::string k = r.str();
            s.meta[k] = r.str();
        }
        const uint32_t nt = r.u32();
        for (uint32_t i = 0; i < nt; ++i) {
            std::string name = r.str();
            const uint32_t nd = r.u32();
            Shape shape(nd);
            for (auto &d : shape) d = static_cast<int>(r.u32());
            s.tensors[name] = {shape, r.f64_array()};
        }
        if (!r.done()) throw IoError(path + ": trailing bytes after payload");
        return s;
    }
};

}  // namespace igpg
